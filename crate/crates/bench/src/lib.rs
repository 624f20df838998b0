// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte-Carlo harness: simulate a built-in model many times, run the
//! detector on every replicate and aggregate accuracy, coverage and timing.
//!
//! Replicate `r` of a run with master seed `s` draws its data from
//! `derive_seed(s, [r])` and its bootstrap resamples from
//! `derive_seed(s, [r, 1])`, so results do not depend on how replicates are
//! spread over threads.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use lrsm_core::metrics::{tpr, zeta_metrics};
use lrsm_core::rng::derive_seed;
use lrsm_core::scan::default_window;
use lrsm_core::{
    builtin_model, simulate_mcp, simultaneous_ci, CiMethod, CiRequest, LrsmError, McpSpec,
    ScanConfig, WindowRule, DEFAULT_BURN_IN,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] LrsmError),
    #[error("unknown experiment `{0}`; expected one of: {1}")]
    UnknownExperiment(String, String),
    #[error("replication count must be positive")]
    NoReplicates,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

/// Seed of the simulated data of replicate `rep`.
pub fn replicate_seed(master: u64, rep: usize) -> u64 {
    derive_seed(master, &[rep as u64])
}

/// Seed of the bootstrap draws of replicate `rep`.
pub fn bootstrap_seed(master: u64, rep: usize) -> u64 {
    derive_seed(master, &[rep as u64, 1])
}

fn fractions(taus: &[usize], n: usize) -> Vec<f64> {
    taus.iter().map(|&t| t as f64 / n as f64).collect()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, k) = v.fold((0.0, 0usize), |(s, k), x| (s + x, k + 1));
    if k == 0 {
        f64::NAN
    } else {
        s / k as f64
    }
}

/// Outcome of one detection replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub rep: usize,
    pub seed: u64,
    pub m0: usize,
    pub m_hat: usize,
    /// Estimated change-points, space separated.
    pub taus: String,
    pub orders: String,
    pub zeta_u: f64,
    pub zeta_o: f64,
    pub zeta_d: f64,
    pub mdl: f64,
    pub seconds: f64,
}

impl ReplicateRecord {
    pub fn tau_values(&self) -> Vec<usize> {
        self.taus
            .split_whitespace()
            .filter_map(|t| t.parse().ok())
            .collect()
    }
}

/// Aggregate row of a detection experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub model: String,
    pub n: usize,
    pub radii: Vec<usize>,
    pub reps: usize,
    pub m0: usize,
    pub tpr: f64,
    pub zeta_u: f64,
    pub zeta_o: f64,
    pub zeta_d: f64,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub summary: ExperimentSummary,
    pub records: Vec<ReplicateRecord>,
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn detect_replicate(
    spec: &McpSpec,
    cfg: &ScanConfig,
    master: u64,
    rep: usize,
) -> Result<ReplicateRecord> {
    let seed = replicate_seed(master, rep);
    let series = simulate_mcp(spec, DEFAULT_BURN_IN, seed);
    let start = Instant::now();
    let est = lrsm_core::lrsm_detect(&series, cfg)?;
    let seconds = start.elapsed().as_secs_f64();
    let (zeta_u, zeta_o, zeta_d) = if spec.taus.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let z = zeta_metrics(
            &fractions(est.taus.taus(), spec.n),
            &fractions(spec.taus.taus(), spec.n),
        )?;
        (z.under, z.over, z.distance)
    };
    Ok(ReplicateRecord {
        rep,
        seed,
        m0: spec.m(),
        m_hat: est.m_hat,
        taus: join(est.taus.taus()),
        orders: join(&est.orders),
        zeta_u,
        zeta_o,
        zeta_d,
        mdl: est.mdl,
        seconds,
    })
}

/// Aggregates per-replicate records into a summary row.
pub fn summarize(
    model: &str,
    n: usize,
    radii: &[usize],
    records: &[ReplicateRecord],
) -> Result<ExperimentSummary> {
    let first = records.first().ok_or(BenchError::NoReplicates)?;
    let mhats: Vec<usize> = records.iter().map(|r| r.m_hat).collect();
    Ok(ExperimentSummary {
        model: model.to_string(),
        n,
        radii: radii.to_vec(),
        reps: records.len(),
        m0: first.m0,
        tpr: tpr(&mhats, first.m0)?,
        zeta_u: mean(records.iter().map(|r| r.zeta_u)),
        zeta_o: mean(records.iter().map(|r| r.zeta_o)),
        zeta_d: mean(records.iter().map(|r| r.zeta_d)),
        mean_seconds: mean(records.iter().map(|r| r.seconds)),
    })
}

/// Simulates `model` at length `n` `reps` times and runs the detector.
pub fn run_experiment(
    model: &str,
    n: usize,
    cfg: &ScanConfig,
    reps: usize,
    seed: u64,
) -> Result<Experiment> {
    if reps == 0 {
        return Err(BenchError::NoReplicates);
    }
    let spec = builtin_model(model, n)?;
    let records: Vec<ReplicateRecord> = (0..reps)
        .into_par_iter()
        .map(|rep| detect_replicate(&spec, cfg, seed, rep))
        .collect::<Result<_>>()?;
    let summary = summarize(model, n, &cfg.radii, &records)?;
    Ok(Experiment { summary, records })
}

/// Intervals of one replicate; empty unless `m̂ = m0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiRecord {
    pub rep: usize,
    pub seed: u64,
    pub m_hat: usize,
    pub correct: bool,
    pub tau_hat: Vec<usize>,
    pub lower: Vec<usize>,
    pub upper: Vec<usize>,
    pub n_b: Vec<Option<usize>>,
    pub bandwidth_capped: Vec<Option<bool>>,
}

/// Coverage of one true change-point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub index: usize,
    pub tau0: usize,
    pub coverage: f64,
    pub mean_lower: f64,
    pub mean_upper: f64,
    pub median_tau_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiSummary {
    pub model: String,
    pub n: usize,
    pub method: CiMethod,
    pub alpha: f64,
    pub reps: usize,
    /// Replicates with `m̂ = m0`; only these enter the coverage.
    pub correct: usize,
    pub rows: Vec<CoverageRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiExperiment {
    pub summary: CiSummary,
    pub records: Vec<CiRecord>,
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn method_of(request: &CiRequest) -> CiMethod {
    match request {
        CiRequest::Approx => CiMethod::Approx,
        CiRequest::Pba { .. } => CiMethod::Pba,
        CiRequest::Bba { .. } => CiMethod::Bba,
    }
}

/// Aggregates interval records; `truth` are the true change-points.
pub fn summarize_ci(
    model: &str,
    n: usize,
    request: &CiRequest,
    alpha: f64,
    truth: &[usize],
    records: &[CiRecord],
) -> CiSummary {
    let correct: Vec<&CiRecord> = records.iter().filter(|r| r.correct).collect();
    let rows = truth
        .iter()
        .enumerate()
        .map(|(j, &tau0)| {
            let hit = correct
                .iter()
                .filter(|r| r.lower[j] <= tau0 && tau0 <= r.upper[j])
                .count();
            let mut taus: Vec<f64> = correct.iter().map(|r| r.tau_hat[j] as f64).collect();
            CoverageRow {
                index: j + 1,
                tau0,
                coverage: if correct.is_empty() {
                    f64::NAN
                } else {
                    hit as f64 / correct.len() as f64
                },
                mean_lower: mean(correct.iter().map(|r| r.lower[j] as f64)),
                mean_upper: mean(correct.iter().map(|r| r.upper[j] as f64)),
                median_tau_hat: median(&mut taus),
            }
        })
        .collect();
    CiSummary {
        model: model.to_string(),
        n,
        method: method_of(request),
        alpha,
        reps: records.len(),
        correct: correct.len(),
        rows,
    }
}

/// Coverage study: detection followed by simultaneous intervals at level
/// `1 − alpha` on every replicate that finds the true number of change-points.
pub fn run_ci_experiment(
    model: &str,
    n: usize,
    cfg: &ScanConfig,
    request: &CiRequest,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<CiExperiment> {
    let mut out = run_ci_experiments(
        model,
        n,
        cfg,
        std::slice::from_ref(request),
        alpha,
        reps,
        seed,
    )?;
    Ok(out.remove(0))
}

/// [`run_ci_experiment`] for several interval constructions that share one
/// detection pass per replicate.
pub fn run_ci_experiments(
    model: &str,
    n: usize,
    cfg: &ScanConfig,
    requests: &[CiRequest],
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<CiExperiment>> {
    if reps == 0 {
        return Err(BenchError::NoReplicates);
    }
    let spec = builtin_model(model, n)?;
    let per_rep: Vec<Vec<CiRecord>> = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<Vec<CiRecord>> {
            let data_seed = replicate_seed(seed, rep);
            let series = simulate_mcp(&spec, DEFAULT_BURN_IN, data_seed);
            let est = lrsm_core::lrsm_detect(&series, cfg)?;
            let correct = est.m_hat == spec.m() && est.m_hat > 0;
            requests
                .iter()
                .map(|request| {
                    let cis = if correct {
                        simultaneous_ci(&series, &est, request, alpha, bootstrap_seed(seed, rep))?
                    } else {
                        Vec::new()
                    };
                    Ok(CiRecord {
                        rep,
                        seed: data_seed,
                        m_hat: est.m_hat,
                        correct,
                        tau_hat: cis.iter().map(|c| c.tau_hat).collect(),
                        lower: cis.iter().map(|c| c.lower).collect(),
                        upper: cis.iter().map(|c| c.upper).collect(),
                        n_b: cis.iter().map(|c| c.meta.n_b).collect(),
                        bandwidth_capped: cis.iter().map(|c| c.meta.bandwidth_capped).collect(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(requests
        .iter()
        .enumerate()
        .map(|(k, request)| {
            let records: Vec<CiRecord> = per_rep.iter().map(|r| r[k].clone()).collect();
            let summary = summarize_ci(model, n, request, alpha, spec.taus.taus(), &records);
            CiExperiment { summary, records }
        })
        .collect())
}

/// Window radius used by [`scaling_probe`] at each length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HRule {
    Fixed(usize),
    Formula { d: f64, rule: WindowRule },
}

impl HRule {
    pub fn radius(self, n: usize) -> usize {
        match self {
            HRule::Fixed(h) => h,
            HRule::Formula { d, rule } => default_window(n, d, rule),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub h: usize,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub model: String,
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `ln seconds` on `ln(n h)`; absent for fewer
    /// than two distinct `n h`.
    pub slope: Option<f64>,
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let mx = mean(x.iter().copied());
    let my = mean(y.iter().copied());
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// Mean detection time over `reps` replicates at each length of `n_grid`.
///
/// Replicates run one after another so timings are not inflated by
/// contention between threads.
pub fn scaling_probe(
    model: &str,
    n_grid: &[usize],
    h_rule: HRule,
    reps: usize,
    seed: u64,
) -> Result<ScalingTable> {
    if reps == 0 {
        return Err(BenchError::NoReplicates);
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let h = h_rule.radius(n);
        let spec = builtin_model(model, n)?;
        let cfg = ScanConfig::new(h);
        let mut total = 0.0;
        for rep in 0..reps {
            total += detect_replicate(&spec, &cfg, seed, rep)?.seconds;
        }
        rows.push(ScalingRow {
            n,
            h,
            mean_seconds: total / reps as f64,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| ((r.n * r.h) as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.mean_seconds.ln()).collect();
    Ok(ScalingTable {
        model: model.to_string(),
        slope: ols_slope(&x, &y),
        rows,
    })
}

/// Radii of the mixed-window scan over multipliers `0.2, 0.4, …, 1.2`.
pub const D_MIX: [f64; 6] = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2];

/// Published mixed radii for `n = 2000`. Flooring [`D_MIX`] gives
/// `[26, 53, 80, 106, 133, 160]` instead.
pub const H_MIX_2000: [usize; 6] = [27, 54, 80, 107, 133, 160];

/// Mixed radii used by the experiments at sample size `n`.
pub fn mixed_radii(n: usize) -> Vec<usize> {
    if n == 2000 {
        H_MIX_2000.to_vec()
    } else {
        lrsm_core::scan::window_mix(n, &D_MIX, WindowRule::RawRule)
    }
}

/// Named experiment grids.
pub const EXPERIMENTS: [&str; 5] = ["table1", "models2000", "models10000", "coverage", "scaling"];

/// Result of a named experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExperimentOutput {
    Detection { experiments: Vec<Experiment> },
    Coverage { experiments: Vec<CiExperiment> },
    Scaling { table: ScalingTable },
}

/// Overrides for [`run_named`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedOptions {
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub bootstrap_replicates: usize,
}

impl Default for NamedOptions {
    fn default() -> Self {
        NamedOptions {
            reps: 200,
            seed: 0,
            alpha: 0.1,
            bootstrap_replicates: 500,
        }
    }
}

fn check_name(name: &str) -> Result<()> {
    if EXPERIMENTS.contains(&name) {
        Ok(())
    } else {
        Err(BenchError::UnknownExperiment(
            name.to_string(),
            EXPERIMENTS.join(", "),
        ))
    }
}

/// Runs one of [`EXPERIMENTS`].
///
/// * `table1`: model A1 over `d ∈ {0.5, 1, 1.5, 2, 2.5, 3}` and
///   `n ∈ {500, 1000, 2000}` with the max rule, then the mixed window.
/// * `models2000`: models B1–B9 and C1–C9 at `n = 2000` with `h = 133`
///   and the mixed window.
/// * `models10000`: the same models at `n = 10000` with `h = 287`.
/// * `coverage`: model B1 at `n = 2000` with approximate, parametric and
///   block (`n_b = 50`) intervals.
/// * `scaling`: model A1 at `n ∈ {2000, 4000, 8000, 16000}` with `h = 133`.
pub fn run_named(name: &str, opts: &NamedOptions) -> Result<ExperimentOutput> {
    check_name(name)?;
    let reps = opts.reps;
    let seed = opts.seed;
    let family_models = || (1..=9).flat_map(|k| [format!("B{k}"), format!("C{k}")]);
    match name {
        "table1" => {
            let mut out = Vec::new();
            for d in [0.5, 1.0, 1.5, 2.0, 2.5, 3.0] {
                for n in [500, 1000, 2000] {
                    let cfg = ScanConfig::new(default_window(n, d, WindowRule::MaxRule));
                    out.push(run_experiment("A1", n, &cfg, reps, seed)?);
                }
            }
            for n in [500, 1000, 2000] {
                let cfg = ScanConfig::with_radii(mixed_radii(n));
                out.push(run_experiment("A1", n, &cfg, reps, seed)?);
            }
            Ok(ExperimentOutput::Detection { experiments: out })
        }
        "models2000" => {
            let mut out = Vec::new();
            let mix = mixed_radii(2000);
            for model in family_models() {
                out.push(run_experiment(
                    &model,
                    2000,
                    &ScanConfig::new(133),
                    reps,
                    seed,
                )?);
                out.push(run_experiment(
                    &model,
                    2000,
                    &ScanConfig::with_radii(mix.clone()),
                    reps,
                    seed,
                )?);
            }
            Ok(ExperimentOutput::Detection { experiments: out })
        }
        "models10000" => {
            let out = family_models()
                .map(|model| run_experiment(&model, 10000, &ScanConfig::new(287), reps, seed))
                .collect::<Result<_>>()?;
            Ok(ExperimentOutput::Detection { experiments: out })
        }
        "coverage" => {
            let b = opts.bootstrap_replicates;
            let requests = [
                CiRequest::Approx,
                CiRequest::Pba {
                    n_p: None,
                    replicates: b,
                },
                CiRequest::Bba {
                    n_b: Some(50),
                    replicates: b,
                },
            ];
            let out = run_ci_experiments(
                "B1",
                2000,
                &ScanConfig::new(133),
                &requests,
                opts.alpha,
                reps,
                seed,
            )?;
            Ok(ExperimentOutput::Coverage { experiments: out })
        }
        _ => {
            let table = scaling_probe(
                "A1",
                &[2000, 4000, 8000, 16000],
                HRule::Fixed(133),
                reps,
                seed,
            )?;
            Ok(ExperimentOutput::Scaling { table })
        }
    }
}

/// Checks an experiment name without running it.
pub fn validate_experiment(name: &str) -> Result<()> {
    check_name(name)
}

/// Writes one CSV row per replicate.
pub fn write_records_csv<W: Write>(writer: W, records: &[ReplicateRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one CSV row per summary.
pub fn write_summaries_csv<W: Write>(writer: W, rows: &[ExperimentSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "model",
        "n",
        "radii",
        "reps",
        "m0",
        "tpr",
        "zeta_u",
        "zeta_o",
        "zeta_d",
        "mean_seconds",
    ])?;
    for s in rows {
        w.write_record([
            s.model.clone(),
            s.n.to_string(),
            join(&s.radii),
            s.reps.to_string(),
            s.m0.to_string(),
            s.tpr.to_string(),
            s.zeta_u.to_string(),
            s.zeta_o.to_string(),
            s.zeta_d.to_string(),
            s.mean_seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty-printed JSON of any serializable result.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}
