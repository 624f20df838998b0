// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lrsm_bench::{
    run_named, validate_experiment, write_records_csv, write_summaries_csv, ExperimentOutput,
    NamedOptions,
};
use lrsm_core::ci::{confidence_interval, DEFAULT_REPLICATES};
use lrsm_core::scan::{default_window, scan_series, window_mix};
use lrsm_core::{
    builtin_model, lrsm_detect, simulate_mcp, simultaneous_ci, CiMethod, CiRequest, CiResult,
    CountSeries, InformationCriterion, LrsmEstimate, McpSpec, OrderPolicy, ScanConfig, WindowRule,
    DEFAULT_BURN_IN,
};

use crate::args::{
    Bandwidth, BenchArgs, CiArgs, Criterion, DetectArgs, Method, Rule, SimulateArgs,
};
use crate::error::CliError;
use crate::io::{read_series, write_series};
use crate::report::{CiReport, DetectReport, MethodReport, SCHEMA_VERSION};

pub const DEFAULT_P_MAX: usize = 7;
pub const DEFAULT_M_MAX: usize = 30;
pub const DEFAULT_ALPHA: f64 = 0.1;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())
                .and_then(|()| w.flush())
                .map_err(|source| CliError::Write {
                    path: p.to_path_buf(),
                    source,
                })
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Input(format!("missing required option --{flag}")))
}

/// Truth sidecar written next to simulated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub seed: u64,
    pub burn_in: usize,
    pub n: usize,
    pub taus: Vec<usize>,
    pub spec: McpSpec,
}

pub fn truth_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".truth.json");
    PathBuf::from(s)
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let out = require(args.out, "out")?;
    let seed = args.seed.unwrap_or(0);
    let burn_in = args.burn_in.unwrap_or(DEFAULT_BURN_IN);
    let spec = match (&args.model, &args.spec) {
        (Some(model), None) => builtin_model(model, require(args.n, "n")?)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let spec: McpSpec = serde_json::from_str(&text)?;
            let spec = McpSpec::new(spec.segments, spec.taus.taus().to_vec(), spec.n)?;
            match args.n {
                Some(n) if n != spec.n => {
                    return Err(CliError::Input(format!(
                        "--n {n} disagrees with the spec length {}",
                        spec.n
                    )))
                }
                _ => spec,
            }
        }
        _ => {
            return Err(CliError::Input(
                "give exactly one of --model and --spec".into(),
            ))
        }
    };
    let series = simulate_mcp(&spec, burn_in, seed);
    let mut w = create(&out)?;
    write_series(&mut w, &series).map_err(|source| CliError::Write {
        path: out.clone(),
        source,
    })?;
    let truth = Truth {
        schema_version: SCHEMA_VERSION,
        model: args.model,
        seed,
        burn_in,
        n: spec.n,
        taus: spec.taus.taus().to_vec(),
        spec,
    };
    write_text(
        Some(&truth_path(&out)),
        &(serde_json::to_string_pretty(&truth)? + "\n"),
    )
}

/// Scan settings from the detect flags for a series of length `n`.
pub fn scan_config(args: &DetectArgs, n: usize) -> Result<ScanConfig, CliError> {
    let rule = match args.rule.unwrap_or(Rule::Raw) {
        Rule::Max => WindowRule::MaxRule,
        Rule::Raw => WindowRule::RawRule,
    };
    let radii = if let Some(mix) = &args.h_mix {
        let mut r = mix.clone();
        r.sort_unstable();
        r.dedup();
        r
    } else if let Some(ds) = &args.d_mix {
        window_mix(n, ds, rule)
    } else if let Some(h) = args.h {
        vec![h]
    } else {
        vec![default_window(n, args.d.unwrap_or(1.0), rule)]
    };
    let criterion = match args.criterion.unwrap_or(Criterion::Aic) {
        Criterion::Aic => InformationCriterion::Aic,
        Criterion::Bic => InformationCriterion::Bic,
    };
    let cfg = ScanConfig::with_radii(radii)
        .p_max(args.p_max.unwrap_or(DEFAULT_P_MAX))
        .m_max(args.m_max.unwrap_or(DEFAULT_M_MAX))
        .order(OrderPolicy::Select(criterion));
    cfg.validate(n)?;
    Ok(cfg)
}

fn write_plot_data(path: &Path, series: &CountSeries, cfg: &ScanConfig) -> Result<(), CliError> {
    let io_err = |e: csv::Error| CliError::Write {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::WriterBuilder::new().from_writer(create(path)?);
    w.write_record(["t", "score", "h"]).map_err(io_err)?;
    for &h in &cfg.radii {
        let scores = scan_series(series, h, cfg)?;
        for (t, s) in scores.iter() {
            w.write_record([t.to_string(), s.to_string(), h.to_string()])
                .map_err(io_err)?;
        }
    }
    w.flush().map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn run_detect(args: &DetectArgs) -> Result<(CountSeries, ScanConfig, LrsmEstimate), CliError> {
    let input = require(args.input.as_deref(), "in")?;
    let series = read_series(input)?;
    let cfg = scan_config(args, series.len())?;
    let est = lrsm_detect(&series, &cfg)?;
    Ok((series, cfg, est))
}

pub fn detect(args: DetectArgs) -> Result<(), CliError> {
    let (series, cfg, est) = run_detect(&args)?;
    if let Some(path) = &args.plot_data {
        write_plot_data(path, &series, &cfg)?;
    }
    let report = DetectReport::new(&series, &est, &cfg, args.seed.unwrap_or(0));
    write_text(args.out.as_deref(), &serde_json::to_string_pretty(&report)?)
}

fn requests(args: &CiArgs, replicates: usize) -> Result<Vec<CiRequest>, CliError> {
    let n_b = match &args.nb {
        None => None,
        Some(Bandwidth::Fixed(0)) => {
            return Err(CliError::Infeasible("--nb must be positive".into()))
        }
        Some(Bandwidth::Fixed(v)) => Some(*v),
        Some(Bandwidth::Named(s)) if s == "adaptive" => None,
        Some(Bandwidth::Named(s)) => {
            return Err(CliError::Input(format!(
                "--nb expects a number or `adaptive`, got `{s}`"
            )))
        }
    };
    if replicates == 0 {
        return Err(CliError::Infeasible("--B must be positive".into()));
    }
    let pba = CiRequest::Pba {
        n_p: args.np,
        replicates,
    };
    let bba = CiRequest::Bba { n_b, replicates };
    Ok(match args.method.unwrap_or(Method::All) {
        Method::Approx => vec![CiRequest::Approx],
        Method::Pba => vec![pba],
        Method::Bba => vec![bba],
        Method::All => vec![CiRequest::Approx, pba, bba],
    })
}

fn method_of(request: &CiRequest) -> CiMethod {
    match request {
        CiRequest::Approx => CiMethod::Approx,
        CiRequest::Pba { .. } => CiMethod::Pba,
        CiRequest::Bba { .. } => CiMethod::Bba,
    }
}

fn intervals(
    series: &CountSeries,
    est: &LrsmEstimate,
    request: &CiRequest,
    alpha: f64,
    seed: u64,
) -> lrsm_core::Result<(Vec<CiResult>, Vec<CiResult>)> {
    let pointwise = (1..=est.m_hat)
        .map(|j| confidence_interval(series, est, j, alpha, request, seed))
        .collect::<lrsm_core::Result<Vec<_>>>()?;
    let simultaneous = if est.m_hat == 1 {
        pointwise.clone()
    } else {
        simultaneous_ci(series, est, request, alpha, seed)?
    };
    Ok((pointwise, simultaneous))
}

pub fn ci(args: CiArgs) -> Result<(), CliError> {
    let alpha = args.alpha.unwrap_or(DEFAULT_ALPHA);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Infeasible(format!(
            "--alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let requests = requests(&args, args.replicates.unwrap_or(DEFAULT_REPLICATES))?;
    let seed = args.seed_or_default();
    let (series, est) = match &args.estimate {
        Some(path) => {
            let series = read_series(require(args.detect.input.as_deref(), "in")?)?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let report: DetectReport = serde_json::from_str(&text)?;
            let est = report.to_estimate(&series)?;
            (series, est)
        }
        None => {
            let (series, _, est) = run_detect(&args.detect)?;
            (series, est)
        }
    };
    let methods = requests
        .iter()
        .map(|request| {
            let method = method_of(request);
            if est.m_hat == 0 {
                return MethodReport {
                    method,
                    pointwise: Vec::new(),
                    simultaneous: Vec::new(),
                    error: Some("no change-point detected".into()),
                };
            }
            match intervals(&series, &est, request, alpha, seed) {
                Ok((pointwise, simultaneous)) => MethodReport {
                    method,
                    pointwise,
                    simultaneous,
                    error: None,
                },
                Err(e) => MethodReport {
                    method,
                    pointwise: Vec::new(),
                    simultaneous: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let report = CiReport {
        schema_version: SCHEMA_VERSION,
        n: series.len(),
        seed,
        alpha,
        m_hat: est.m_hat,
        taus: est.taus.taus().to_vec(),
        orders: est.orders.clone(),
        methods,
    };
    write_text(
        args.detect.out.as_deref(),
        &serde_json::to_string_pretty(&report)?,
    )
}

impl CiArgs {
    fn seed_or_default(&self) -> u64 {
        self.detect.seed.unwrap_or(0)
    }
}

pub fn bench(args: BenchArgs) -> Result<(), CliError> {
    let exp = require(args.exp, "exp")?;
    validate_experiment(&exp)?;
    let defaults = NamedOptions::default();
    let opts = NamedOptions {
        reps: args.reps.unwrap_or(defaults.reps),
        seed: args.seed.unwrap_or(defaults.seed),
        alpha: args.alpha.unwrap_or(defaults.alpha),
        bootstrap_replicates: args.replicates.unwrap_or(defaults.bootstrap_replicates),
    };
    let dir = args.out_dir.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Write {
        path: dir.clone(),
        source,
    })?;
    let output = run_named(&exp, &opts)?;
    write_text(
        Some(&dir.join(format!("{exp}.json"))),
        &(serde_json::to_string_pretty(&output)? + "\n"),
    )?;
    if let ExperimentOutput::Detection { experiments } = &output {
        let summaries: Vec<_> = experiments.iter().map(|e| e.summary.clone()).collect();
        let path = dir.join(format!("{exp}_summary.csv"));
        write_summaries_csv(create(&path)?, &summaries)?;
        let records: Vec<_> = experiments
            .iter()
            .flat_map(|e| e.records.iter().cloned())
            .collect();
        let path = dir.join(format!("{exp}_records.csv"));
        write_records_csv(create(&path)?, &records)?;
        let mut stdout = std::io::stdout().lock();
        write_summaries_csv(&mut stdout, &summaries)?;
    }
    Ok(())
}
