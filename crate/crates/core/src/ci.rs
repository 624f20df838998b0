// SPDX-License-Identifier: MIT OR Apache-2.0

//! Confidence intervals for estimated change-points.
//!
//! Three constructions are offered:
//!
//! * a pivotal approximation scaling the quantiles of the argmax of a
//!   two-sided Brownian motion with drift,
//! * a parametric bootstrap simulating Poisson-thinning INAR replicates from
//!   the fitted neighbouring segments,
//! * a block bootstrap joining contiguous blocks of the observed neighbouring
//!   segments.
//!
//! The bootstraps locate the argmax of the double-sided walk
//! `W(τ) = Σ [ℓ_t(θ_j) − ℓ_t(θ_{j+1})]` of each replicate, and turn its
//! empirical percentiles into an interval around `τ̂`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{LrsmError, Result};
use crate::pqml::information;
use crate::rng::{domain, substream, StreamRng};
use crate::series::{CountSeries, GcinarParams, LrsmEstimate, Window};
use crate::simulate::{SegmentSpec, DEFAULT_BURN_IN};

use rand::RngExt;

/// Default number of bootstrap replicates.
pub const DEFAULT_REPLICATES: usize = 1000;

/// Interval construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Approx,
    Pba,
    Bba,
}

/// Tuning values that produced an interval.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CiMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantile: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_b: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    /// The adaptive bandwidth search stopped at its upper bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth_capped: Option<bool>,
}

/// Confidence interval for one change-point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiResult {
    pub method: CiMethod,
    /// 1-based index of the change-point within the estimate.
    pub index: usize,
    pub tau_hat: usize,
    pub lower: usize,
    pub upper: usize,
    pub alpha: f64,
    pub meta: CiMeta,
}

impl CiResult {
    pub fn contains(&self, tau: usize) -> bool {
        self.lower <= tau && tau <= self.upper
    }

    pub fn width(&self) -> usize {
        self.upper - self.lower
    }
}

/// How to build intervals in [`confidence_interval`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum CiRequest {
    Approx,
    /// `n_p` defaults to `⌊n/2⌋`.
    Pba {
        n_p: Option<usize>,
        replicates: usize,
    },
    /// Without `n_b` the bandwidth is chosen adaptively.
    Bba {
        n_b: Option<usize>,
        replicates: usize,
    },
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Arguments above this bound have a CDF equal to 1 in double precision.
const YAO_UPPER: f64 = 600.0;

/// CDF of the argmax of a two-sided Brownian motion with drift `−|s|/2`.
pub fn yao_cdf(a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(LrsmError::InvalidArgument(format!(
            "yao_cdf needs a > 0, got {a}"
        )));
    }
    if a >= YAO_UPPER {
        return Ok(1.0);
    }
    let r = a.sqrt();
    let v = 1.0
        + (a / (2.0 * std::f64::consts::PI)).sqrt() * (-a / 8.0).exp()
        + 1.5 * a.exp() * std_normal_cdf(-1.5 * r)
        - 0.5 * (a + 5.0) * std_normal_cdf(-0.5 * r);
    Ok(v.clamp(0.5, 1.0))
}

/// Inverse of [`yao_cdf`] by bisection.
pub fn yao_quantile(q: f64) -> Result<f64> {
    if !(q > 0.5 && q < 1.0) {
        return Err(LrsmError::InvalidArgument(format!(
            "yao_quantile needs q in (0.5, 1), got {q}"
        )));
    }
    let (mut lo, mut hi) = (1e-12, YAO_UPPER);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if yao_cdf(mid)? < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(LrsmError::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Change-point `j` (1-based) with its neighbouring segment boundaries.
struct Site<'a> {
    tau: usize,
    radius: usize,
    left: Window,
    right: Window,
    theta_left: &'a GcinarParams,
    theta_right: &'a GcinarParams,
}

fn site(est: &LrsmEstimate, j: usize) -> Result<Site<'_>> {
    if j == 0 || j > est.m_hat {
        return Err(LrsmError::IndexOutOfRange {
            index: j,
            max: est.m_hat,
        });
    }
    let b = est.taus.boundaries(est.n);
    Ok(Site {
        tau: b[j],
        radius: est.radii[j - 1],
        left: Window::new(b[j - 1], b[j] - b[j - 1]),
        right: Window::new(b[j], b[j + 1] - b[j]),
        theta_left: &est.segments[j - 1].params,
        theta_right: &est.segments[j].params,
    })
}

fn clamp_interval(lower: i64, upper: i64, n: usize) -> (usize, usize) {
    let clamp = |v: i64| v.clamp(1, n as i64) as usize;
    (clamp(lower), clamp(upper))
}

/// Pivotal-approximation interval for change-point `j`.
///
/// Both neighbouring parameter vectors are padded to a common order and
/// `J`, `I` are evaluated at the right-hand parameters over the window
/// `(τ̂ − 2h, τ̂ + 2h]`. With `d = θ_j − θ_{j+1}` and
/// `Δ = dᵀId / (dᵀJd)²`, the interval is `τ̂ ± (⌊Δ F⌋ + 1)` where `F` is
/// the `1 − α/2` quantile of [`yao_cdf`].
pub fn ci_approx(
    series: &CountSeries,
    est: &LrsmEstimate,
    j: usize,
    alpha: f64,
) -> Result<CiResult> {
    check_alpha(alpha)?;
    let s = site(est, j)?;
    let p = s.theta_left.order().max(s.theta_right.order());
    let left = s.theta_left.padded(p);
    let right = s.theta_right.padded(p);
    let d = DVector::from_iterator(
        p + 1,
        left.theta()
            .into_iter()
            .zip(right.theta())
            .map(|(a, b)| a - b),
    );
    let n = series.len();
    let lo = s.tau.saturating_sub(2 * s.radius);
    let hi = (s.tau + 2 * s.radius).min(n);
    let (jm, im) = information(series, Window::new(lo, hi - lo), &right)?;
    let djd = d.dot(&(&jm * &d));
    if !(djd > 0.0) {
        return Err(LrsmError::Degenerate(format!(
            "change-point {j}: parameter difference has zero information"
        )));
    }
    let delta_hat = d.dot(&(&im * &d)) / (djd * djd);
    let f = yao_quantile(1.0 - alpha / 2.0)?;
    let half = (delta_hat * f).floor().min(n as f64) as i64 + 1;
    let (lower, upper) = clamp_interval(s.tau as i64 - half, s.tau as i64 + half, n);
    Ok(CiResult {
        method: CiMethod::Approx,
        index: j,
        tau_hat: s.tau,
        lower,
        upper,
        alpha,
        meta: CiMeta {
            delta_hat: Some(delta_hat),
            quantile: Some(f),
            ..CiMeta::default()
        },
    })
}

fn loglik_term(y: f64, xi: f64) -> f64 {
    if y > 0.0 {
        y * xi.ln() - xi
    } else {
        -xi
    }
}

fn conditional_mean(params: &GcinarParams, sample: &[u64], i: usize) -> f64 {
    params.beta0()
        + params
            .betas()
            .iter()
            .enumerate()
            .map(|(k, b)| b * sample[i - 1 - k] as f64)
            .sum::<f64>()
}

/// Double-sided walk of a joined sample of length `2·half + 1`.
///
/// Entry `τ + half` holds `W(τ)` for `τ ∈ [−half, half]`; the first `half + 1`
/// points belong to the left model. Positions whose sums need lags before
/// the start of the sample are `NaN`.
pub fn double_sided_walk(
    sample: &[u64],
    half: usize,
    left: &GcinarParams,
    right: &GcinarParams,
) -> Result<Vec<f64>> {
    if sample.len() != 2 * half + 1 {
        return Err(LrsmError::InvalidArgument(format!(
            "walk sample of length {} does not match half-width {half}",
            sample.len()
        )));
    }
    let lags = left.order().max(right.order());
    // 1-based t maps to sample[t - 1]; increments exist for t > lags.
    let incr = |t: usize| -> f64 {
        let i = t - 1;
        let y = sample[i] as f64;
        loglik_term(y, conditional_mean(left, sample, i))
            - loglik_term(y, conditional_mean(right, sample, i))
    };
    let mut w = vec![f64::NAN; 2 * half + 1];
    w[half] = 0.0;
    let mut acc = 0.0;
    for tau in 1..=half {
        let t = half + 1 + tau;
        if t <= lags {
            break;
        }
        acc += incr(t);
        w[half + tau] = acc;
    }
    let mut acc = 0.0;
    for tau in 1..=half {
        let t = half + 1 - tau;
        if t <= lags {
            break;
        }
        acc -= incr(t);
        w[half - tau] = acc;
    }
    Ok(w)
}

/// Argmax of a walk from [`double_sided_walk`], as `τ`.
///
/// Ties go to the smallest `|τ|`, negative before positive.
pub fn walk_argmax(walk: &[f64]) -> isize {
    let half = walk.len() / 2;
    let mut best = (0isize, walk[half]);
    for k in 1..=half {
        for tau in [-(k as isize), k as isize] {
            let v = walk[(half as isize + tau) as usize];
            if v > best.1 {
                best = (tau, v);
            }
        }
    }
    best.0
}

/// Nearest-rank percentile of sorted values: the `⌈qB⌉`-th order statistic.
pub fn nearest_rank(sorted: &[isize], q: f64) -> isize {
    let b = sorted.len();
    let rank = ((q * b as f64).ceil() as usize).clamp(1, b);
    sorted[rank - 1]
}

fn percentile_interval(mut draws: Vec<isize>, tau: usize, alpha: f64, n: usize) -> (usize, usize) {
    draws.sort_unstable();
    let l = nearest_rank(&draws, alpha / 2.0);
    let u = nearest_rank(&draws, 1.0 - alpha / 2.0);
    clamp_interval(tau as i64 - u as i64, tau as i64 - l as i64, n)
}

/// One parametric-bootstrap replicate: `half + 1` points of the left model
/// after a burn-in, followed by `half` points of the right model.
pub fn pba_replicate(
    left: &SegmentSpec,
    right: &SegmentSpec,
    half: usize,
    rng: &mut StreamRng,
) -> Vec<u64> {
    let lags = left.order().max(right.order());
    let mut buf = vec![0u64; lags];
    left.extend(&mut buf, DEFAULT_BURN_IN + half + 1, rng);
    right.extend(&mut buf, half, rng);
    buf.split_off(lags + DEFAULT_BURN_IN)
}

/// Argmax draws of the parametric bootstrap for change-point `j`.
pub fn pba_draws(
    est: &LrsmEstimate,
    j: usize,
    n_p: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<isize>> {
    let s = site(est, j)?;
    if n_p == 0 || replicates == 0 {
        return Err(LrsmError::InvalidArgument(
            "n_p and B must be positive".into(),
        ));
    }
    let left = SegmentSpec::poisson_inar(s.theta_left)?;
    let right = SegmentSpec::poisson_inar(s.theta_right)?;
    (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, &[domain::PBA, j as u64, b as u64]);
            let sample = pba_replicate(&left, &right, n_p, &mut rng);
            Ok(walk_argmax(&double_sided_walk(
                &sample,
                n_p,
                s.theta_left,
                s.theta_right,
            )?))
        })
        .collect()
}

/// Parametric-bootstrap interval for change-point `j`.
pub fn pba_ci(
    series: &CountSeries,
    est: &LrsmEstimate,
    j: usize,
    alpha: f64,
    n_p: usize,
    replicates: usize,
    seed: u64,
) -> Result<CiResult> {
    check_alpha(alpha)?;
    let draws = pba_draws(est, j, n_p, replicates, seed)?;
    let tau = site(est, j)?.tau;
    let (lower, upper) = percentile_interval(draws, tau, alpha, series.len());
    Ok(CiResult {
        method: CiMethod::Pba,
        index: j,
        tau_hat: tau,
        lower,
        upper,
        alpha,
        meta: CiMeta {
            n_p: Some(n_p),
            replicates: Some(replicates),
            ..CiMeta::default()
        },
    })
}

/// Largest admissible block bandwidth for change-point `j`.
pub fn bandwidth_cap(est: &LrsmEstimate, j: usize) -> Result<usize> {
    let s = site(est, j)?;
    Ok(s.left.len.min(s.right.len).saturating_sub(1))
}

/// One block-bootstrap replicate: a block of `n_b + 1` observations from
/// `left` joined to a block of `n_b` from `right`, both uniformly placed.
pub fn bba_replicate(
    series: &CountSeries,
    left: Window,
    right: Window,
    n_b: usize,
    rng: &mut StreamRng,
) -> Vec<u64> {
    let x = series.values();
    let a = left.start + rng.random_range(0..=left.len - (n_b + 1));
    let b = right.start + rng.random_range(0..=right.len - n_b);
    let mut out = Vec::with_capacity(2 * n_b + 1);
    out.extend_from_slice(&x[a..a + n_b + 1]);
    out.extend_from_slice(&x[b..b + n_b]);
    out
}

/// Argmax draws of the block bootstrap for change-point `j`.
pub fn bba_draws(
    series: &CountSeries,
    est: &LrsmEstimate,
    j: usize,
    n_b: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<isize>> {
    let s = site(est, j)?;
    let cap = bandwidth_cap(est, j)?;
    if n_b == 0 || n_b > cap {
        return Err(LrsmError::InvalidArgument(format!(
            "block bandwidth {n_b} outside 1..={cap} for change-point {j}"
        )));
    }
    if replicates == 0 {
        return Err(LrsmError::InvalidArgument("B must be positive".into()));
    }
    (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, &[domain::BBA, j as u64, n_b as u64, b as u64]);
            let sample = bba_replicate(series, s.left, s.right, n_b, &mut rng);
            Ok(walk_argmax(&double_sided_walk(
                &sample,
                n_b,
                s.theta_left,
                s.theta_right,
            )?))
        })
        .collect()
}

/// Block-bootstrap interval for change-point `j` with bandwidth `n_b`.
pub fn bba_ci(
    series: &CountSeries,
    est: &LrsmEstimate,
    j: usize,
    alpha: f64,
    n_b: usize,
    replicates: usize,
    seed: u64,
) -> Result<CiResult> {
    check_alpha(alpha)?;
    let draws = bba_draws(series, est, j, n_b, replicates, seed)?;
    let tau = site(est, j)?.tau;
    let (lower, upper) = percentile_interval(draws, tau, alpha, series.len());
    Ok(CiResult {
        method: CiMethod::Bba,
        index: j,
        tau_hat: tau,
        lower,
        upper,
        alpha,
        meta: CiMeta {
            n_b: Some(n_b),
            replicates: Some(replicates),
            ..CiMeta::default()
        },
    })
}

/// Outcome of the adaptive bandwidth search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveBandwidth {
    pub n_b: usize,
    /// Width of the initial interval driving the search.
    pub step: usize,
    /// The search stopped at the bound without meeting its criterion.
    pub capped: bool,
}

/// Share of draws in the outer bands `(1 − α) n_b ≤ |τ| ≤ n_b`.
pub fn outer_band_fraction(draws: &[isize], n_b: usize, alpha: f64) -> f64 {
    let edge = (1.0 - alpha) * n_b as f64;
    let outer = draws
        .iter()
        .filter(|&&t| t.unsigned_abs() as f64 >= edge)
        .count();
    outer as f64 / draws.len() as f64
}

/// Data-driven block bandwidth for change-point `j`.
///
/// Starting from twice the width `l` of the pivotal interval (the parametric
/// bootstrap interval when that one is degenerate), the bandwidth grows by
/// `l` until at most `α/2` of the bootstrap argmax draws fall in the outer
/// bands, or the segment-length bound is reached.
pub fn adaptive_bandwidth(
    series: &CountSeries,
    est: &LrsmEstimate,
    j: usize,
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<AdaptiveBandwidth> {
    check_alpha(alpha)?;
    let initial = match ci_approx(series, est, j, alpha) {
        Ok(ci) => ci,
        Err(LrsmError::Degenerate(_)) => {
            pba_ci(series, est, j, alpha, series.len() / 2, replicates, seed)?
        }
        Err(e) => return Err(e),
    };
    let step = initial.width().max(1);
    let cap = bandwidth_cap(est, j)?;
    if cap == 0 {
        return Err(LrsmError::Degenerate(format!(
            "change-point {j}: neighbouring segments too short for a block bootstrap"
        )));
    }
    let mut n_b = (2 * step).min(cap);
    loop {
        let draws = bba_draws(series, est, j, n_b, replicates, seed)?;
        if outer_band_fraction(&draws, n_b, alpha) <= alpha / 2.0 {
            return Ok(AdaptiveBandwidth {
                n_b,
                step,
                capped: false,
            });
        }
        if n_b == cap {
            return Ok(AdaptiveBandwidth {
                n_b,
                step,
                capped: true,
            });
        }
        n_b = (n_b + step).min(cap);
    }
}

/// Interval for change-point `j` by the requested construction.
pub fn confidence_interval(
    series: &CountSeries,
    est: &LrsmEstimate,
    j: usize,
    alpha: f64,
    request: &CiRequest,
    seed: u64,
) -> Result<CiResult> {
    match *request {
        CiRequest::Approx => ci_approx(series, est, j, alpha),
        CiRequest::Pba { n_p, replicates } => {
            let n_p = n_p.unwrap_or(series.len() / 2);
            pba_ci(series, est, j, alpha, n_p, replicates, seed)
        }
        CiRequest::Bba {
            n_b: Some(n_b),
            replicates,
        } => bba_ci(series, est, j, alpha, n_b, replicates, seed),
        CiRequest::Bba {
            n_b: None,
            replicates,
        } => {
            let bw = adaptive_bandwidth(series, est, j, alpha, replicates, seed)?;
            let mut ci = bba_ci(series, est, j, alpha, bw.n_b, replicates, seed)?;
            ci.meta.bandwidth_capped = Some(bw.capped);
            Ok(ci)
        }
    }
}

/// Per-change-point level `α'` making `m` intervals jointly `1 − α`.
pub fn per_point_alpha(alpha: f64, m: usize) -> f64 {
    if m <= 1 {
        return alpha;
    }
    1.0 - (1.0 - alpha).powf(1.0 / m as f64)
}

/// Simultaneous intervals for all change-points of `est`.
pub fn simultaneous_ci(
    series: &CountSeries,
    est: &LrsmEstimate,
    request: &CiRequest,
    alpha: f64,
    seed: u64,
) -> Result<Vec<CiResult>> {
    check_alpha(alpha)?;
    if est.m_hat == 0 {
        return Err(LrsmError::Degenerate("no change-point to cover".into()));
    }
    let a = per_point_alpha(alpha, est.m_hat);
    (1..=est.m_hat)
        .map(|j| confidence_interval(series, est, j, a, request, seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refine::fit_segments;
    use crate::series::{ChangePointSet, StageTrace, DEFAULT_DELTA};
    use crate::simulate::{builtin_model, simulate_mcp};

    fn estimate(
        series: &CountSeries,
        taus: Vec<usize>,
        orders: Vec<usize>,
        h: usize,
    ) -> LrsmEstimate {
        let segments = fit_segments(series, &taus, &orders, DEFAULT_DELTA).unwrap();
        let m = taus.len();
        LrsmEstimate {
            n: series.len(),
            m_hat: m,
            taus: ChangePointSet::new(taus, series.len()).unwrap(),
            radii: vec![h; m],
            orders,
            segments,
            mdl: 0.0,
            stage_trace: StageTrace::default(),
        }
    }

    #[test]
    fn yao_distribution_values() {
        // Published upper 5% point of the distribution.
        assert!((yao_cdf(7.6873).unwrap() - 0.95).abs() < 5e-4);
        assert!((yao_quantile(0.95).unwrap() - 7.6873).abs() < 1e-3);
        assert!(yao_cdf(60.0).unwrap() >= 0.9999);
        assert!(yao_cdf(0.0).is_err());
        assert!(yao_quantile(0.4).is_err());
        let mut prev = 0.5;
        for k in 1..=500 {
            let v = yao_cdf(0.1 * k as f64).unwrap();
            assert!(v >= prev - 1e-15 && v <= 1.0);
            prev = v;
        }
        for q in [0.9, 0.95, 0.975] {
            let a = yao_quantile(q).unwrap();
            assert!((yao_cdf(a).unwrap() - q).abs() < 1e-9);
        }
        assert!(yao_quantile(0.95).unwrap() < yao_quantile(0.975).unwrap());
    }

    fn params(theta: &[f64]) -> GcinarParams {
        GcinarParams::from_theta(theta, DEFAULT_DELTA).unwrap()
    }

    #[test]
    fn walk_matches_term_oracle() {
        let left = params(&[0.5, 0.5]);
        let right = params(&[1.0, 0.2, 0.3]);
        let sample = [2u64, 0, 3, 1, 4];
        let w = double_sided_walk(&sample, 2, &left, &right).unwrap();
        let ell = |p: &GcinarParams, t: usize| {
            let i = t - 1;
            let mut xi = p.beta0();
            for (k, b) in p.betas().iter().enumerate() {
                xi += b * sample[i - 1 - k] as f64;
            }
            let y = sample[i] as f64;
            if y > 0.0 {
                y * xi.ln() - xi
            } else {
                -xi
            }
        };
        // t = 1, 2 lack two lags; W(−2) would need t = 1.
        assert!(w[0].is_nan());
        assert!(w[1].is_nan());
        assert_eq!(w[2], 0.0);
        let w1 = ell(&left, 4) - ell(&right, 4);
        let w2 = w1 + ell(&left, 5) - ell(&right, 5);
        assert!((w[3] - w1).abs() < 1e-12);
        assert!((w[4] - w2).abs() < 1e-12);

        let sample = [2u64, 0, 3, 1, 4, 2, 2];
        let w = double_sided_walk(&sample, 3, &left, &left.padded(2)).unwrap();
        assert!(w.iter().filter(|v| !v.is_nan()).all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn walk_lower_side_oracle() {
        let left = params(&[0.5, 0.5]);
        let right = params(&[2.0, 0.1]);
        let sample = [2u64, 0, 3, 1, 4];
        let w = double_sided_walk(&sample, 2, &left, &right).unwrap();
        let ell = |p: &GcinarParams, i: usize| {
            let xi = p.beta0() + p.betas()[0] * sample[i - 1] as f64;
            let y = sample[i] as f64;
            if y > 0.0 {
                y * xi.ln() - xi
            } else {
                -xi
            }
        };
        // W(−1) sums t = 2 only; W(−2) would need t = 1.
        assert!((w[1] - (ell(&right, 1) - ell(&left, 1))).abs() < 1e-12);
        assert!(w[0].is_nan());
        assert!((w[3] - (ell(&left, 3) - ell(&right, 3))).abs() < 1e-12);
    }

    #[test]
    fn argmax_tie_rules() {
        assert_eq!(walk_argmax(&[1.0, 0.0, 1.0]), -1);
        assert_eq!(walk_argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(walk_argmax(&[f64::NAN, 2.0, 0.0, 1.0, 3.0]), 2);
    }

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<isize> = (1..=10).collect();
        assert_eq!(nearest_rank(&v, 0.05), 1);
        assert_eq!(nearest_rank(&v, 0.95), 10);
        assert_eq!(nearest_rank(&v, 0.5), 5);
        assert_eq!(percentile_interval(vec![0; 20], 100, 0.1, 200), (100, 100));
    }

    #[test]
    fn per_point_levels() {
        assert!((1.0 - per_point_alpha(0.1, 2) - 0.9f64.sqrt()).abs() < 1e-15);
        assert!((per_point_alpha(0.1, 1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn approx_interval_arithmetic_and_monotonicity() {
        let spec = builtin_model("B1", 2000).unwrap();
        let s = simulate_mcp(&spec, 500, 8);
        let est = estimate(&s, vec![1000], vec![1, 3], 133);
        let narrow = ci_approx(&s, &est, 1, 0.2).unwrap();
        let wide = ci_approx(&s, &est, 1, 0.05).unwrap();
        assert!(wide.width() >= narrow.width());
        let half =
            (narrow.meta.delta_hat.unwrap() * narrow.meta.quantile.unwrap()).floor() as usize + 1;
        assert_eq!((narrow.lower, narrow.upper), (1000 - half, 1000 + half));
        assert!(ci_approx(&s, &est, 2, 0.1).is_err());
    }

    #[test]
    fn identical_sides_give_degenerate_approx() {
        let s = CountSeries::new((0..400).map(|i| (i % 5) as u64).collect()).unwrap();
        let mut est = estimate(&s, vec![200], vec![1, 1], 50);
        est.segments[1].params = est.segments[0].params.clone();
        assert!(matches!(
            ci_approx(&s, &est, 1, 0.1),
            Err(LrsmError::Degenerate(_))
        ));
    }

    #[test]
    fn bootstrap_draw_ranges_and_reproducibility() {
        let spec = builtin_model("B1", 1000).unwrap();
        let s = simulate_mcp(&spec, 500, 9);
        let est = estimate(&s, vec![500], vec![1, 3], 91);
        let d = bba_draws(&s, &est, 1, 40, 200, 1).unwrap();
        assert!(d.iter().all(|t| t.abs() <= 40));
        assert_eq!(d, bba_draws(&s, &est, 1, 40, 200, 1).unwrap());
        assert!(bba_draws(&s, &est, 1, 500, 10, 1).is_err());
        let p = pba_draws(&est, 1, 100, 200, 2).unwrap();
        assert!(p.iter().all(|t| t.abs() <= 100));
        let ci = pba_ci(&s, &est, 1, 0.1, 100, 200, 2).unwrap();
        assert!(ci.lower <= ci.upper);
    }

    #[test]
    fn bba_blocks_are_verbatim_slices() {
        let s = CountSeries::new((0..300u64).collect()).unwrap();
        let left = Window::new(0, 150);
        let right = Window::new(150, 150);
        let mut rng = substream(4, &[]);
        for _ in 0..200 {
            let r = bba_replicate(&s, left, right, 20, &mut rng);
            assert_eq!(r.len(), 41);
            assert!(r[..21].windows(2).all(|w| w[1] == w[0] + 1));
            assert!(r[21..].windows(2).all(|w| w[1] == w[0] + 1));
            assert!(r[20] < 150 && r[21] >= 150);
        }
    }

    #[test]
    fn equal_parameters_give_symmetric_pba() {
        let s = CountSeries::new((0..600).map(|i| (i % 4) as u64).collect()).unwrap();
        let mut est = estimate(&s, vec![300], vec![1, 1], 50);
        est.segments[1].params = est.segments[0].params.clone();
        let d = pba_draws(&est, 1, 50, 2000, 3).unwrap();
        let neg = d.iter().filter(|&&t| t < 0).count() as f64;
        let pos = d.iter().filter(|&&t| t > 0).count() as f64;
        // With identical models every walk is zero and the argmax is 0.
        assert_eq!(neg + pos, 0.0);
    }

    #[test]
    fn percentile_intervals_shift_with_the_series() {
        let spec = builtin_model("B1", 1000).unwrap();
        let s = simulate_mcp(&spec, 500, 10);
        let est = estimate(&s, vec![500], vec![1, 3], 91);
        let shift = 37;
        let mut v = vec![1u64; shift];
        v.extend_from_slice(s.values());
        let shifted = CountSeries::new(v).unwrap();
        let mut est2 = estimate(&shifted, vec![500 + shift], vec![1, 3], 91);
        est2.segments[0].params = est.segments[0].params.clone();
        est2.segments[1].params = est.segments[1].params.clone();
        let a = pba_ci(&s, &est, 1, 0.1, 200, 300, 5).unwrap();
        let b = pba_ci(&shifted, &est2, 1, 0.1, 200, 300, 5).unwrap();
        assert_eq!((b.lower, b.upper), (a.lower + shift, a.upper + shift));
    }

    #[test]
    fn adaptive_bandwidth_respects_cap_and_criterion() {
        let spec = builtin_model("B2", 2000).unwrap();
        let s = simulate_mcp(&spec, 500, 12);
        let est = estimate(&s, vec![600, 1200], vec![1, 3, 1], 133);
        for j in 1..=2 {
            let bw = adaptive_bandwidth(&s, &est, j, 0.1, 300, 13).unwrap();
            assert!(bw.n_b >= 1 && bw.n_b <= bandwidth_cap(&est, j).unwrap());
            if !bw.capped {
                let d = bba_draws(&s, &est, j, bw.n_b, 300, 13).unwrap();
                assert!(outer_band_fraction(&d, bw.n_b, 0.1) <= 0.05);
            }
        }
    }

    #[test]
    fn outer_band_share() {
        assert_eq!(outer_band_fraction(&[0, 0, 0, 0], 10, 0.1), 0.0);
        assert_eq!(outer_band_fraction(&[9, -9, 0, 8], 10, 0.1), 0.5);
    }

    #[test]
    fn single_point_simultaneous_equals_plain() {
        let spec = builtin_model("B1", 1000).unwrap();
        let s = simulate_mcp(&spec, 500, 14);
        let est = estimate(&s, vec![500], vec![1, 3], 91);
        let sim = simultaneous_ci(&s, &est, &CiRequest::Approx, 0.1, 0).unwrap();
        assert_eq!(sim, vec![ci_approx(&s, &est, 1, 0.1).unwrap()]);
    }
}
