// SPDX-License-Identifier: MIT OR Apache-2.0

//! Accuracy measures for simulation studies and residual diagnostics.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::ci::CiResult;
use crate::error::{LrsmError, Result};
use crate::series::{CountSeries, LrsmEstimate};

/// Share of replicates whose estimated number of change-points is `m0`.
pub fn tpr(mhats: &[usize], m0: usize) -> Result<f64> {
    if mhats.is_empty() {
        return Err(LrsmError::InvalidArgument("no replicates".into()));
    }
    Ok(mhats.iter().filter(|&&m| m == m0).count() as f64 / mhats.len() as f64)
}

/// Distances between estimated and true change-point fractions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ZetaMetrics {
    /// `sup_{b ∈ est} inf_{a ∈ truth} |a − b|`.
    pub under: f64,
    /// `sup_{b ∈ truth} inf_{a ∈ est} |a − b|`.
    pub over: f64,
    /// Mean over the truth of the distance to the nearest estimate.
    pub distance: f64,
}

fn nearest(points: &[f64], x: f64) -> f64 {
    points
        .iter()
        .map(|p| (p - x).abs())
        .fold(f64::INFINITY, f64::min)
}

fn directed_hausdorff(from: &[f64], to: &[f64]) -> f64 {
    from.iter().map(|&b| nearest(to, b)).fold(0.0, f64::max)
}

/// Segmentation errors of estimated fractions `est` against `truth`.
///
/// An empty estimate scores `(0, 1, 1)`.
pub fn zeta_metrics(est: &[f64], truth: &[f64]) -> Result<ZetaMetrics> {
    if truth.is_empty() {
        return Err(LrsmError::InvalidArgument(
            "segmentation errors need at least one true change-point".into(),
        ));
    }
    if est.is_empty() {
        return Ok(ZetaMetrics {
            under: 0.0,
            over: 1.0,
            distance: 1.0,
        });
    }
    Ok(ZetaMetrics {
        under: directed_hausdorff(est, truth),
        over: directed_hausdorff(truth, est),
        distance: truth.iter().map(|&a| nearest(est, a)).sum::<f64>() / truth.len() as f64,
    })
}

/// Pearson residuals `(X_t − ξ̂_t) / sqrt(ξ̂_t)` for `t > p̂_1`.
///
/// The conditional variance is taken equal to the conditional mean, as in a
/// Poisson working model.
pub fn pearson_residuals(series: &CountSeries, est: &LrsmEstimate) -> Vec<f64> {
    let xi = est.fitted_means(series);
    let skip = est.segments[0].order;
    series
        .as_f64()
        .iter()
        .zip(&xi)
        .skip(skip)
        .map(|(x, m)| (x - m) / m.sqrt())
        .collect()
}

/// Root mean squared one-step forecast error over `t = 2, …, n`.
pub fn rms(series: &CountSeries, est: &LrsmEstimate) -> f64 {
    let xi = est.fitted_means(series);
    let x = series.as_f64();
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let sse: f64 = x
        .iter()
        .zip(&xi)
        .skip(1)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    (sse / (n - 1) as f64).sqrt()
}

/// Sample autocorrelations at lags `1..=max_lag`.
pub fn autocorrelation(values: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = values.len();
    if n <= max_lag + 1 {
        return Err(LrsmError::InvalidArgument(format!(
            "{n} values are too few for {max_lag} lags"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let c0: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    if !(c0 > 0.0) {
        return Err(LrsmError::Degenerate("constant residuals".into()));
    }
    Ok((1..=max_lag)
        .map(|k| {
            values[k..]
                .iter()
                .zip(values)
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum::<f64>()
                / c0
        })
        .collect())
}

/// Ljung–Box statistic and chi-square upper-tail p-value at one lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LjungBox {
    pub lag: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// Ljung–Box tests at lags `1..=acf.len()` from autocorrelations of a
/// sample of length `n`.
pub fn ljung_box_from_acf(acf: &[f64], n: usize) -> Vec<LjungBox> {
    let nf = n as f64;
    let mut q = 0.0;
    acf.iter()
        .enumerate()
        .map(|(i, r)| {
            let lag = i + 1;
            q += r * r / (nf - lag as f64);
            let statistic = nf * (nf + 2.0) * q;
            let p_value = if statistic > 0.0 {
                gamma_ur(lag as f64 / 2.0, statistic / 2.0)
            } else {
                1.0
            };
            LjungBox {
                lag,
                statistic,
                p_value,
            }
        })
        .collect()
}

/// Ljung–Box tests of `residuals` at lags `1..=max_lag`.
pub fn ljung_box(residuals: &[f64], max_lag: usize) -> Result<Vec<LjungBox>> {
    let acf = autocorrelation(residuals, max_lag)?;
    Ok(ljung_box_from_acf(&acf, residuals.len()))
}

/// Share of intervals that contain `tau0`.
pub fn coverage(cis: &[CiResult], tau0: usize) -> f64 {
    if cis.is_empty() {
        return 0.0;
    }
    cis.iter().filter(|c| c.contains(tau0)).count() as f64 / cis.len() as f64
}
