// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON reports written by `detect` and `ci`.

use serde::{Deserialize, Serialize};

use lrsm_core::metrics::{ljung_box, pearson_residuals, rms, LjungBox};
use lrsm_core::refine::fit_segments;
use lrsm_core::{
    ChangePointSet, CiMethod, CiResult, CountSeries, LrsmEstimate, ScanConfig, StageTrace,
};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Ljung–Box lags reported for the Pearson residuals.
pub const LB_LAGS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    /// 1-based first and last observation.
    pub first: usize,
    pub last: usize,
    pub order: usize,
    pub beta0: f64,
    pub betas: Vec<f64>,
    /// Standard errors of `(β0, β1, …, βp)`.
    pub std_errors: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub rms: f64,
    pub pearson_mean: f64,
    pub pearson_variance: f64,
    pub ljung_box: Vec<LjungBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ljung_box_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub schema_version: u32,
    pub n: usize,
    pub seed: u64,
    pub config: ScanConfig,
    pub m_hat: usize,
    pub taus: Vec<usize>,
    pub radii: Vec<usize>,
    pub orders: Vec<usize>,
    pub segments: Vec<SegmentReport>,
    pub mdl: f64,
    pub diagnostics: Diagnostics,
    pub stage_trace: StageTrace,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    if v.len() < 2 {
        return (v.first().copied().unwrap_or(f64::NAN), f64::NAN);
    }
    let m = v.iter().sum::<f64>() / k;
    (
        m,
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (k - 1.0),
    )
}

impl DetectReport {
    pub fn new(series: &CountSeries, est: &LrsmEstimate, config: &ScanConfig, seed: u64) -> Self {
        let resid = pearson_residuals(series, est);
        let (pearson_mean, pearson_variance) = mean_var(&resid);
        let (lb, lb_err) = match ljung_box(&resid, LB_LAGS) {
            Ok(v) => (v, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        DetectReport {
            schema_version: SCHEMA_VERSION,
            n: series.len(),
            seed,
            config: config.clone(),
            m_hat: est.m_hat,
            taus: est.taus.taus().to_vec(),
            radii: est.radii.clone(),
            orders: est.orders.clone(),
            segments: est
                .segments
                .iter()
                .map(|s| SegmentReport {
                    first: s.window.first(),
                    last: s.window.last(),
                    order: s.order,
                    beta0: s.params.beta0(),
                    betas: s.params.betas().to_vec(),
                    std_errors: s.std_errors.clone(),
                    loglik: s.loglik,
                    converged: s.converged,
                })
                .collect(),
            mdl: est.mdl,
            diagnostics: Diagnostics {
                rms: rms(series, est),
                pearson_mean,
                pearson_variance,
                ljung_box: lb,
                ljung_box_error: lb_err,
            },
            stage_trace: est.stage_trace.clone(),
        }
    }

    /// Rebuilds the estimate on `series`, refitting every segment.
    pub fn to_estimate(&self, series: &CountSeries) -> Result<LrsmEstimate, CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Input(format!(
                "report schema version {} is not supported",
                self.schema_version
            )));
        }
        if self.n != series.len() {
            return Err(CliError::Input(format!(
                "report is for {} observations but the input has {}",
                self.n,
                series.len()
            )));
        }
        if self.orders.len() != self.taus.len() + 1 || self.radii.len() != self.taus.len() {
            return Err(CliError::Input(
                "report has inconsistent taus, radii and orders".into(),
            ));
        }
        let taus = ChangePointSet::new(self.taus.clone(), self.n)?;
        let segments = fit_segments(series, &self.taus, &self.orders, self.config.delta)?;
        Ok(LrsmEstimate {
            n: self.n,
            m_hat: self.taus.len(),
            taus,
            radii: self.radii.clone(),
            orders: self.orders.clone(),
            segments,
            mdl: self.mdl,
            stage_trace: self.stage_trace.clone(),
        })
    }
}

/// Intervals of one construction, or why it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: CiMethod,
    /// Each change-point at level `1 − alpha`.
    pub pointwise: Vec<CiResult>,
    /// All change-points jointly at level `1 − alpha`.
    pub simultaneous: Vec<CiResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiReport {
    pub schema_version: u32,
    pub n: usize,
    pub seed: u64,
    pub alpha: f64,
    pub m_hat: usize,
    pub taus: Vec<usize>,
    pub orders: Vec<usize>,
    pub methods: Vec<MethodReport>,
}
