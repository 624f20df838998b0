// SPDX-License-Identifier: MIT OR Apache-2.0

//! Domain types shared by every stage of the pipeline.
//!
//! Positions are 1-based everywhere a user sees them: observation `X_t` has
//! index `t ∈ 1..=n`, and a change-point `τ` is the index of the last
//! observation of the segment to its left. Internally the series is stored
//! 0-based, so `X_t` lives at `values[t - 1]` and a change-point `τ` is also
//! the number of observations that precede the next segment. That second
//! reading is what makes `τ` usable directly as a [`Window`] anchor.

use serde::{Deserialize, Serialize};

use crate::error::{LrsmError, Result};

/// Default compactness margin of the parameter space.
pub const DEFAULT_DELTA: f64 = 1e-4;

/// An observed count time series `X_1, …, X_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct CountSeries {
    values: Vec<u64>,
    #[serde(skip)]
    real: Vec<f64>,
}

impl CountSeries {
    pub fn new(values: Vec<u64>) -> Result<Self> {
        if values.is_empty() {
            return Err(LrsmError::SeriesTooShort { n: 0, needed: 1 });
        }
        let real = values.iter().map(|&v| v as f64).collect();
        Ok(Self { values, real })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; a series holds at least one observation.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    /// The observations as floating point, 0-based.
    pub fn as_f64(&self) -> &[f64] {
        &self.real
    }

    /// `X_t` for a 1-based index.
    pub fn get(&self, t: usize) -> Option<u64> {
        t.checked_sub(1).and_then(|i| self.values.get(i).copied())
    }

    /// Observations covered by `window`.
    pub fn slice(&self, window: Window) -> &[u64] {
        &self.values[window.start..window.end()]
    }
}

impl TryFrom<Vec<u64>> for CountSeries {
    type Error = LrsmError;

    fn try_from(values: Vec<u64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<CountSeries> for Vec<u64> {
    fn from(series: CountSeries) -> Self {
        series.values
    }
}

/// Parameter vector `θ = (β0, β1, …, βp)` of one stationary segment.
///
/// The feasible set is `β0 ∈ [δ, 1/δ]`, `βi ∈ [0, 1-δ]` and `Σβi ≤ 1-δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcinarParams {
    beta0: f64,
    betas: Vec<f64>,
    delta: f64,
}

/// Slack allowed when validating user-supplied parameters.
const FEASIBILITY_SLACK: f64 = 1e-12;

impl GcinarParams {
    pub fn new(beta0: f64, betas: Vec<f64>, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(LrsmError::InvalidParams(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        if betas.is_empty() {
            return Err(LrsmError::InvalidParams(
                "at least one autoregressive weight is required".into(),
            ));
        }
        if !beta0.is_finite() || beta0 < delta - FEASIBILITY_SLACK || beta0 > 1.0 / delta {
            return Err(LrsmError::InvalidParams(format!(
                "beta0 = {beta0} outside [{delta}, {}]",
                1.0 / delta
            )));
        }
        for (i, &b) in betas.iter().enumerate() {
            if !b.is_finite() || b < -FEASIBILITY_SLACK || b > 1.0 - delta + FEASIBILITY_SLACK {
                return Err(LrsmError::InvalidParams(format!(
                    "beta{} = {b} outside [0, {}]",
                    i + 1,
                    1.0 - delta
                )));
            }
        }
        let total: f64 = betas.iter().sum();
        if total > 1.0 - delta + FEASIBILITY_SLACK {
            return Err(LrsmError::InvalidParams(format!(
                "sum of betas = {total} exceeds 1 - delta = {}",
                1.0 - delta
            )));
        }
        Ok(Self {
            beta0,
            betas,
            delta,
        })
    }

    /// Builds parameters from a packed `[β0, β1, …, βp]` vector.
    pub fn from_theta(theta: &[f64], delta: f64) -> Result<Self> {
        match theta.split_first() {
            Some((&b0, rest)) => Self::new(b0, rest.to_vec(), delta),
            None => Err(LrsmError::InvalidParams("empty parameter vector".into())),
        }
    }

    /// Skips validation; callers guarantee feasibility (optimizer output).
    pub(crate) fn from_theta_unchecked(theta: &[f64], delta: f64) -> Self {
        Self {
            beta0: theta[0],
            betas: theta[1..].to_vec(),
            delta,
        }
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn order(&self) -> usize {
        self.betas.len()
    }

    /// Packed `[β0, β1, …, βp]`.
    pub fn theta(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.betas.len() + 1);
        v.push(self.beta0);
        v.extend_from_slice(&self.betas);
        v
    }

    /// Same parameters viewed as an order-`p` model, trailing weights zero.
    pub fn padded(&self, p: usize) -> Self {
        let mut betas = self.betas.clone();
        if p > betas.len() {
            betas.resize(p, 0.0);
        }
        Self {
            beta0: self.beta0,
            betas,
            delta: self.delta,
        }
    }

    pub fn ar_sum(&self) -> f64 {
        self.betas.iter().sum()
    }

    /// Stationary mean `β0 / (1 - Σβi)`.
    pub fn stationary_mean(&self) -> f64 {
        self.beta0 / (1.0 - self.ar_sum())
    }

    /// Conditional mean `ξ_t` given lags ordered most recent first.
    pub fn conditional_mean(&self, lags: &[f64]) -> f64 {
        self.beta0 + self.betas.iter().zip(lags).map(|(b, x)| b * x).sum::<f64>()
    }
}

/// A contiguous block of observations `X_{start+1}, …, X_{start+len}`.
///
/// `start` is the exclusive left anchor `k` of the quasi-likelihood sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    /// Window over `X_{first}, …, X_{last}` (1-based, inclusive).
    pub fn from_bounds(first: usize, last: usize) -> Self {
        Self {
            start: first - 1,
            len: last + 1 - first,
        }
    }

    /// One past the last 0-based position, i.e. the 1-based index of the last observation.
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    /// 1-based index of the first observation.
    pub fn first(&self) -> usize {
        self.start + 1
    }

    /// 1-based index of the last observation.
    pub fn last(&self) -> usize {
        self.start + self.len
    }

    /// Checks the window lies inside a series of length `n`.
    pub fn check(&self, n: usize) -> Result<()> {
        if self.len == 0 || self.end() > n {
            return Err(LrsmError::WindowOutOfBounds {
                start: self.start,
                len: self.len,
                lags: 0,
                n,
            });
        }
        Ok(())
    }

    /// Number of quasi-likelihood terms for an order-`p` model.
    ///
    /// Lags come from the observations preceding the window; when fewer than
    /// `p` exist the sum starts at `t = p + 1`.
    pub fn terms(&self, p: usize) -> usize {
        let first = self.start.max(p);
        self.end().saturating_sub(first)
    }
}

/// Strictly increasing interior change-points `1 ≤ τ1 < … < τm < n`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChangePointSet {
    taus: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scores: Option<Vec<f64>>,
}

impl ChangePointSet {
    pub fn new(taus: Vec<usize>, n: usize) -> Result<Self> {
        Self::validate(&taus, n)?;
        Ok(Self { taus, scores: None })
    }

    pub fn with_scores(taus: Vec<usize>, scores: Vec<f64>, n: usize) -> Result<Self> {
        Self::validate(&taus, n)?;
        if scores.len() != taus.len() {
            return Err(LrsmError::InvalidArgument(format!(
                "{} scores for {} change-points",
                scores.len(),
                taus.len()
            )));
        }
        Ok(Self {
            taus,
            scores: Some(scores),
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    fn validate(taus: &[usize], n: usize) -> Result<()> {
        for &tau in taus {
            if tau == 0 || tau >= n {
                return Err(LrsmError::InvalidArgument(format!(
                    "change-point {tau} outside [1, {}]",
                    n.saturating_sub(1)
                )));
            }
        }
        if taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LrsmError::InvalidArgument(
                "change-points must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn taus(&self) -> &[usize] {
        &self.taus
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Segment boundaries `[0, τ1, …, τm, n]`.
    pub fn boundaries(&self, n: usize) -> Vec<usize> {
        let mut b = Vec::with_capacity(self.taus.len() + 2);
        b.push(0);
        b.extend_from_slice(&self.taus);
        b.push(n);
        b
    }

    /// Change-points as fractions `τ / n`.
    pub fn fractions(&self, n: usize) -> Vec<f64> {
        self.taus.iter().map(|&t| t as f64 / n as f64).collect()
    }
}

/// Window covering segment `j` (1-based) of the partition induced by `cps`:
/// `X_{τ_{j-1}+1}, …, X_{τ_j}` with `τ_0 = 0` and `τ_{m+1} = n`.
pub fn segment_view(series: &CountSeries, cps: &ChangePointSet, j: usize) -> Result<Window> {
    let segments = cps.len() + 1;
    if j == 0 || j > segments {
        return Err(LrsmError::IndexOutOfRange {
            index: j,
            max: segments,
        });
    }
    let bounds = cps.boundaries(series.len());
    Ok(Window::new(bounds[j - 1], bounds[j] - bounds[j - 1]))
}

/// Per-segment fit reported on the final partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFit {
    pub window: Window,
    pub order: usize,
    pub params: GcinarParams,
    pub loglik: f64,
    pub std_errors: Vec<f64>,
    pub converged: bool,
}

/// A potential change-point found by the scan step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub tau: usize,
    pub score: f64,
    /// Window radius that produced the candidate.
    pub radius: usize,
}

/// Intermediate sets retained for auditing a fit.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTrace {
    /// Potential change-points from the scan step.
    pub candidates: Vec<Candidate>,
    /// Subset chosen by the description-length criterion, before refinement.
    pub selected: Vec<usize>,
}

/// Output of the full three-step procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrsmEstimate {
    pub n: usize,
    pub m_hat: usize,
    /// Final (refined) change-points.
    pub taus: ChangePointSet,
    /// Radius associated with each final change-point.
    pub radii: Vec<usize>,
    pub orders: Vec<usize>,
    pub segments: Vec<SegmentFit>,
    pub mdl: f64,
    pub stage_trace: StageTrace,
}

impl LrsmEstimate {
    pub fn params(&self) -> Vec<&GcinarParams> {
        self.segments.iter().map(|s| &s.params).collect()
    }

    /// Fitted conditional mean `ξ̂_t` for each 1-based `t`, segment aware.
    ///
    /// Lags before `X_1` do not exist; they are replaced by the first
    /// segment's fitted stationary mean.
    pub fn fitted_means(&self, series: &CountSeries) -> Vec<f64> {
        let x = series.as_f64();
        let n = x.len();
        let bounds = self.taus.boundaries(n);
        let presample = self.segments[0].params.stationary_mean();
        let mut out = vec![0.0; n];
        let mut lags = Vec::new();
        for (j, seg) in self.segments.iter().enumerate() {
            let p = seg.params.order();
            for (i, slot) in out
                .iter_mut()
                .enumerate()
                .take(bounds[j + 1])
                .skip(bounds[j])
            {
                lags.clear();
                lags.extend((1..=p).map(|l| if i >= l { x[i - l] } else { presample }));
                *slot = seg.params.conditional_mean(&lags);
            }
        }
        out
    }
}
