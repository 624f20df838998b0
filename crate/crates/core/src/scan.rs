// SPDX-License-Identifier: MIT OR Apache-2.0

//! Likelihood-ratio scan statistics and the candidate change-point set.
//!
//! For radius `h` and `h ≤ t ≤ n − h`,
//! `S_h(t) = [L(left) + L(right) − L(pooled)] / h`, where the left window
//! covers `X_{t−h+1..t}`, the right window `X_{t+1..t+h}` and the pooled
//! window both. Outside that range `S_h(t) = 0`.
//!
//! Fits over the `h`-windows are shared: the right window at `t` is the left
//! window at `t + h`, so a full scan costs one fit per anchor and window
//! length.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LrsmError, Result};
use crate::pqml::{best_fit_index, fit_orders, fit_pqml_from, FitResult, InformationCriterion};
use crate::series::{Candidate, CountSeries, Window, DEFAULT_DELTA};

/// Positions per warm-started block of window fits. Each block starts cold,
/// so results do not depend on the number of worker threads.
const CHUNK: usize = 64;

/// How each window fit chooses its autoregressive order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderPolicy {
    /// Per-window selection over `1..=p_max`.
    Select(InformationCriterion),
    /// The same order for every window.
    Fixed(usize),
}

impl Default for OrderPolicy {
    fn default() -> Self {
        OrderPolicy::Select(InformationCriterion::Aic)
    }
}

/// Rule turning a sample size into a window radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowRule {
    /// `max(n/20, d (ln n)^4 / 25)`.
    MaxRule,
    /// `d (ln n)^4 / 25`.
    RawRule,
}

/// Radius `floor` of the chosen rule.
pub fn default_window(n: usize, d: f64, rule: WindowRule) -> usize {
    let nf = n as f64;
    let raw = d * nf.ln().powi(4) / 25.0;
    let h = match rule {
        WindowRule::MaxRule => raw.max(nf / 20.0),
        WindowRule::RawRule => raw,
    };
    h.floor() as usize
}

/// Radii for several multipliers `d`, ascending and deduplicated.
pub fn window_mix(n: usize, ds: &[f64], rule: WindowRule) -> Vec<usize> {
    let mut radii: Vec<usize> = ds.iter().map(|&d| default_window(n, d, rule)).collect();
    radii.sort_unstable();
    radii.dedup();
    radii
}

/// Settings of the scan step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Window radii, ascending. A single entry is a plain scan.
    pub radii: Vec<usize>,
    pub p_max: usize,
    pub m_max: usize,
    pub order: OrderPolicy,
    pub delta: f64,
}

impl ScanConfig {
    pub fn new(h: usize) -> Self {
        Self {
            radii: vec![h],
            p_max: 5,
            m_max: 30,
            order: OrderPolicy::default(),
            delta: DEFAULT_DELTA,
        }
    }

    pub fn with_radii(radii: Vec<usize>) -> Self {
        Self {
            radii,
            ..Self::new(0)
        }
    }

    pub fn p_max(mut self, p_max: usize) -> Self {
        self.p_max = p_max;
        self
    }

    pub fn m_max(mut self, m_max: usize) -> Self {
        self.m_max = m_max;
        self
    }

    pub fn order(mut self, order: OrderPolicy) -> Self {
        self.order = order;
        self
    }

    /// Largest order any fit may use.
    pub fn order_cap(&self) -> usize {
        match self.order {
            OrderPolicy::Select(_) => self.p_max,
            OrderPolicy::Fixed(p) => p,
        }
    }

    pub fn max_radius(&self) -> usize {
        self.radii.iter().copied().max().unwrap_or(0)
    }

    /// Checks the configuration against a series of length `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.radii.is_empty() {
            return Err(LrsmError::InvalidArgument("no window radius given".into()));
        }
        if self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LrsmError::InvalidArgument(
                "window radii must be strictly ascending".into(),
            ));
        }
        let cap = self.order_cap();
        if cap == 0 {
            return Err(LrsmError::InvalidArgument(
                "order must be at least 1".into(),
            ));
        }
        if self.m_max == 0 {
            return Err(LrsmError::InvalidArgument(
                "m_max must be at least 1".into(),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(LrsmError::InvalidParams(format!(
                "delta must lie in (0, 0.5), got {}",
                self.delta
            )));
        }
        for &h in &self.radii {
            // A fixed order must also fit the first window, whose lags are cut off.
            let needed = match self.order {
                OrderPolicy::Select(_) => cap + 1,
                OrderPolicy::Fixed(p) => 2 * p + 2,
            };
            if h < needed {
                return Err(LrsmError::InvalidArgument(format!(
                    "window radius {h} too small for order {cap}; need at least {needed}"
                )));
            }
            if n < 2 * h + cap {
                return Err(LrsmError::SeriesTooShort {
                    n,
                    needed: 2 * h + cap,
                });
            }
        }
        Ok(())
    }
}

/// Scan statistics `S_h(t)` for `t = h, …, n − h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanScores {
    pub h: usize,
    pub n: usize,
    /// `values[i]` is `S_h(h + i)`.
    pub values: Vec<f64>,
}

impl ScanScores {
    /// `S_h(t)`, zero outside the scan range.
    pub fn at(&self, t: usize) -> f64 {
        t.checked_sub(self.h)
            .and_then(|i| self.values.get(i).copied())
            .unwrap_or(0.0)
    }

    pub fn first(&self) -> usize {
        self.h
    }

    pub fn last(&self) -> usize {
        self.h + self.values.len() - 1
    }

    /// `(t, S_h(t))` pairs over the scan range.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &s)| (self.h + i, s))
    }
}

fn fit_window(
    series: &CountSeries,
    window: Window,
    cfg: &ScanConfig,
    warm: Option<&[FitResult]>,
) -> Result<Vec<FitResult>> {
    match cfg.order {
        OrderPolicy::Select(_) => fit_orders(series, window, cfg.p_max, cfg.delta, warm),
        OrderPolicy::Fixed(p) => {
            let start = warm.and_then(|w| w.first()).map(|f| f.params.theta());
            Ok(vec![fit_pqml_from(
                series,
                window,
                p,
                cfg.delta,
                start.as_deref(),
            )?])
        }
    }
}

fn window_loglik(fits: &[FitResult], cfg: &ScanConfig, len: usize) -> f64 {
    match cfg.order {
        OrderPolicy::Select(crit) => fits[best_fit_index(fits, crit, len)].loglik,
        OrderPolicy::Fixed(_) => fits[0].loglik,
    }
}

/// Maximized log-likelihood of every window of length `len` anchored at
/// `0..count`.
fn window_logliks(
    series: &CountSeries,
    len: usize,
    count: usize,
    cfg: &ScanConfig,
) -> Result<Vec<f64>> {
    let starts: Vec<usize> = (0..count).collect();
    let blocks: Vec<Vec<f64>> = starts
        .par_chunks(CHUNK)
        .map(|block| {
            let mut out = Vec::with_capacity(block.len());
            let mut prev: Option<Vec<FitResult>> = None;
            for &k in block {
                let fits = fit_window(series, Window::new(k, len), cfg, prev.as_deref())?;
                out.push(window_loglik(&fits, cfg, len));
                prev = Some(fits);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(blocks.concat())
}

fn single_radius(cfg: &ScanConfig, h: usize) -> ScanConfig {
    ScanConfig {
        radii: vec![h],
        ..cfg.clone()
    }
}

/// `S_h(t)` for a single `t`, computed without caching.
pub fn scan_stat(series: &CountSeries, t: usize, h: usize, cfg: &ScanConfig) -> Result<f64> {
    let n = series.len();
    let cfg = single_radius(cfg, h);
    cfg.validate(n)?;
    if t < h || t > n - h {
        return Ok(0.0);
    }
    let ll = |w: Window| -> Result<f64> {
        Ok(window_loglik(
            &fit_window(series, w, &cfg, None)?,
            &cfg,
            w.len,
        ))
    };
    let left = ll(Window::new(t - h, h))?;
    let right = ll(Window::new(t, h))?;
    let pooled = ll(Window::new(t - h, 2 * h))?;
    Ok((left + right - pooled) / h as f64)
}

/// Scan statistics at radius `h` over the whole series.
pub fn scan_series(series: &CountSeries, h: usize, cfg: &ScanConfig) -> Result<ScanScores> {
    let n = series.len();
    let cfg = single_radius(cfg, h);
    cfg.validate(n)?;
    let short = window_logliks(series, h, n - h + 1, &cfg)?;
    let long = window_logliks(series, 2 * h, n - 2 * h + 1, &cfg)?;
    let hf = h as f64;
    let values = (h..=n - h)
        .map(|t| (short[t - h] + short[t] - long[t - h]) / hf)
        .collect();
    Ok(ScanScores { h, n, values })
}

/// Local maxima of the scan statistics, keeping the `m_max` largest.
///
/// `τ` qualifies when `S_h(τ)` equals the maximum over `(τ − h, τ + h]`
/// and no qualifying point lies in `(τ − h, τ)`. The result is sorted by
/// position; among equal scores the smaller position ranks first.
pub fn local_maxima(scores: &ScanScores, m_max: usize) -> Vec<Candidate> {
    let h = scores.h;
    let mut picked: Vec<Candidate> = Vec::new();
    for (tau, s) in scores.iter() {
        if picked.last().is_some_and(|c| c.tau + h > tau) {
            continue;
        }
        let window_max = (tau + 1 - h..=tau + h)
            .map(|u| scores.at(u))
            .fold(f64::NEG_INFINITY, f64::max);
        if s >= window_max {
            picked.push(Candidate {
                tau,
                score: s,
                radius: h,
            });
        }
    }
    if picked.len() > m_max {
        picked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.tau.cmp(&b.tau)));
        picked.truncate(m_max);
        picked.sort_by_key(|c| c.tau);
    }
    picked
}

/// Union of the candidate sets over all radii in `cfg`.
///
/// Duplicated positions keep the entry from the largest radius.
pub fn scan_multi(series: &CountSeries, cfg: &ScanConfig) -> Result<Vec<Candidate>> {
    cfg.validate(series.len())?;
    let mut all: Vec<Candidate> = Vec::new();
    for &h in &cfg.radii {
        let scores = scan_series(series, h, cfg)?;
        all.extend(local_maxima(&scores, cfg.m_max));
    }
    Ok(merge_candidates(all))
}

/// Sorts by position and removes exact duplicates, preferring larger radii.
pub fn merge_candidates(mut all: Vec<Candidate>) -> Vec<Candidate> {
    all.sort_by(|a, b| a.tau.cmp(&b.tau).then(b.radius.cmp(&a.radius)));
    all.dedup_by_key(|c| c.tau);
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{
        builtin_model, simulate_gcinar, simulate_mcp, InnovationFamily, SegmentSpec, ThinningFamily,
    };

    fn scores(h: usize, values: Vec<f64>) -> ScanScores {
        let n = values.len() + 2 * h - 1;
        ScanScores { h, n, values }
    }

    #[test]
    fn window_rules_reproduce_known_radii() {
        assert_eq!(default_window(500, 0.5, WindowRule::MaxRule), 29);
        assert_eq!(default_window(2000, 1.0, WindowRule::MaxRule), 133);
        assert_eq!(default_window(10_000, 1.0, WindowRule::RawRule), 287);
        assert_eq!(default_window(1000, 1.0, WindowRule::MaxRule), 91);
        assert_eq!(default_window(2000, 1.5, WindowRule::MaxRule), 200);
        assert_eq!(default_window(1000, 3.0, WindowRule::MaxRule), 273);
        assert_eq!(default_window(2000, 0.1, WindowRule::MaxRule), 100);
        assert_eq!(
            window_mix(2000, &[1.0, 0.5, 1.0], WindowRule::RawRule),
            vec![66, 133]
        );
    }

    #[test]
    fn unimodal_scores_give_one_candidate() {
        let v: Vec<f64> = (0..50).map(|i| -((i as f64 - 20.0).powi(2))).collect();
        let c = local_maxima(&scores(10, v.iter().map(|x| x + 1000.0).collect()), 30);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].tau, 30);
    }

    #[test]
    fn flat_scores_take_leftmost_spaced_ties() {
        let c = local_maxima(&scores(5, vec![1.0; 21]), 30);
        let taus: Vec<usize> = c.iter().map(|c| c.tau).collect();
        assert_eq!(taus, vec![5, 10, 15, 20, 25]);
        let c = local_maxima(&scores(5, vec![1.0; 21]), 2);
        let taus: Vec<usize> = c.iter().map(|c| c.tau).collect();
        assert_eq!(taus, vec![5, 10]);
    }

    #[test]
    fn truncation_keeps_highest_scores() {
        let mut v = vec![0.0; 60];
        v[5] = 3.0;
        v[25] = 1.0;
        v[45] = 2.0;
        let c = local_maxima(&scores(10, v), 2);
        let taus: Vec<usize> = c.iter().map(|c| c.tau).collect();
        assert_eq!(taus, vec![15, 55]);
    }

    #[test]
    fn negative_scores_near_edges_are_not_peaks() {
        // Windows reaching outside 4..=13 see the zero padding.
        let c = local_maxima(&scores(4, vec![-1.0; 10]), 30);
        let taus: Vec<usize> = c.iter().map(|c| c.tau).collect();
        assert_eq!(taus, vec![7]);
    }

    #[test]
    fn one_point_scan_range() {
        // With n = 2h the scan range is the single point t = h.
        let seg = SegmentSpec::new(
            ThinningFamily::Binomial,
            vec![0.4],
            InnovationFamily::Poisson { mean: 2.0 },
        )
        .unwrap();
        let s = simulate_gcinar(&seg, 60, 100, 1).unwrap();
        let cfg = ScanConfig::new(30).p_max(3);
        assert!(scan_series(&s, 30, &cfg).is_err());
        let s = simulate_gcinar(&seg, 63, 100, 1).unwrap();
        let out = scan_series(&s, 30, &cfg).unwrap();
        assert_eq!(out.values.len(), 4);
        assert_eq!((out.first(), out.last()), (30, 33));
    }

    #[test]
    fn scan_matches_pointwise_statistic_and_is_deterministic() {
        let spec = builtin_model("A1", 400).unwrap();
        let s = simulate_mcp(&spec, 500, 3);
        let cfg = ScanConfig::new(40).p_max(3);
        let a = scan_series(&s, 40, &cfg).unwrap();
        let b = scan_series(&s, 40, &cfg).unwrap();
        assert_eq!(a, b);
        for t in (40..=360).step_by(7) {
            let direct = scan_stat(&s, t, 40, &cfg).unwrap();
            assert!(
                (a.at(t) - direct).abs() < 1e-8,
                "t={t}: {} vs {direct}",
                a.at(t)
            );
        }
        assert_eq!(scan_stat(&s, 10, 40, &cfg).unwrap(), 0.0);
        assert_eq!(a.at(10), 0.0);
    }

    #[test]
    fn multi_scan_with_single_radius_is_plain_scan() {
        let spec = builtin_model("A1", 600).unwrap();
        let s = simulate_mcp(&spec, 500, 4);
        let cfg = ScanConfig::new(50);
        let plain = local_maxima(&scan_series(&s, 50, &cfg).unwrap(), cfg.m_max);
        assert_eq!(scan_multi(&s, &cfg).unwrap(), plain);
    }

    #[test]
    fn merge_keeps_largest_radius() {
        let c = |tau, radius| Candidate {
            tau,
            score: radius as f64,
            radius,
        };
        let merged = merge_candidates(vec![c(10, 5), c(7, 5), c(10, 9), c(3, 9)]);
        assert_eq!(merged, vec![c(3, 9), c(7, 5), c(10, 9)]);
    }

    #[test]
    fn config_validation() {
        assert!(ScanConfig::new(5).p_max(5).validate(100).is_err());
        assert!(ScanConfig::new(50).validate(100).is_err());
        assert!(ScanConfig::with_radii(vec![20, 10]).validate(100).is_err());
        assert!(ScanConfig::new(20).validate(100).is_ok());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        #[test]
        fn fixed_order_scores_are_nonnegative(seed in 0u64..10_000, p in 1usize..3) {
            let spec = builtin_model("B1", 300).unwrap();
            let s = simulate_mcp(&spec, 200, seed);
            let cfg = ScanConfig::new(25).order(OrderPolicy::Fixed(p));
            let out = scan_series(&s, 25, &cfg).unwrap();
            for (_, v) in out.iter() {
                proptest::prop_assert!(v >= -1e-9);
            }
        }

        #[test]
        fn candidates_are_in_range_and_spaced(
            values in proptest::collection::vec(-5.0f64..5.0, 1..120),
            h in 1usize..15,
            m_max in 1usize..10,
        ) {
            let sc = scores(h, values);
            let c = local_maxima(&sc, m_max);
            proptest::prop_assert!(c.len() <= m_max);
            for w in c.windows(2) {
                proptest::prop_assert!(w[1].tau >= w[0].tau + h);
            }
            for cand in &c {
                proptest::prop_assert!(cand.tau >= h && cand.tau <= sc.n - h);
            }
        }
    }
}
