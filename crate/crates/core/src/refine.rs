// SPDX-License-Identifier: MIT OR Apache-2.0

//! Local refinement of selected change-points and the end-to-end detector.

use rayon::prelude::*;

use crate::error::{LrsmError, Result};
use crate::pqml::{feasible_order, fit_pqml, fit_pqml_from, min_terms, sandwich};
use crate::scan::{scan_multi, ScanConfig};
use crate::select::{mdl, optimal_partition};
use crate::series::{
    Candidate, ChangePointSet, CountSeries, LrsmEstimate, SegmentFit, StageTrace, Window,
};

/// Exhaustive search for the best split of `X_{lo+1..hi}` around `tau2`.
///
/// Every `τ ∈ (tau2 − h, tau2 + h]` that leaves both sides long enough is
/// tried; each side is re-fitted at its own order and the split with the
/// largest summed quasi-likelihood wins, the smallest `τ` on ties.
#[allow(clippy::too_many_arguments)]
pub fn refine_within(
    series: &CountSeries,
    tau2: usize,
    p_left: usize,
    p_right: usize,
    h: usize,
    lo: usize,
    hi: usize,
    delta: f64,
) -> Result<usize> {
    let n = series.len();
    if hi > n || lo >= hi || tau2 <= lo || tau2 >= hi {
        return Err(LrsmError::InvalidArgument(format!(
            "refinement window ({lo}, {hi}] does not contain {tau2}"
        )));
    }
    let from = (tau2.saturating_sub(h) + 1).max(lo + 1);
    let to = (tau2 + h).min(hi);
    let feasible = |tau: usize| {
        Window::new(lo, tau - lo).terms(p_left) >= min_terms(p_left)
            && Window::new(tau, hi - tau).terms(p_right) >= min_terms(p_right)
    };
    let mut best: Option<(usize, f64)> = None;
    let mut warm_left: Option<Vec<f64>> = None;
    let mut warm_right: Option<Vec<f64>> = None;
    for tau in (from..=to).filter(|&t| feasible(t)) {
        let left = fit_pqml_from(
            series,
            Window::new(lo, tau - lo),
            p_left,
            delta,
            warm_left.as_deref(),
        )?;
        let right = fit_pqml_from(
            series,
            Window::new(tau, hi - tau),
            p_right,
            delta,
            warm_right.as_deref(),
        )?;
        let total = left.loglik + right.loglik;
        if best.is_none_or(|(_, v)| total > v) {
            best = Some((tau, total));
        }
        warm_left = Some(left.params.theta());
        warm_right = Some(right.params.theta());
    }
    best.map(|(tau, _)| tau).ok_or(LrsmError::WindowTooShort {
        terms: hi - lo,
        order: p_left.max(p_right),
        needed: min_terms(p_left) + min_terms(p_right),
    })
}

/// Refines `tau2` over the extended window `(tau2 − 2h, tau2 + 2h]`,
/// clamped to the series.
pub fn refine_changepoint(
    series: &CountSeries,
    tau2: usize,
    p_left: usize,
    p_right: usize,
    h: usize,
    delta: f64,
) -> Result<usize> {
    let lo = tau2.saturating_sub(2 * h);
    let hi = (tau2 + 2 * h).min(series.len());
    refine_within(series, tau2, p_left, p_right, h, lo, hi, delta)
}

/// Extended refinement windows, truncated at midpoints between neighbours.
fn refinement_bounds(taus: &[usize], radii: &[usize], n: usize) -> Vec<(usize, usize)> {
    (0..taus.len())
        .map(|j| {
            let (tau, h) = (taus[j], radii[j]);
            let mut lo = tau.saturating_sub(2 * h);
            let mut hi = (tau + 2 * h).min(n);
            if j > 0 {
                lo = lo.max((taus[j - 1] + tau) / 2);
            }
            if j + 1 < taus.len() {
                hi = hi.min((tau + taus[j + 1]) / 2);
            }
            (lo, hi)
        })
        .collect()
}

/// Fits every segment of a partition at the given orders, with standard errors.
///
/// A segment too short for its order is fitted at the largest order it supports.
pub fn fit_segments(
    series: &CountSeries,
    taus: &[usize],
    orders: &[usize],
    delta: f64,
) -> Result<Vec<SegmentFit>> {
    let cps = ChangePointSet::new(taus.to_vec(), series.len())?;
    let bounds = cps.boundaries(series.len());
    bounds
        .windows(2)
        .zip(orders)
        .map(|(b, &p)| {
            let window = Window::new(b[0], b[1] - b[0]);
            let order = feasible_order(series, window, p).ok_or(LrsmError::WindowTooShort {
                terms: window.terms(1),
                order: 1,
                needed: min_terms(1),
            })?;
            let fit = fit_pqml(series, window, order, delta)?;
            let sw = sandwich(series, window, &fit.params)?;
            Ok(SegmentFit {
                window,
                order,
                params: fit.params,
                loglik: fit.loglik,
                std_errors: sw.se,
                converged: fit.converged,
            })
        })
        .collect()
}

/// Runs scan, selection and refinement, then fits the final segments.
pub fn lrsm_detect(series: &CountSeries, cfg: &ScanConfig) -> Result<LrsmEstimate> {
    let n = series.len();
    let h_max = cfg.max_radius();
    if n < 4 * h_max {
        return Err(LrsmError::SeriesTooShort {
            n,
            needed: 4 * h_max,
        });
    }
    cfg.validate(n)?;
    let candidates: Vec<Candidate> = scan_multi(series, cfg)?;
    let pool: Vec<usize> = candidates.iter().map(|c| c.tau).collect();
    let p_max = cfg.order_cap();
    let part = optimal_partition(series, &pool, p_max, cfg.delta)?;
    let radii: Vec<usize> = part
        .taus
        .iter()
        .map(|t| {
            candidates
                .iter()
                .find(|c| c.tau == *t)
                .map_or(h_max, |c| c.radius)
        })
        .collect();
    let bounds = refinement_bounds(&part.taus, &radii, n);
    let refined: Vec<usize> = (0..part.taus.len())
        .into_par_iter()
        .map(|j| {
            let (lo, hi) = bounds[j];
            refine_within(
                series,
                part.taus[j],
                part.orders[j],
                part.orders[j + 1],
                radii[j],
                lo,
                hi,
                cfg.delta,
            )
        })
        .collect::<Result<_>>()?;
    let segments = fit_segments(series, &refined, &part.orders, cfg.delta)?;
    let orders: Vec<usize> = segments.iter().map(|s| s.order).collect();
    let taus = ChangePointSet::new(refined, n)?;
    let mdl = mdl(series, &taus, &orders, p_max, cfg.delta)?;
    Ok(LrsmEstimate {
        n,
        m_hat: taus.len(),
        taus,
        radii,
        orders,
        segments,
        mdl,
        stage_trace: StageTrace {
            candidates,
            selected: part.taus,
        },
    })
}
