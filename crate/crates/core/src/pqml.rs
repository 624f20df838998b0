// SPDX-License-Identifier: MIT OR Apache-2.0

//! Poisson quasi-likelihood for GCINAR segments.
//!
//! For a window anchored at `k` the objective is
//! `L(θ) = Σ_t [X_t log ξ_t(θ) − ξ_t(θ)]` with `ξ_t = β0 + Σ βi X_{t−i}`.
//! `L` is concave, so the maximizer over the compact feasible set is found by
//! a projected Newton method on `−L`: Newton steps restricted to the free
//! face of the feasible set, followed by a projection-arc Armijo search, with
//! projected gradient steps as the fallback.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LrsmError, Result};
use crate::series::{CountSeries, GcinarParams, Window};

/// Iteration cap of the optimizer.
pub const MAX_ITERATIONS: usize = 500;
/// Relative tolerance on the projected-gradient norm.
pub const TOLERANCE: f64 = 1e-8;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const ACTIVE_EPS: f64 = 1e-6;

/// Information criterion used to pick an autoregressive order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InformationCriterion {
    #[default]
    Aic,
    Bic,
}

impl InformationCriterion {
    /// Penalty added to `−2 L` for an order-`p` fit on a window of length `len`.
    pub fn penalty(self, p: usize, len: usize) -> f64 {
        let k = (p + 1) as f64;
        match self {
            InformationCriterion::Aic => 2.0 * k,
            InformationCriterion::Bic => k * (len as f64).ln(),
        }
    }

    pub fn value(self, loglik: f64, p: usize, len: usize) -> f64 {
        -2.0 * loglik + self.penalty(p, len)
    }
}

/// Maximizer of the quasi-likelihood over the feasible set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: GcinarParams,
    pub loglik: f64,
    pub order: usize,
    pub converged: bool,
    /// Norm of `P(θ + ∇L) − θ` at the returned point.
    pub gradient_norm: f64,
    pub iterations: usize,
    /// All autoregressive weights are zero at the optimum.
    pub ar_boundary: bool,
}

/// Sandwich covariance `Σ = J⁻¹ I J⁻¹` of the quasi-likelihood estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichVariance {
    pub j: DMatrix<f64>,
    pub i: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    /// `sqrt(diag(Σ) / N)`, `N` the number of likelihood terms.
    pub se: Vec<f64>,
    /// `J` was not positive definite; `Σ` uses its pseudo-inverse.
    pub singular: bool,
    pub terms: usize,
}

/// Likelihood terms of an order-`p` model over a window.
#[derive(Clone, Copy)]
struct Problem<'a> {
    x: &'a [f64],
    first: usize,
    end: usize,
    p: usize,
}

impl<'a> Problem<'a> {
    fn new(series: &'a CountSeries, window: Window, p: usize) -> Result<Self> {
        let n = series.len();
        if window.len == 0 || window.end() > n {
            return Err(LrsmError::WindowOutOfBounds {
                start: window.start,
                len: window.len,
                lags: p,
                n,
            });
        }
        let first = window.start.max(p);
        if first >= window.end() {
            return Err(LrsmError::WindowTooShort {
                terms: 0,
                order: p,
                needed: 1,
            });
        }
        Ok(Self {
            x: series.as_f64(),
            first,
            end: window.end(),
            p,
        })
    }

    fn terms(&self) -> usize {
        self.end - self.first
    }

    fn dim(&self) -> usize {
        self.p + 1
    }

    #[inline]
    fn xi(&self, theta: &[f64], i: usize) -> f64 {
        let lags = &self.x[i - self.p..i];
        let mut v = theta[0];
        for (b, l) in theta[1..].iter().zip(lags.iter().rev()) {
            v += b * l;
        }
        v
    }

    /// Column sums of the regressors `(1, X_{t−1}, …, X_{t−p})`.
    fn regressor_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.dim()];
        s[0] = self.terms() as f64;
        for (k, sk) in s.iter_mut().enumerate().skip(1) {
            *sk = self.x[self.first - k..self.end - k].iter().sum();
        }
        s
    }

    fn all_targets_zero(&self) -> bool {
        self.x[self.first..self.end].iter().all(|&y| y == 0.0)
    }

    /// `L(θ)` given precomputed regressor sums.
    fn loglik(&self, theta: &[f64], sums: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in self.first..self.end {
            let y = self.x[i];
            if y > 0.0 {
                acc += y * self.xi(theta, i).ln();
            }
        }
        acc - dot(theta, sums)
    }

    /// `L(θ)`, the gradient `g = −∇L` and the Hessian `H = −∇²L` (row-major).
    fn derivatives(&self, theta: &[f64], sums: &[f64], g: &mut [f64], h: &mut [f64]) -> f64 {
        let d = self.dim();
        g.copy_from_slice(sums);
        h.fill(0.0);
        let mut acc = 0.0;
        let mut reg = vec![0.0; d];
        reg[0] = 1.0;
        for i in self.first..self.end {
            let y = self.x[i];
            if y == 0.0 {
                continue;
            }
            for k in 1..d {
                reg[k] = self.x[i - k];
            }
            let xi = dot(theta, &reg);
            acc += y * xi.ln();
            let r = y / xi;
            let w = r / xi;
            for a in 0..d {
                g[a] -= r * reg[a];
                let wa = w * reg[a];
                if wa != 0.0 {
                    for b in a..d {
                        h[a * d + b] += wa * reg[b];
                    }
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                h[a * d + b] = h[b * d + a];
            }
        }
        acc - dot(theta, sums)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quasi-log-likelihood `Σ_t [X_t log ξ_t − ξ_t]` over `window`.
///
/// Terms with `X_t = 0` contribute `−ξ_t`.
pub fn quasi_loglik(series: &CountSeries, window: Window, params: &GcinarParams) -> Result<f64> {
    let prob = Problem::new(series, window, params.order())?;
    let theta = params.theta();
    Ok(prob.loglik(&theta, &prob.regressor_sums()))
}

/// Gradient of [`quasi_loglik`] with respect to `(β0, β1, …, βp)`.
pub fn quasi_loglik_gradient(
    series: &CountSeries,
    window: Window,
    params: &GcinarParams,
) -> Result<Vec<f64>> {
    let prob = Problem::new(series, window, params.order())?;
    let theta = params.theta();
    let d = prob.dim();
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    prob.derivatives(&theta, &prob.regressor_sums(), &mut g, &mut h);
    Ok(g.into_iter().map(|v| -v).collect())
}

/// Euclidean projection onto the feasible set.
pub(crate) fn project(theta: &mut [f64], delta: f64) {
    theta[0] = if theta[0].is_nan() {
        delta
    } else {
        theta[0].clamp(delta, 1.0 / delta)
    };
    project_capped_simplex(&mut theta[1..], 1.0 - delta);
}

/// Projection onto `{b ≥ 0, Σ b ≤ cap}`.
fn project_capped_simplex(b: &mut [f64], cap: f64) {
    for v in b.iter_mut() {
        if !(*v > 0.0) {
            *v = 0.0;
        }
    }
    let sum: f64 = b.iter().sum();
    if sum <= cap {
        return;
    }
    let mut u = b.to_vec();
    u.sort_by(|a, c| c.total_cmp(a));
    let mut cumsum = 0.0;
    let mut shift = 0.0;
    for (j, &v) in u.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - cap) / (j + 1) as f64;
        if v - t > 0.0 {
            shift = t;
        }
    }
    for v in b.iter_mut() {
        *v = (*v - shift).max(0.0);
    }
    let total: f64 = b.iter().sum();
    if total > cap {
        let scale = cap / total;
        b.iter_mut().for_each(|v| *v *= scale);
    }
}

fn projected_step(theta: &[f64], dir: &[f64], alpha: f64, delta: f64, out: &mut [f64]) {
    for ((o, t), d) in out.iter_mut().zip(theta).zip(dir) {
        *o = t + alpha * d;
    }
    project(out, delta);
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Conditional least squares start, projected onto the feasible set.
fn cls_start(prob: &Problem, delta: f64) -> Vec<f64> {
    let d = prob.dim();
    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut reg = vec![0.0; d];
    reg[0] = 1.0;
    for i in prob.first..prob.end {
        for k in 1..d {
            reg[k] = prob.x[i - k];
        }
        let y = prob.x[i];
        for r in 0..d {
            rhs[r] += reg[r] * y;
            for c in r..d {
                a[(r, c)] += reg[r] * reg[c];
            }
        }
    }
    for r in 0..d {
        for c in 0..r {
            a[(r, c)] = a[(c, r)];
        }
    }
    let scale = (0..d).map(|r| a[(r, r)]).fold(0.0, f64::max).max(1.0);
    for r in 0..d {
        a[(r, r)] += 1e-8 * scale;
    }
    let mut theta = match a.cholesky() {
        Some(ch) => ch.solve(&rhs).iter().copied().collect(),
        None => {
            let mut t = vec![0.0; d];
            t[0] = rhs[0] / prob.terms() as f64;
            t
        }
    };
    project(&mut theta, delta);
    theta
}

/// Newton direction on the face of the feasible set identified at `theta`.
fn newton_direction(
    theta: &[f64],
    g: &[f64],
    h: &[f64],
    cauchy: &[f64],
    eps: f64,
    delta: f64,
) -> Option<Vec<f64>> {
    let d = theta.len();
    let cap = 1.0 - delta;
    let b0_active = (theta[0] <= delta + eps && cauchy[0] <= delta)
        || (theta[0] >= 1.0 / delta - eps && cauchy[0] >= 1.0 / delta);
    let free_betas: Vec<usize> = (1..d)
        .filter(|&k| !(theta[k] <= eps && cauchy[k] == 0.0))
        .collect();
    let beta_sum: f64 = theta[1..].iter().sum();
    let cauchy_sum: f64 = cauchy[1..].iter().sum();
    let sum_active = beta_sum >= cap - eps && cauchy_sum >= cap * (1.0 - 1e-12);

    // Columns of Z: each reduced coordinate as a full-space direction.
    let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(d);
    if !b0_active {
        cols.push(vec![(0, 1.0)]);
    }
    match (sum_active, free_betas.split_last()) {
        (true, Some((&r, rest))) => {
            for &k in rest {
                cols.push(vec![(k, 1.0), (r, -1.0)]);
            }
        }
        _ => {
            for &k in &free_betas {
                cols.push(vec![(k, 1.0)]);
            }
        }
    }
    let m = cols.len();
    if m == 0 {
        return None;
    }
    let mut hz = DMatrix::<f64>::zeros(m, m);
    let mut gz = DVector::<f64>::zeros(m);
    for (a, ca) in cols.iter().enumerate() {
        gz[a] = ca.iter().map(|&(i, w)| w * g[i]).sum();
        for (b, cb) in cols.iter().enumerate().skip(a) {
            let mut v = 0.0;
            for &(i, wi) in ca {
                for &(j, wj) in cb {
                    v += wi * wj * h[i * d + j];
                }
            }
            hz[(a, b)] = v;
            hz[(b, a)] = v;
        }
    }
    let scale = (0..m).map(|a| hz[(a, a)]).fold(0.0, f64::max).max(1e-12);
    let mut ridge = 1e-12 * scale;
    for _ in 0..6 {
        let mut reg = hz.clone();
        for a in 0..m {
            reg[(a, a)] += ridge;
        }
        if let Some(ch) = reg.cholesky() {
            let dz = ch.solve(&(-&gz));
            let mut dir = vec![0.0; d];
            for (a, ca) in cols.iter().enumerate() {
                for &(i, w) in ca {
                    dir[i] += w * dz[a];
                }
            }
            return Some(dir);
        }
        ridge *= 1e3;
    }
    None
}

/// Armijo search along the projection arc `P(θ + α dir)`.
#[allow(clippy::too_many_arguments)]
fn arc_search(
    prob: &Problem,
    sums: &[f64],
    theta: &[f64],
    f0: f64,
    g: &[f64],
    dir: &[f64],
    alpha0: f64,
    delta: f64,
) -> Option<(Vec<f64>, f64)> {
    let mut trial = vec![0.0; theta.len()];
    let mut alpha = alpha0;
    // Rounding noise of the objective; near the optimum the predicted
    // decrease drops below it and plain Armijo would reject every step.
    let noise = 1e-12 * (1.0 + f0.abs());
    for _ in 0..MAX_BACKTRACKS {
        projected_step(theta, dir, alpha, delta, &mut trial);
        let decrease: f64 = g
            .iter()
            .zip(&trial)
            .zip(theta)
            .map(|((gi, t), s)| gi * (t - s))
            .sum();
        if decrease < 0.0 {
            let f = -prob.loglik(&trial, sums);
            if f <= f0 + ARMIJO * decrease + noise {
                return Some((trial, f));
            }
        }
        alpha *= 0.5;
    }
    None
}

/// Boundary fit for windows without a single positive target.
fn zero_window_fit(prob: &Problem, delta: f64) -> FitResult {
    let mut theta = vec![0.0; prob.dim()];
    theta[0] = delta;
    let loglik = prob.loglik(&theta, &prob.regressor_sums());
    FitResult {
        params: GcinarParams::from_theta_unchecked(&theta, delta),
        loglik,
        order: prob.p,
        converged: true,
        gradient_norm: 0.0,
        iterations: 0,
        ar_boundary: true,
    }
}

fn solve(prob: &Problem, delta: f64, start: Option<&[f64]>) -> FitResult {
    if prob.all_targets_zero() {
        return zero_window_fit(prob, delta);
    }
    let d = prob.dim();
    let sums = prob.regressor_sums();
    let mut theta = match start {
        Some(s) => {
            let mut t = s.to_vec();
            t.resize(d, 0.0);
            project(&mut t, delta);
            t
        }
        None => cls_start(prob, delta),
    };
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    let mut cauchy = vec![0.0; d];
    let mut neg_g = vec![0.0; d];
    let mut loglik;
    let mut pg;
    let mut converged = false;
    let mut iterations = 0;
    loop {
        loglik = prob.derivatives(&theta, &sums, &mut g, &mut h);
        for (ng, gi) in neg_g.iter_mut().zip(&g) {
            *ng = -gi;
        }
        projected_step(&theta, &neg_g, 1.0, delta, &mut cauchy);
        pg = dist(&cauchy, &theta);
        if pg <= TOLERANCE * (1.0 + loglik.abs()) {
            converged = true;
            break;
        }
        if iterations >= MAX_ITERATIONS {
            break;
        }
        iterations += 1;
        let f0 = -loglik;
        let eps = ACTIVE_EPS.min(pg);
        let newton = newton_direction(&theta, &g, &h, &cauchy, eps, delta)
            .and_then(|dir| arc_search(prob, &sums, &theta, f0, &g, &dir, 1.0, delta));
        let step = newton.or_else(|| {
            let curvature: f64 = (0..d).map(|a| h[a * d + a]).sum::<f64>().max(1e-12);
            arc_search(prob, &sums, &theta, f0, &g, &neg_g, 1.0 / curvature, delta)
        });
        match step {
            Some((next, _)) => theta = next,
            None => break,
        }
    }
    let ar_boundary = theta[1..].iter().all(|&b| b == 0.0);
    FitResult {
        params: GcinarParams::from_theta_unchecked(&theta, delta),
        loglik,
        order: prob.p,
        converged,
        gradient_norm: pg,
        iterations,
        ar_boundary,
    }
}

/// Smallest number of likelihood terms an order-`p` fit requires.
pub fn min_terms(p: usize) -> usize {
    p + 2
}

fn check_fit_window(
    series: &CountSeries,
    window: Window,
    p: usize,
    delta: f64,
) -> Result<Problem<'_>> {
    if p == 0 {
        return Err(LrsmError::InvalidArgument(
            "order must be at least 1".into(),
        ));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(LrsmError::InvalidParams(format!(
            "delta must lie in (0, 0.5), got {delta}"
        )));
    }
    let prob = Problem::new(series, window, p)?;
    if prob.terms() < min_terms(p) {
        return Err(LrsmError::WindowTooShort {
            terms: prob.terms(),
            order: p,
            needed: min_terms(p),
        });
    }
    Ok(prob)
}

/// Quasi-maximum-likelihood fit of an order-`p` model over `window`.
pub fn fit_pqml(series: &CountSeries, window: Window, p: usize, delta: f64) -> Result<FitResult> {
    fit_pqml_from(series, window, p, delta, None)
}

/// [`fit_pqml`] started from `start` (padded or truncated to order `p`).
pub fn fit_pqml_from(
    series: &CountSeries,
    window: Window,
    p: usize,
    delta: f64,
    start: Option<&[f64]>,
) -> Result<FitResult> {
    let prob = check_fit_window(series, window, p, delta)?;
    Ok(solve(&prob, delta, start))
}

/// Sandwich variance of the estimator at `params`.
pub fn sandwich(
    series: &CountSeries,
    window: Window,
    params: &GcinarParams,
) -> Result<SandwichVariance> {
    let prob = Problem::new(series, window, params.order())?;
    let theta = params.theta();
    let (j, i) = information_matrices(&prob, &theta);
    let n = prob.terms() as f64;
    let (jinv, singular) = pseudo_inverse(&j);
    let sigma = &jinv * &i * &jinv;
    let se = (0..sigma.nrows())
        .map(|k| (sigma[(k, k)].max(0.0) / n).sqrt())
        .collect();
    Ok(SandwichVariance {
        j,
        i,
        sigma,
        se,
        singular,
        terms: prob.terms(),
    })
}

/// Smallest eigenvalue ratio at which `J` still counts as invertible.
const RCOND_MIN: f64 = 1e-12;

/// Inverse of a symmetric PSD matrix, or its pseudo-inverse (flagged) when
/// it is numerically singular.
fn pseudo_inverse(m: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let eig = m.clone().symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let cut = RCOND_MIN * top;
    let singular = !(top > 0.0) || eig.eigenvalues.iter().any(|&v| v <= cut);
    let inv_vals = eig.eigenvalues.map(|v| if v > cut { 1.0 / v } else { 0.0 });
    let inv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
    (inv, singular)
}

/// `J = N⁻¹ Σ x xᵀ / ξ` and `I = N⁻¹ Σ (X/ξ − 1)² x xᵀ` at `theta`.
fn information_matrices(prob: &Problem, theta: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = prob.dim();
    let mut j = DMatrix::<f64>::zeros(d, d);
    let mut im = DMatrix::<f64>::zeros(d, d);
    let mut reg = vec![0.0; d];
    reg[0] = 1.0;
    for t in prob.first..prob.end {
        for k in 1..d {
            reg[k] = prob.x[t - k];
        }
        let xi = dot(theta, &reg);
        let wj = 1.0 / xi;
        let r = prob.x[t] / xi - 1.0;
        let wi = r * r;
        for a in 0..d {
            for b in a..d {
                let v = reg[a] * reg[b];
                j[(a, b)] += wj * v;
                im[(a, b)] += wi * v;
            }
        }
    }
    let n = prob.terms() as f64;
    for a in 0..d {
        for b in a..d {
            j[(a, b)] /= n;
            im[(a, b)] /= n;
            j[(b, a)] = j[(a, b)];
            im[(b, a)] = im[(a, b)];
        }
    }
    (j, im)
}

/// `J` and `I` of an order-`params.order()` model evaluated over `window`.
pub fn information(
    series: &CountSeries,
    window: Window,
    params: &GcinarParams,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let prob = Problem::new(series, window, params.order())?;
    Ok(information_matrices(&prob, &params.theta()))
}

/// Largest order in `1..=p_max` that `window` can support, if any.
pub fn feasible_order(series: &CountSeries, window: Window, p_max: usize) -> Option<usize> {
    if window.len == 0 || window.end() > series.len() {
        return None;
    }
    (1..=p_max).rev().find(|&p| window.terms(p) >= min_terms(p))
}

/// Window over which orders up to `p` are compared.
///
/// At the start of the series a higher order drops more leading terms, so
/// the likelihoods of different orders would cover different observations.
/// The window is shortened to start at `p`, giving every order the same terms.
pub fn comparison_window(window: Window, p: usize) -> Window {
    if window.start < p && window.end() > p {
        Window::new(p, window.end() - p)
    } else {
        window
    }
}

/// Fits of every feasible order `1..=p_eff`, each warm-started from the
/// previous order or from `warm` when given.
///
/// All orders are evaluated over [`comparison_window`]`(window, p_eff)`.
pub fn fit_orders(
    series: &CountSeries,
    window: Window,
    p_max: usize,
    delta: f64,
    warm: Option<&[FitResult]>,
) -> Result<Vec<FitResult>> {
    let p_eff = feasible_order(series, window, p_max).ok_or(LrsmError::WindowTooShort {
        terms: window.terms(1),
        order: 1,
        needed: min_terms(1),
    })?;
    let window = comparison_window(window, p_eff);
    let mut fits: Vec<FitResult> = Vec::with_capacity(p_eff);
    for p in 1..=p_eff {
        let start = match warm.and_then(|w| w.get(p - 1)) {
            Some(prev) => Some(prev.params.theta()),
            None => fits.last().map(|f| f.params.theta()),
        };
        fits.push(fit_pqml_from(series, window, p, delta, start.as_deref())?);
    }
    Ok(fits)
}

/// Index of the best fit under `criterion`; ties go to the smallest order.
pub fn best_fit_index(fits: &[FitResult], criterion: InformationCriterion, len: usize) -> usize {
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (k, f) in fits.iter().enumerate() {
        let v = criterion.value(f.loglik, f.order, len);
        if v < best_val {
            best_val = v;
            best = k;
        }
    }
    best
}

/// Fit with the order chosen by `criterion` among `1..=p_max`.
///
/// The search is capped at the largest order the window supports.
pub fn fit_selected(
    series: &CountSeries,
    window: Window,
    p_max: usize,
    criterion: InformationCriterion,
    delta: f64,
) -> Result<FitResult> {
    let mut fits = fit_orders(series, window, p_max, delta, None)?;
    let k = best_fit_index(&fits, criterion, window.len);
    Ok(fits.swap_remove(k))
}

/// Order chosen by `criterion` among `1..=p_max`.
pub fn select_order(
    series: &CountSeries,
    window: Window,
    p_max: usize,
    criterion: InformationCriterion,
) -> Result<usize> {
    Ok(fit_selected(
        series,
        window,
        p_max,
        criterion,
        crate::series::DEFAULT_DELTA,
    )?
    .order)
}
