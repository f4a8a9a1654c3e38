//! Cyclic coordinate descent for the elastic net.
//!
//! Minimizes over `(b0, beta)`:
//!
//! ```text
//! (1/2n) * sum_i w_i (y_i - b0 - x_i'beta)^2
//!     + lambda * sum_k pf_k * [alpha |beta_k| + (1 - alpha) beta_k^2 / 2]
//! ```
//!
//! Sample weights are rescaled to sum to `n`. With `standardize`, the penalty
//! applies to coefficients on the unit-variance scale of each column and the
//! returned coefficients are mapped back to the original scale. Columns with
//! zero variance receive a zero coefficient.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, ArrayView1, ArrayView2};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid penalty specification: {0}")]
    InvalidSpec(String),
    #[error("coordinate descent did not converge after {sweeps} sweeps (lambda = {lambda:e}, relative violation {violation:e}, relative gap {gap:e})")]
    NotConverged {
        sweeps: usize,
        lambda: f64,
        violation: f64,
        gap: f64,
    },
}

/// Penalty and preprocessing options for one fit.
#[derive(Clone, Debug, PartialEq)]
pub struct PenalizedSpec {
    /// Elastic-net mixing: 1 is pure L1, 0 is pure L2.
    pub alpha: f64,
    pub lambda: f64,
    /// Per-coefficient multipliers; `None` means all ones.
    pub penalty_factors: Option<Vec<f64>>,
    pub intercept: bool,
    pub standardize: bool,
}

impl PenalizedSpec {
    pub fn elastic_net(alpha: f64, lambda: f64) -> Self {
        PenalizedSpec {
            alpha,
            lambda,
            penalty_factors: None,
            intercept: true,
            standardize: true,
        }
    }

    pub fn lasso(lambda: f64) -> Self {
        Self::elastic_net(1.0, lambda)
    }

    pub fn ridge(lambda: f64) -> Self {
        Self::elastic_net(0.0, lambda)
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        PenalizedSpec {
            lambda,
            ..self.clone()
        }
    }

    pub fn with_penalty_factors(mut self, factors: Vec<f64>) -> Self {
        self.penalty_factors = Some(factors);
        self
    }

    pub fn raw(mut self) -> Self {
        self.standardize = false;
        self
    }

    pub fn penalty_factor(&self, k: usize) -> f64 {
        self.penalty_factors.as_ref().map_or(1.0, |pf| pf[k])
    }

    pub fn validate(&self, k: usize) -> Result<(), SolverError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SolverError::InvalidSpec(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(SolverError::InvalidSpec(format!(
                "lambda {} must be finite and >= 0",
                self.lambda
            )));
        }
        if let Some(pf) = &self.penalty_factors {
            if pf.len() != k {
                return Err(SolverError::Dimension(format!(
                    "{} penalty factors for {k} columns",
                    pf.len()
                )));
            }
            if pf.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(SolverError::InvalidSpec(
                    "penalty factors must be finite and >= 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Convergence controls for coordinate descent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverControl {
    /// Largest allowed coefficient change in a sweep, measured on the
    /// fitted-value scale and relative to the spread of `y`.
    pub tol: f64,
    pub max_sweeps: usize,
    /// When the sweep limit is reached, the iterate is still accepted if its
    /// largest optimality violation (relative to the spread of `y`) is below
    /// this level. Zero makes the sweep limit a hard failure.
    pub stall_tolerance: f64,
}

impl Default for SolverControl {
    fn default() -> Self {
        SolverControl {
            tol: 1e-9,
            max_sweeps: 100_000,
            stall_tolerance: 1e-5,
        }
    }
}

/// Fitted coefficients on the original scale of the data.
#[derive(Clone, Debug, PartialEq)]
pub struct Fit {
    pub intercept: f64,
    pub beta: Array1<f64>,
    pub lambda: f64,
    pub sweeps: usize,
}

impl Fit {
    pub fn predict(&self, row: ArrayView1<'_, f64>) -> f64 {
        self.intercept + self.beta.dot(&row)
    }

    /// Indices of nonzero coefficients.
    pub fn active(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(k, _)| k)
            .collect()
    }
}

/// Centered, scaled sufficient statistics shared by every lambda of a path.
struct Prepared {
    k: usize,
    x_mean: Vec<f64>,
    y_mean: f64,
    scale: Vec<f64>,
    usable: Vec<bool>,
    gram: Vec<f64>,
    xty: Vec<f64>,
    y_spread: f64,
}

fn check_inputs(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    weights: Option<ArrayView1<'_, f64>>,
) -> Result<Vec<f64>, SolverError> {
    let (n, _) = x.dim();
    if n == 0 {
        return Err(SolverError::Dimension("no observations".into()));
    }
    if y.len() != n {
        return Err(SolverError::Dimension(format!(
            "{n} rows in X but {} in y",
            y.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite("X"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite("y"));
    }
    match weights {
        None => Ok(vec![1.0 / n as f64; n]),
        Some(w) => {
            if w.len() != n {
                return Err(SolverError::Dimension(format!(
                    "{} weights for {n} rows",
                    w.len()
                )));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(SolverError::NonFinite("sample weights"));
            }
            let total: f64 = w.sum();
            if total <= 0.0 {
                return Err(SolverError::InvalidSpec(
                    "sample weights are all zero".into(),
                ));
            }
            Ok(w.iter().map(|v| v / total).collect())
        }
    }
}

fn prepare(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    v: &[f64],
    intercept: bool,
    standardize: bool,
) -> Prepared {
    let (n, k) = x.dim();
    let wmean = |col: &dyn Fn(usize) -> f64| (0..n).map(|i| v[i] * col(i)).sum::<f64>();
    let x_mean: Vec<f64> = (0..k)
        .map(|j| {
            if intercept {
                wmean(&|i| x[[i, j]])
            } else {
                0.0
            }
        })
        .collect();
    let y_mean = if intercept { wmean(&|i| y[i]) } else { 0.0 };
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            if standardize {
                wmean(&|i| (x[[i, j]] - x_mean[j]).powi(2)).sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut usable = vec![true; k];
    let mut xt = vec![0.0; n * k];
    for j in 0..k {
        if scale[j] == 0.0 {
            usable[j] = false;
            continue;
        }
        for i in 0..n {
            xt[j * n + i] = (x[[i, j]] - x_mean[j]) / scale[j];
        }
    }
    let yt: Vec<f64> = (0..n).map(|i| y[i] - y_mean).collect();
    let mut gram = vec![0.0; k * k];
    let mut xty = vec![0.0; k];
    for a in 0..k {
        let col_a = &xt[a * n..(a + 1) * n];
        xty[a] = (0..n).map(|i| v[i] * col_a[i] * yt[i]).sum();
        for b in a..k {
            let col_b = &xt[b * n..(b + 1) * n];
            let g: f64 = (0..n).map(|i| v[i] * col_a[i] * col_b[i]).sum();
            gram[a * k + b] = g;
            gram[b * k + a] = g;
        }
        if gram[a * k + a] == 0.0 {
            usable[a] = false;
        }
    }
    let y_var: f64 = (0..n).map(|i| v[i] * yt[i] * yt[i]).sum();
    Prepared {
        k,
        x_mean,
        y_mean,
        scale,
        usable,
        gram,
        xty,
        y_spread: if y_var > 0.0 { y_var.sqrt() } else { 1.0 },
    }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

impl Prepared {
    /// Runs coordinate descent from `beta` (standardized scale), keeping the
    /// partial-residual correlations `resid` in sync.
    fn solve(
        &self,
        spec: &PenalizedSpec,
        beta: &mut [f64],
        resid: &mut [f64],
        control: &SolverControl,
    ) -> Result<usize, SolverError> {
        let k = self.k;
        let l1: Vec<f64> = (0..k)
            .map(|j| spec.lambda * spec.alpha * spec.penalty_factor(j))
            .collect();
        let l2: Vec<f64> = (0..k)
            .map(|j| spec.lambda * (1.0 - spec.alpha) * spec.penalty_factor(j))
            .collect();
        let threshold = control.tol * self.y_spread;
        let mut sweeps = 0;

        let sweep = |subset: &[usize], beta: &mut [f64], resid: &mut [f64]| -> f64 {
            let mut max_change: f64 = 0.0;
            for &j in subset {
                let gjj = self.gram[j * k + j];
                let old = beta[j];
                let z = resid[j] + gjj * old;
                let denom = gjj + l2[j];
                let new = if denom > 0.0 {
                    soft_threshold(z, l1[j]) / denom
                } else {
                    0.0
                };
                let delta = new - old;
                if delta != 0.0 {
                    beta[j] = new;
                    let row = &self.gram[j * k..(j + 1) * k];
                    for (r, g) in resid.iter_mut().zip(row) {
                        *r -= g * delta;
                    }
                    max_change = max_change.max(delta.abs() * gjj.sqrt());
                }
            }
            max_change
        };

        let all: Vec<usize> = (0..k).filter(|&j| self.usable[j]).collect();
        loop {
            sweeps += 1;
            if sweep(&all, beta, resid) < threshold {
                break;
            }
            loop {
                if sweeps >= control.max_sweeps {
                    return self.stalled(spec, beta, resid, sweeps, control);
                }
                if sweeps % 32 == 0 && self.settle(spec, beta, resid, threshold) {
                    return Ok(sweeps);
                }
                let active: Vec<usize> = all.iter().copied().filter(|&j| beta[j] != 0.0).collect();
                sweeps += 1;
                if sweep(&active, beta, resid) < threshold {
                    break;
                }
            }
            if sweeps >= control.max_sweeps {
                return self.stalled(spec, beta, resid, sweeps, control);
            }
        }
        Ok(sweeps)
    }

    /// Slow progress: tries an exact solve on the active set and reports
    /// whether the result is optimal to within `threshold`.
    fn settle(
        &self,
        spec: &PenalizedSpec,
        beta: &mut [f64],
        resid: &mut [f64],
        threshold: f64,
    ) -> bool {
        let mut trial = beta.to_vec();
        let mut fresh = self.fresh_residual(&trial);
        self.polish(spec, &mut trial, &mut fresh, threshold);
        if self.violation(spec, &trial, &fresh) <= threshold {
            beta.copy_from_slice(&trial);
            resid.copy_from_slice(&fresh);
            true
        } else {
            false
        }
    }

    /// Sweep limit reached: polish, then accept the iterate only if it is
    /// nearly optimal.
    fn stalled(
        &self,
        spec: &PenalizedSpec,
        beta: &mut [f64],
        resid: &mut [f64],
        sweeps: usize,
        control: &SolverControl,
    ) -> Result<usize, SolverError> {
        let mut fresh = self.fresh_residual(beta);
        self.polish(spec, beta, &mut fresh, control.tol * self.y_spread);
        let violation = self.violation(spec, beta, &fresh);
        resid.copy_from_slice(&fresh);
        if violation <= control.stall_tolerance * self.y_spread {
            log::debug!(
                "accepting stalled fit at lambda {:e}: violation {violation:e}",
                spec.lambda
            );
            Ok(sweeps)
        } else {
            Err(SolverError::NotConverged {
                sweeps,
                lambda: spec.lambda,
                violation: violation / self.y_spread,
                gap: self.duality_gap(spec, beta, resid),
            })
        }
    }

    /// Primal objective minus the value of a feasible dual point built by
    /// scaling the residual, relative to the objective at zero. The ridge
    /// part is folded into an augmented lasso. Coordinates with a zero
    /// penalty factor are left out of the dual scaling.
    fn duality_gap(&self, spec: &PenalizedSpec, beta: &[f64], resid: &[f64]) -> f64 {
        let usable = || (0..self.k).filter(|&j| self.usable[j]);
        let y_var = self.y_spread * self.y_spread;
        let mut fitted_sq = 0.0;
        let mut ridge_sq = 0.0;
        let mut l1 = 0.0;
        let mut cross = 0.0;
        let mut scale: f64 = 1.0;
        for j in usable() {
            let pf = spec.penalty_factor(j);
            let g_beta = self.xty[j] - resid[j];
            fitted_sq += beta[j] * g_beta;
            cross += beta[j] * self.xty[j];
            ridge_sq += spec.lambda * (1.0 - spec.alpha) * pf * beta[j] * beta[j];
            l1 += spec.lambda * spec.alpha * pf * beta[j].abs();
            let smooth = (resid[j] - spec.lambda * (1.0 - spec.alpha) * pf * beta[j]).abs();
            let bound = spec.lambda * spec.alpha * pf;
            if pf > 0.0 && smooth > bound {
                scale = scale.min(bound / smooth);
            }
        }
        let resid_sq = (y_var - 2.0 * cross + fitted_sq).max(0.0);
        let aug_sq = resid_sq + ridge_sq;
        let primal = 0.5 * aug_sq + l1;
        let dual = scale * (y_var - cross) - 0.5 * scale * scale * aug_sq;
        (primal - dual).max(0.0) / (0.5 * y_var)
    }

    /// Largest optimality violation on the standardized scale, given
    /// residual correlations in sync with `beta`.
    fn violation(&self, spec: &PenalizedSpec, beta: &[f64], resid: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in (0..self.k).filter(|&j| self.usable[j]) {
            let pf = spec.penalty_factor(j);
            let smooth = resid[j] - spec.lambda * (1.0 - spec.alpha) * pf * beta[j];
            let bound = spec.lambda * spec.alpha * pf;
            let v = if beta[j] == 0.0 {
                (smooth.abs() - bound).max(0.0)
            } else {
                (smooth - bound * beta[j].signum()).abs()
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Active-set search with sign tracking: solves the reduced system for
    /// the current signs, line-searches to the best sign change, and adds
    /// the most violating zero coordinate once the active set is optimal.
    /// Reduced systems are factored with a tiny ridge and refined against
    /// the exact matrix, so collinear columns give a descent direction
    /// rather than a failed factorization. The result replaces `beta` only if the violation does
    /// not grow.
    fn polish(&self, spec: &PenalizedSpec, beta: &mut [f64], resid: &mut Vec<f64>, threshold: f64) {
        let k = self.k;
        let cols: Vec<usize> = (0..k).filter(|&j| self.usable[j]).collect();
        if cols.is_empty() {
            return;
        }
        let max_diag = cols
            .iter()
            .map(|&j| self.gram[j * k + j])
            .fold(0.0, f64::max);
        let jitter = 1e-10 * max_diag;
        let l1: Vec<f64> = (0..k)
            .map(|j| spec.lambda * spec.alpha * spec.penalty_factor(j))
            .collect();
        let diag: Vec<f64> = (0..k)
            .map(|j| {
                self.gram[j * k + j] + spec.lambda * (1.0 - spec.alpha) * spec.penalty_factor(j)
            })
            .collect();
        let a = |i: usize, j: usize| {
            if i == j {
                diag[i]
            } else {
                self.gram[i * k + j]
            }
        };
        let slope = |x: &[f64]| -> Vec<f64> {
            (0..k)
                .map(|i| {
                    if self.usable[i] {
                        self.xty[i] - cols.iter().map(|&j| a(i, j) * x[j]).sum::<f64>()
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let value = |x: &[f64]| -> f64 {
            let r = slope(x);
            cols.iter()
                .map(|&j| -0.5 * x[j] * (self.xty[j] + r[j]) + l1[j] * x[j].abs())
                .sum()
        };
        let sign = |v: f64| if v == 0.0 { 0.0 } else { v.signum() };

        let mut x: Vec<f64> = (0..k)
            .map(|j| if self.usable[j] { beta[j] } else { 0.0 })
            .collect();
        let mut theta: Vec<f64> = x.iter().map(|&v| sign(v)).collect();
        let mut active: Vec<usize> = cols
            .iter()
            .copied()
            .filter(|&j| x[j] != 0.0 || l1[j] == 0.0)
            .collect();
        for _ in 0..20 * k + 100 {
            let r = slope(&x);
            let settled = active
                .iter()
                .all(|&j| (r[j] - l1[j] * theta[j]).abs() <= threshold);
            if settled {
                let entering = cols
                    .iter()
                    .copied()
                    .filter(|&j| x[j] == 0.0 && l1[j] > 0.0 && !active.contains(&j))
                    .map(|j| (j, r[j].abs() - l1[j]))
                    .filter(|&(_, excess)| excess > threshold)
                    .max_by(|p, q| p.1.total_cmp(&q.1));
                let Some((j, _)) = entering else {
                    break;
                };
                theta[j] = r[j].signum();
                active.push(j);
            }
            let m = active.len();
            let lhs = DMatrix::from_fn(m, m, |p, q| a(active[p], active[q]));
            let rhs = DVector::from_fn(m, |p, _| {
                let j = active[p];
                self.xty[j] - l1[j] * theta[j]
            });
            let shifted = &lhs + DMatrix::identity(m, m) * jitter;
            let Some(chol) = shifted.cholesky() else {
                break;
            };
            let mut z = chol.solve(&rhs);
            for _ in 0..2 {
                z += chol.solve(&(&rhs - &lhs * &z));
            }
            let mut target = x.clone();
            for (p, &j) in active.iter().enumerate() {
                target[j] = z[p];
            }
            let mut steps: Vec<(f64, Option<usize>)> = vec![(1.0, None)];
            for &j in &active {
                if x[j] != 0.0 && l1[j] > 0.0 && sign(target[j]) != sign(x[j]) {
                    steps.push((x[j] / (x[j] - target[j]), Some(j)));
                }
            }
            let current = value(&x);
            let mut best: Option<(f64, Vec<f64>)> = None;
            for (t, crossing) in steps {
                let mut point: Vec<f64> = x
                    .iter()
                    .zip(&target)
                    .map(|(u, v)| u + t * (v - u))
                    .collect();
                if let Some(j) = crossing {
                    point[j] = 0.0;
                }
                let v = value(&point);
                if best.as_ref().is_none_or(|(b, _)| v < *b) {
                    best = Some((v, point));
                }
            }
            match best {
                Some((v, point)) if v < current => x = point,
                _ => {
                    let worst = cols
                        .iter()
                        .copied()
                        .map(|j| {
                            let z = soft_threshold(r[j] + diag[j] * x[j], l1[j]) / diag[j];
                            (j, z, (z - x[j]).abs())
                        })
                        .max_by(|p, q| p.2.total_cmp(&q.2));
                    match worst {
                        Some((j, z, change)) if change > 0.0 => {
                            let mut point = x.clone();
                            point[j] = z;
                            if value(&point) < current {
                                x = point;
                            } else {
                                break;
                            }
                        }
                        _ => break,
                    }
                }
            }
            theta = x.iter().map(|&v| sign(v)).collect();
            active = cols
                .iter()
                .copied()
                .filter(|&j| x[j] != 0.0 || l1[j] == 0.0)
                .collect();
        }
        let fresh = self.fresh_residual(&x);
        if x.iter().all(|v| v.is_finite())
            && self.violation(spec, &x, &fresh) <= self.violation(spec, beta, resid)
        {
            beta.copy_from_slice(&x);
            *resid = fresh;
        }
    }

    fn to_fit(&self, beta: &[f64], lambda: f64, sweeps: usize) -> Fit {
        let original: Array1<f64> = (0..self.k)
            .map(|j| {
                if self.usable[j] {
                    beta[j] / self.scale[j]
                } else {
                    0.0
                }
            })
            .collect();
        let intercept = self.y_mean
            - original
                .iter()
                .zip(&self.x_mean)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        Fit {
            intercept,
            beta: original,
            lambda,
            sweeps,
        }
    }

    fn fresh_residual(&self, beta: &[f64]) -> Vec<f64> {
        let k = self.k;
        (0..k)
            .map(|a| self.xty[a] - (0..k).map(|b| self.gram[a * k + b] * beta[b]).sum::<f64>())
            .collect()
    }
}

/// Fits one elastic-net problem with default solver controls.
pub fn fit_penalized(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    spec: &PenalizedSpec,
    weights: Option<ArrayView1<'_, f64>>,
) -> Result<Fit, SolverError> {
    fit_penalized_with(x, y, spec, weights, &SolverControl::default())
}

pub fn fit_penalized_with(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    spec: &PenalizedSpec,
    weights: Option<ArrayView1<'_, f64>>,
    control: &SolverControl,
) -> Result<Fit, SolverError> {
    let mut fits = fit_path_with(x, y, &[spec.lambda], spec, weights, control)?;
    Ok(fits.remove(0))
}

/// Fits `spec` at every penalty level in `lambdas` (in the given order),
/// warm-starting each solve from the previous solution. The `lambda` field of
/// `spec` is ignored.
pub fn fit_path(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambdas: &[f64],
    spec: &PenalizedSpec,
    weights: Option<ArrayView1<'_, f64>>,
) -> Result<Vec<Fit>, SolverError> {
    fit_path_with(x, y, lambdas, spec, weights, &SolverControl::default())
}

pub fn fit_path_with(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambdas: &[f64],
    spec: &PenalizedSpec,
    weights: Option<ArrayView1<'_, f64>>,
    control: &SolverControl,
) -> Result<Vec<Fit>, SolverError> {
    let k = x.ncols();
    for &lambda in lambdas {
        spec.with_lambda(lambda).validate(k)?;
    }
    let v = check_inputs(x, y, weights)?;
    let prepared = prepare(x, y, &v, spec.intercept, spec.standardize);
    let mut beta = vec![0.0; k];
    let mut resid = prepared.xty.clone();
    let mut fits = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let at = spec.with_lambda(lambda);
        let mut sweeps = prepared.solve(&at, &mut beta, &mut resid, control)?;
        let synced = prepared.fresh_residual(&beta);
        if synced
            .iter()
            .zip(&resid)
            .any(|(a, b)| (a - b).abs() > control.tol * prepared.y_spread)
        {
            resid = synced;
            sweeps += prepared.solve(&at, &mut beta, &mut resid, control)?;
            resid = prepared.fresh_residual(&beta);
        } else {
            resid = synced;
        }
        prepared.polish(&at, &mut beta, &mut resid, control.tol * prepared.y_spread);
        fits.push(prepared.to_fit(&beta, lambda, sweeps));
    }
    Ok(fits)
}

/// Objective value of `fit` under `spec` (penalty on the scale the solver
/// used).
pub fn objective(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    spec: &PenalizedSpec,
    weights: Option<ArrayView1<'_, f64>>,
    intercept: f64,
    beta: ArrayView1<'_, f64>,
) -> Result<f64, SolverError> {
    let v = check_inputs(x, y, weights)?;
    let prepared = prepare(x, y, &v, spec.intercept, spec.standardize);
    let loss: f64 = (0..x.nrows())
        .map(|i| {
            let r = y[i] - intercept - x.row(i).dot(&beta);
            v[i] * r * r
        })
        .sum::<f64>()
        / 2.0;
    let penalty: f64 = (0..x.ncols())
        .map(|j| {
            let b = beta[j] * prepared.scale[j];
            spec.penalty_factor(j) * (spec.alpha * b.abs() + (1.0 - spec.alpha) * b * b / 2.0)
        })
        .sum();
    Ok(loss + spec.lambda * penalty)
}

/// Largest violation of the optimality conditions for `fit`, computed
/// directly from the data. Zero-variance columns are skipped under
/// standardization.
pub fn kkt_residual(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    spec: &PenalizedSpec,
    weights: Option<ArrayView1<'_, f64>>,
    fit: &Fit,
) -> Result<f64, SolverError> {
    let v = check_inputs(x, y, weights)?;
    let prepared = prepare(x, y, &v, spec.intercept, spec.standardize);
    let n = x.nrows();
    let resid: Vec<f64> = (0..n).map(|i| y[i] - fit.predict(x.row(i))).collect();
    let mut worst: f64 = 0.0;
    if spec.intercept {
        let mean_resid: f64 = (0..n).map(|i| v[i] * resid[i]).sum();
        worst = worst.max(mean_resid.abs());
    }
    for j in 0..x.ncols() {
        let scale = prepared.scale[j];
        if spec.standardize && scale == 0.0 {
            continue;
        }
        let grad: f64 = (0..n).map(|i| v[i] * x[[i, j]] * resid[i]).sum::<f64>() / scale;
        let b = fit.beta[j] * scale;
        let pf = spec.penalty_factor(j);
        let smooth = grad - spec.lambda * (1.0 - spec.alpha) * pf * b;
        let bound = spec.lambda * spec.alpha * pf;
        let violation = if b == 0.0 {
            (smooth.abs() - bound).max(0.0)
        } else {
            (smooth - bound * b.signum()).abs()
        };
        worst = worst.max(violation);
    }
    Ok(worst)
}
