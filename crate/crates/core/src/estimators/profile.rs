//! Fitting driver shared by the estimators.
//!
//! The objective is minimized over `(μ, log σ)` by BFGS at fixed α, and α is
//! moved by a bracketed root search on the α-derivative of the profiled
//! objective (by the envelope theorem this is the partial derivative at the
//! inner optimum). Every change of α costs a fresh density table, so this
//! needs far fewer of them than a joint three-parameter search.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{bfgs, brent_root, BfgsOptions};
use crate::stable::StableParams;

/// Objective value and its partial derivatives.
#[derive(Debug, Clone, Copy, Default)]
pub struct CriterionEval {
    pub value: f64,
    pub d_mu: f64,
    pub d_log_sigma: f64,
    pub d_alpha: f64,
}

/// A smooth objective in `(μ, σ, α)` to be minimized.
pub trait Criterion: Sync {
    type Table: Send + Sync;

    /// Per-α precomputation. `recurring` marks exponents (grid values, a
    /// fixed α₀) worth keeping in a shared cache.
    fn table(&self, alpha: f64, recurring: bool) -> Result<Arc<Self::Table>>;

    /// Objective at `(μ, σ)` with the table's α; derivatives only when
    /// `gradient` is set, and the α-derivative only when `alpha_derivative`
    /// is set too.
    fn eval(&self, table: &Self::Table, mu: f64, sigma: f64, gradient: bool, alpha_derivative: bool) -> Result<CriterionEval>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Convergence threshold on the Euclidean norm of the gradient in
    /// `(μ/σ, log σ, α)`, per observation.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iter: 200,
            alpha_min: 0.1,
            alpha_max: 2.0,
        }
    }
}

/// Result of a fit with its convergence diagnostics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitReport {
    pub params: StableParams,
    /// Value of the minimized objective.
    pub objective: f64,
    pub gradient_norm: f64,
    /// Optimizer iterations summed over all inner solves.
    pub iterations: usize,
    /// Number of distinct α values visited.
    pub alpha_evaluations: usize,
    /// α ended on a bound of the search box.
    pub boundary: bool,
    pub alpha_fixed: bool,
}

pub const GRID_ALPHA_STEP: f64 = 0.05;
pub const GRID_SIGMA_POINTS: usize = 40;

pub fn alpha_grid(min: f64, max: f64) -> Vec<f64> {
    (2..=40)
        .map(|k| k as f64 * GRID_ALPHA_STEP)
        .filter(|&a| a >= min - 1e-12 && a <= max + 1e-12)
        .collect()
}

pub(crate) fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and a positive spread measure (IQR, or mean absolute deviation
/// when more than half the sample is tied).
pub(crate) fn location_spread(data: &[f64]) -> Result<(f64, f64)> {
    if data.len() < 5 {
        return Err(Error::DegenerateSample(format!("need at least 5 observations, got {}", data.len())));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("data contain non-finite values".into()));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = median(&sorted);
    let mut spread = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    if spread <= 0.0 {
        spread = sorted.iter().map(|x| (x - med).abs()).sum::<f64>() / sorted.len() as f64;
    }
    if !(spread > 0.0) {
        return Err(Error::DegenerateSample("all observations are identical".into()));
    }
    Ok((med, spread))
}

fn sigma_grid(spread: f64) -> Vec<f64> {
    let (lo, hi) = (0.02f64.ln(), 2f64.ln());
    (0..GRID_SIGMA_POINTS)
        .map(|i| spread * (lo + (hi - lo) * i as f64 / (GRID_SIGMA_POINTS - 1) as f64).exp())
        .collect()
}

/// Inner optimum at one α.
#[derive(Debug, Clone, Copy)]
struct Inner {
    alpha: f64,
    // coordinates relative to the reference point
    m: f64,
    tau: f64,
    eval: CriterionEval,
    grad_norm: f64,
    iterations: usize,
}

struct Profiler<'a, C: Criterion> {
    crit: &'a C,
    mu_ref: f64,
    sigma_ref: f64,
    opts: FitOptions,
    solved: Vec<Inner>,
    tables: HashMap<u64, Arc<C::Table>>,
}

impl<'a, C: Criterion> Profiler<'a, C> {
    fn params(&self, m: f64, tau: f64) -> (f64, f64) {
        (self.mu_ref + self.sigma_ref * m, self.sigma_ref * tau.exp())
    }

    fn solve(&mut self, alpha: f64, recurring: bool, alpha_derivative: bool) -> Result<Inner> {
        let table = match self.tables.get(&alpha.to_bits()) {
            Some(t) => t.clone(),
            None => {
                let t = self.crit.table(alpha, recurring)?;
                self.tables.insert(alpha.to_bits(), t.clone());
                t
            }
        };
        // warm start from the nearest α already solved
        let start = self
            .solved
            .iter()
            .min_by(|a, b| (a.alpha - alpha).abs().total_cmp(&(b.alpha - alpha).abs()))
            .map(|s| [s.m, s.tau])
            .unwrap_or([0.0, 0.0]);
        let crit = self.crit;
        let (mu_ref, sigma_ref) = (self.mu_ref, self.sigma_ref);
        let r = bfgs(
            |x: &[f64; 2]| {
                let mu = mu_ref + sigma_ref * x[0];
                let sigma = sigma_ref * x[1].exp();
                let e = crit.eval(&table, mu, sigma, true, false)?;
                Ok((e.value, [sigma_ref * e.d_mu, e.d_log_sigma]))
            },
            start,
            &BfgsOptions {
                grad_tol: 0.1 * self.opts.grad_tol,
                max_iter: self.opts.max_iter,
            },
        )?;
        let (mu, sigma) = self.params(r.x[0], r.x[1]);
        let eval = self.crit.eval(&table, mu, sigma, true, alpha_derivative)?;
        // gradient in (μ/σ, log σ): scale-free
        let grad_norm = (sigma * eval.d_mu).hypot(eval.d_log_sigma);
        let inner = Inner {
            alpha,
            m: r.x[0],
            tau: r.x[1],
            eval,
            grad_norm,
            iterations: r.iterations,
        };
        if grad_norm > self.opts.grad_tol {
            return Err(Error::NonConvergence {
                best: StableParams { mu, sigma, alpha },
                iterations: r.iterations,
                gradient_norm: grad_norm,
            });
        }
        self.solved.push(inner);
        Ok(inner)
    }
}

/// Minimizes `crit` over `(μ, σ, α)`, or over `(μ, σ)` when `fixed_alpha`
/// is given.
pub fn fit<C: Criterion>(crit: &C, data: &[f64], fixed_alpha: Option<f64>, opts: &FitOptions) -> Result<FitReport> {
    let (med, spread) = location_spread(data)?;
    let sigmas = sigma_grid(spread);
    let alphas = match fixed_alpha {
        Some(a) => vec![a],
        None => alpha_grid(opts.alpha_min, opts.alpha_max),
    };
    // coarse grid with μ at the median
    let mut best = (f64::INFINITY, alphas[0], sigmas[0]);
    for &a in &alphas {
        let table = crit.table(a, true)?;
        for &s in &sigmas {
            let v = crit.eval(&table, med, s, false, false)?.value;
            if v < best.0 {
                best = (v, a, s);
            }
        }
    }
    let (_, alpha0, sigma0) = best;
    if !best.0.is_finite() {
        return Err(Error::DegenerateSample("objective not finite anywhere on the starting grid".into()));
    }
    let mut prof = Profiler {
        crit,
        mu_ref: med,
        sigma_ref: sigma0,
        opts: *opts,
        solved: Vec::new(),
        tables: HashMap::new(),
    };
    let report = |prof: &Profiler<C>, inner: &Inner, include_alpha: bool| {
        let (mu, sigma) = prof.params(inner.m, inner.tau);
        let ga = if include_alpha { inner.eval.d_alpha } else { 0.0 };
        FitReport {
            params: StableParams { mu, sigma, alpha: inner.alpha },
            objective: inner.eval.value,
            gradient_norm: inner.grad_norm.hypot(ga),
            iterations: prof.solved.iter().map(|s| s.iterations).sum(),
            alpha_evaluations: prof.solved.len(),
            boundary: false,
            alpha_fixed: !include_alpha,
        }
    };
    if let Some(a) = fixed_alpha {
        let inner = prof.solve(a, true, false)?;
        return Ok(report(&prof, &inner, false));
    }

    // Bracket a sign change of dQ*/dα along the grid.
    let on_grid = |a: f64| alphas.iter().any(|g| (g - a).abs() < 1e-12);
    let mut cur = prof.solve(alpha0, true, true)?;
    let upward = cur.eval.d_alpha < 0.0;
    let mut other;
    loop {
        if cur.eval.d_alpha == 0.0 {
            return Ok(report(&prof, &cur, true));
        }
        let next = if upward {
            (cur.alpha + GRID_ALPHA_STEP).min(opts.alpha_max)
        } else {
            (cur.alpha - GRID_ALPHA_STEP).max(opts.alpha_min)
        };
        if next == cur.alpha {
            // still descending at the bound
            let mut r = report(&prof, &cur, false);
            r.boundary = true;
            return Ok(r);
        }
        other = prof.solve(next, on_grid(next), true)?;
        if (other.eval.d_alpha > 0.0) == upward || other.eval.d_alpha == 0.0 {
            break;
        }
        cur = other;
    }
    let (a, b) = (cur, other);
    let mut last = b;
    let tol = opts.grad_tol;
    const MAX_OUTER: usize = 60;
    let (alpha_hat, _, outer) = brent_root(
        |alpha| {
            let inner = prof.solve(alpha, false, true)?;
            last = inner;
            Ok(inner.eval.d_alpha)
        },
        a.alpha,
        b.alpha,
        a.eval.d_alpha,
        b.eval.d_alpha,
        1e-10,
        tol,
        MAX_OUTER,
    )?;
    let inner = prof
        .solved
        .iter()
        .copied()
        .find(|s| s.alpha == alpha_hat)
        .unwrap_or(last);
    let r = report(&prof, &inner, true);
    // A bracket collapsed below 1e-10 in α is accepted even when table
    // noise keeps |dQ*/dα| slightly above the tolerance.
    if outer >= MAX_OUTER {
        return Err(Error::NonConvergence {
            best: r.params,
            iterations: r.iterations,
            gradient_norm: r.gradient_norm,
        });
    }
    Ok(r)
}
