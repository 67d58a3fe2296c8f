//! Distribution of `D_κ = Σ X_j²/λ_j` by Slepian's inversion of the
//! characteristic function `1/√D(2it)`.
//!
//! With `a_k = λ_{2k−1}/2`, `b_k = λ_{2k}/2` and `y = a_k + (b_k − a_k)(1 + cos πz)/2`,
//!
//! `F(x) = 1 + Σ_k (−1)^k ∫_0^1 e^{−xy} √(a_k b_k) / (y √|Π'_k(y)|) dz`,
//!
//! where `Π'_k` is the product of `1 − 2y/λ_j` over `j ≤ m` without the two
//! factors that vanish at the ends of the k-th interval. Dividing them out
//! removes the endpoint singularities and keeps each term finite when the
//! two eigenvalues coincide.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::brent_root;
use crate::quadrature::{integrate, QuadConfig};
use crate::spectral::Spectrum;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InversionConfig {
    /// Number of series terms.
    pub l: usize,
    /// Number of eigenvalues in the products.
    pub m: usize,
    pub quad_rel_tol: f64,
}

impl InversionConfig {
    /// Defaults by weight: `l = 25` for `κ ≤ 2.5`, else 10; `m = 500` for
    /// `κ ≤ 5`, else 300.
    pub fn for_kappa(kappa: f64) -> Self {
        Self {
            l: if kappa <= 2.5 { 25 } else { 10 },
            m: if kappa <= 5.0 { 500 } else { 300 },
            quad_rel_tol: 1e-6,
        }
    }

    /// [`InversionConfig::for_kappa`] with `l` and `m` reduced to what the
    /// spectrum supports (spectra of smooth kernels keep few eigenvalues
    /// above the cutoff).
    pub fn for_spectrum(spectrum: &Spectrum) -> Self {
        let mut c = Self::for_kappa(spectrum.kernel.kappa);
        let avail = spectrum.lambdas.len();
        c.m = c.m.min(avail);
        c.l = c.l.min((c.m.saturating_sub(1) / 2).saturating_sub(1)).max(1);
        c
    }

    pub fn validate(&self, spectrum: &Spectrum) -> Result<()> {
        let avail = spectrum.lambdas.len();
        if self.l == 0 || 2 * (self.l + 1) > avail {
            return Err(Error::InvalidParameter(format!(
                "l={} needs {} eigenvalues, spectrum has {avail}",
                self.l,
                2 * (self.l + 1)
            )));
        }
        if self.m <= 2 * (self.l + 1) || self.m > avail {
            return Err(Error::InvalidParameter(format!("m={} must exceed 2(l+1)={} and not exceed {avail}", self.m, 2 * (self.l + 1))));
        }
        if !(self.quad_rel_tol > 0.0 && self.quad_rel_tol <= 1e-5) {
            return Err(Error::InvalidParameter(format!("quad_rel_tol must be in (0, 1e-5], got {}", self.quad_rel_tol)));
        }
        Ok(())
    }
}

/// A series value with the half-gap between consecutive partial sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub bound: f64,
}

/// Coinciding neighbours within this relative gap are reported.
pub const DEGENERATE_REL_GAP: f64 = 1e-10;

/// Indices `k` (1-based) whose interval `[λ_{2k−1}, λ_{2k}]` has (numerically)
/// zero width.
pub fn degenerate_pairs(spectrum: &Spectrum, l: usize) -> Vec<usize> {
    (1..=l)
        .filter(|&k| {
            let (a, b) = (spectrum.lambdas[2 * k - 2], spectrum.lambdas[2 * k - 1]);
            b - a <= DEGENERATE_REL_GAP * b
        })
        .collect()
}

/// `∫_0^1 e^{−xy} √(ab) y^{−p} / √|Π'(y)| dz` for term `k`; `p = 1` for the
/// distribution function, 0 for the density.
fn term(x: f64, k: usize, power: i32, spectrum: &Spectrum, cfg: &InversionConfig) -> Result<f64> {
    let lam = &spectrum.lambdas;
    let (i, j) = (2 * k - 2, 2 * k - 1);
    let (a, b) = (0.5 * lam[i], 0.5 * lam[j]);
    let scale = (a * b).sqrt();
    let quad = QuadConfig::new(cfg.quad_rel_tol, 1e-300);
    let r = integrate(
        |z| {
            let y = a + 0.5 * (b - a) * (1.0 + (std::f64::consts::PI * z).cos());
            let mut log_prod = 0.0;
            for (idx, l) in lam.iter().take(cfg.m).enumerate() {
                if idx != i && idx != j {
                    log_prod += (1.0 - 2.0 * y / l).abs().ln();
                }
            }
            [(-x * y - 0.5 * log_prod).exp() * scale / y.powi(power)]
        },
        0.0,
        1.0,
        &quad,
    )?;
    Ok(r.value[0])
}

fn check_x(x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidParameter(format!("x must be positive, got {x}")));
    }
    Ok(())
}

/// The `l + 1` terms, in index order, checked for decay at the tail.
fn terms(x: f64, power: i32, spectrum: &Spectrum, cfg: &InversionConfig) -> Result<Vec<f64>> {
    check_x(x)?;
    cfg.validate(spectrum)?;
    let t: Vec<f64> = (1..=cfg.l + 1)
        .into_par_iter()
        .map(|k| term(x, k, power, spectrum, cfg))
        .collect::<Result<_>>()?;
    let (last, prev) = (t[cfg.l], t[cfg.l - 1]);
    if last >= prev && last > 1e-12 {
        return Err(Error::Inversion(format!(
            "series terms not decreasing at x={x}: |T_{}|={prev:e}, |T_{}|={last:e}",
            cfg.l,
            cfg.l + 1
        )));
    }
    Ok(t)
}

/// Alternating sum `Σ_{k≤l} (−1)^k T_k` and the next partial sum.
fn partial_sums(t: &[f64], l: usize) -> (f64, f64) {
    let s: f64 = t[..l].iter().enumerate().map(|(i, v)| if i % 2 == 0 { -v } else { *v }).sum();
    let next = if l % 2 == 0 { s - t[l] } else { s + t[l] };
    (s, next)
}

/// Distribution function of `D_κ` with its alternating-series bound.
pub fn cdf_dk_bounded(x: f64, spectrum: &Spectrum, cfg: &InversionConfig) -> Result<SeriesValue> {
    let t = terms(x, 1, spectrum, cfg)?;
    let (s, next) = partial_sums(&t, cfg.l);
    Ok(SeriesValue {
        value: 1.0 + 0.5 * (s + next),
        bound: 0.5 * (s - next).abs(),
    })
}

pub fn cdf_dk(x: f64, spectrum: &Spectrum, cfg: &InversionConfig) -> Result<f64> {
    cdf_dk_bounded(x, spectrum, cfg).map(|v| v.value)
}

/// Density of `D_κ` with its alternating-series bound.
pub fn pdf_dk_bounded(x: f64, spectrum: &Spectrum, cfg: &InversionConfig) -> Result<SeriesValue> {
    let t = terms(x, 0, spectrum, cfg)?;
    let (s, next) = partial_sums(&t, cfg.l);
    Ok(SeriesValue {
        value: -0.5 * (s + next),
        bound: 0.5 * (s - next).abs(),
    })
}

pub fn pdf_dk(x: f64, spectrum: &Spectrum, cfg: &InversionConfig) -> Result<f64> {
    pdf_dk_bounded(x, spectrum, cfg).map(|v| v.value)
}

/// Upper-`ξ` point: the root of `F(x) = 1 − ξ`, with the series bound at
/// the root.
pub fn quantile_dk_bounded(xi: f64, spectrum: &Spectrum, cfg: &InversionConfig) -> Result<SeriesValue> {
    if !(xi > 0.0 && xi < 0.5) {
        return Err(Error::InvalidParameter(format!("xi must be in (0, 0.5), got {xi}")));
    }
    let mean = spectrum.mean();
    let (mut lo, hi) = (mean / 10.0, 10.0 * mean);
    let target = 1.0 - xi;
    let f = |x: f64| cdf_dk(x, spectrum, cfg).map(|v| v - target);
    // the truncated series only converges for x large enough; heavy-tailed
    // kernels need the lower end raised
    let flo = loop {
        match f(lo) {
            Err(Error::Inversion(_)) if lo < 0.5 * mean => lo *= 1.5,
            r => break r?,
        }
    };
    let fhi = f(hi)?;
    if flo * fhi > 0.0 {
        return Err(Error::Bracket(format!(
            "F(x) − {target} does not change sign on [{lo:e}, {hi:e}] ({flo:e}, {fhi:e})"
        )));
    }
    let (x, _, _) = brent_root(f, lo, hi, flo, fhi, 1e-12 * mean, 1e-9, 200)?;
    let v = cdf_dk_bounded(x, spectrum, cfg)?;
    // error in F translated to x through the density
    let density = pdf_dk(x, spectrum, cfg)?;
    let bound = if density > 0.0 { v.bound / density } else { f64::INFINITY };
    Ok(SeriesValue { value: x, bound })
}

pub fn quantile_dk(xi: f64, spectrum: &Spectrum, cfg: &InversionConfig) -> Result<f64> {
    quantile_dk_bounded(xi, spectrum, cfg).map(|v| v.value)
}
