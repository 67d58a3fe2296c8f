use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{try_integrate, try_integrate_semi_infinite, QuadConfig};
use crate::stable::{check_alpha, pdf, DensityEval};
use crate::EULER_GAMMA;

/// Fisher information of the symmetric stable family at `(0, 1, α)`.
///
/// `I12 = I13 = 0` by symmetry, so only four entries are stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherInfo {
    pub i11: f64,
    pub i22: f64,
    pub i23: f64,
    pub i33: f64,
    pub alpha: f64,
}

/// Entries `I^{ij}` of the inverse Fisher information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherInverse {
    pub i11: f64,
    pub i22: f64,
    pub i23: f64,
    pub i33: f64,
}

impl FisherInfo {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.i11, 0.0, 0.0, 0.0, self.i22, self.i23, 0.0, self.i23, self.i33)
    }

    pub fn inverse(&self) -> Result<FisherInverse> {
        let block = Matrix2::new(self.i22, self.i23, self.i23, self.i33);
        let inv = block
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter(format!("singular Fisher information at α={}", self.alpha)))?;
        Ok(FisherInverse {
            i11: 1.0 / self.i11,
            i22: inv[(0, 0)],
            i23: inv[(0, 1)],
            i33: inv[(1, 1)],
        })
    }

    /// Closed form at α = 1.
    pub fn cauchy() -> Self {
        let c = EULER_GAMMA + 2f64.ln() - 1.0;
        Self {
            i11: 0.5,
            i22: 0.5,
            i23: -0.5 * c,
            i33: 0.5 * (PI * PI / 6.0 + c * c),
            alpha: 1.0,
        }
    }
}

// The score integrals split at the density's series crossover; beyond it the
// substitution x = X e^u turns the algebraic tail into an exponential one.
const SPLIT: f64 = 10.0;

fn integrand(x: f64, d: &DensityEval) -> [f64; 4] {
    let fs = -d.f - x * d.fprime;
    [
        d.fprime * d.fprime / d.f,
        fs * fs / d.f,
        fs * d.falpha / d.f,
        d.falpha * d.falpha / d.f,
    ]
}

/// Fisher information `E[h_i h_j]` by quadrature of the score products.
///
/// Defined for `0 < α < 2`; at α = 2 the α-entry is infinite, see
/// [`fisher_location_scale`] for the entries that stay finite.
pub fn fisher_info(alpha: f64) -> Result<FisherInfo> {
    check_alpha(alpha)?;
    if alpha >= 2.0 {
        return Err(Error::InvalidParameter(
            "Fisher information for α is infinite at α = 2".into(),
        ));
    }
    let cfg = QuadConfig::new(1e-10, 1e-14);
    let core = try_integrate(|x| Ok(integrand(x, &pdf(x, alpha)?)), 0.0, SPLIT, &cfg)?;
    let tail = try_integrate_semi_infinite(
        |u| {
            let x = SPLIT * u.exp();
            if !x.is_finite() {
                return Ok([0.0; 4]);
            }
            let v = integrand(x, &pdf(x, alpha)?);
            Ok(v.map(|c| c * x))
        },
        1.0 / alpha,
        &cfg,
    )?;
    let e = |k: usize| 2.0 * (core.value[k] + tail.value[k]);
    Ok(FisherInfo {
        i11: e(0),
        i22: e(1),
        i23: e(2),
        i33: e(3),
        alpha,
    })
}

/// `(I11, I22)`, which remain finite on the whole range `0 < α ≤ 2`.
///
/// At α = 2 the law is N(0, 2), giving `(1/2, 2)`.
pub fn fisher_location_scale(alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if alpha == 2.0 {
        return Ok((0.5, 2.0));
    }
    let i = fisher_info(alpha)?;
    Ok((i.i11, i.i22))
}

/// Score functions `(h_μ, h_σ, h_α)` at α = 1 in closed form.
pub fn cauchy_al(x: f64) -> [f64; 3] {
    let q = x * x + 1.0;
    [
        2.0 * x / q,
        (x * x - 1.0) / q,
        (1.0 - x * x) / q * (0.5 * q.ln() - 1.0 + EULER_GAMMA) + 2.0 * x / q * x.atan(),
    ]
}
