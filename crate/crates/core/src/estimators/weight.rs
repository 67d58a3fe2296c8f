use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stable::{self, DensityTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// `w(t) = e^{−κ|t|}`
    ExpAbs,
    /// `w(t) = e^{−ν|t|^ᾱ}`
    ExpPower,
}

/// Even weight function used by the test statistic and the EISE objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub kappa_or_nu: f64,
    pub bar_alpha: Option<f64>,
}

impl WeightSpec {
    pub fn exp_abs(kappa: f64) -> Result<Self> {
        let w = Self {
            kind: WeightKind::ExpAbs,
            kappa_or_nu: kappa,
            bar_alpha: None,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn exp_power(nu: f64, bar_alpha: f64) -> Result<Self> {
        let w = Self {
            kind: WeightKind::ExpPower,
            kappa_or_nu: nu,
            bar_alpha: Some(bar_alpha),
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_or_nu > 0.0 && self.kappa_or_nu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weight constant must be positive, got {}",
                self.kappa_or_nu
            )));
        }
        match (self.kind, self.bar_alpha) {
            (WeightKind::ExpAbs, _) => Ok(()),
            (WeightKind::ExpPower, Some(a)) if a > 0.0 && a <= 2.0 => Ok(()),
            (WeightKind::ExpPower, a) => Err(Error::InvalidParameter(format!(
                "weighting index must lie in (0, 2], got {a:?}"
            ))),
        }
    }

    /// Exponent of `|t|` in the weight.
    pub fn index(&self) -> f64 {
        match self.kind {
            WeightKind::ExpAbs => 1.0,
            WeightKind::ExpPower => self.bar_alpha.unwrap_or(1.0),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (-self.kappa_or_nu * t.abs().powf(self.index())).exp()
    }

    /// Analytic continuation into the right half plane sector.
    pub(crate) fn eval_complex(&self, t: Complex64) -> Complex64 {
        match self.kind {
            WeightKind::ExpAbs => (-self.kappa_or_nu * t).exp(),
            WeightKind::ExpPower => (-self.kappa_or_nu * (t.ln() * self.index()).exp()).exp(),
        }
    }
}

/// `C_w(c) = ∫ cos(tc) w(t) dt` and its derivative in closed form (or via a
/// stable density table for the power weight).
#[derive(Debug, Clone)]
pub struct CosineTransform {
    spec: WeightSpec,
    table: Option<Arc<DensityTable>>,
}

impl CosineTransform {
    pub fn new(spec: WeightSpec) -> Result<Self> {
        spec.validate()?;
        let table = match spec.kind {
            WeightKind::ExpAbs => None,
            WeightKind::ExpPower => Some(stable::cached_table(spec.index())?),
        };
        Ok(Self { spec, table })
    }

    /// `(C_w(c), C_w′(c))`.
    pub fn eval(&self, c: f64) -> Result<(f64, f64)> {
        let k = self.spec.kappa_or_nu;
        match &self.table {
            None => {
                let d = k * k + c * c;
                Ok((2.0 * k / d, -4.0 * k * c / (d * d)))
            }
            Some(table) => {
                // ∫cos(tc)e^{−ν|t|^ᾱ}dt = 2π ν^{−1/ᾱ} f(c ν^{−1/ᾱ}; ᾱ)
                let s = k.powf(-1.0 / self.spec.index());
                let d = table.eval(c * s)?;
                Ok((2.0 * PI * s * d.f, 2.0 * PI * s * s * d.fprime))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_semi_infinite_scalar, QuadConfig};

    #[test]
    fn rejects_bad_specs() {
        assert!(WeightSpec::exp_abs(0.0).is_err());
        assert!(WeightSpec::exp_power(1.0, 2.5).is_err());
        assert!(WeightSpec::exp_power(1.0, 0.0).is_err());
    }

    #[test]
    fn cosine_transform_matches_quadrature() {
        for spec in [WeightSpec::exp_abs(2.5).unwrap(), WeightSpec::exp_power(1.5, 1.3).unwrap()] {
            let ct = CosineTransform::new(spec).unwrap();
            for &c in &[0.0, 0.7, 3.0, 12.0] {
                let cfg = QuadConfig::new(1e-12, 1e-15);
                let direct = 2.0 * integrate_semi_infinite_scalar(|t| (t * c).cos() * spec.eval(t), 1.0, &cfg).unwrap();
                let deriv = -2.0 * integrate_semi_infinite_scalar(|t| t * (t * c).sin() * spec.eval(t), 1.0, &cfg).unwrap();
                let (v, d) = ct.eval(c).unwrap();
                assert!((v - direct).abs() < 1e-9, "{spec:?} c={c}: {v} vs {direct}");
                assert!((d - deriv).abs() < 1e-8, "{spec:?} c={c}: {d} vs {deriv}");
            }
        }
    }
}
