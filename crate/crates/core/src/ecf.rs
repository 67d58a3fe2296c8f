//! Empirical characteristic function and the statistic `D_{n,κ}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{mle_fit, mle_fit_fixed_alpha, FitOptions};
use crate::quadrature::{integrate_semi_infinite, QuadConfig};
use crate::stable::{check_alpha, contour_angle, fourier_along_ray, StableParams};

/// `(1/n) Σ e^{i t y_j}`.
pub fn ecf(t: f64, standardized: &[f64]) -> Complex64 {
    let n = standardized.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for &y in standardized {
        let (s, c) = (t * y).sin_cos();
        re += c;
        im += s;
    }
    Complex64::new(re / n, im / n)
}

/// Composite null: α estimated (H1) or held at a hypothesized α₀ (H2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H1,
    H2,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Hypothesis::H1 => "H1",
            Hypothesis::H2 => "H2",
        })
    }
}

impl std::str::FromStr for Hypothesis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h1" => Ok(Hypothesis::H1),
            "h2" => Ok(Hypothesis::H2),
            _ => Err(Error::Parse(format!("unknown hypothesis {s:?}, expected H1 or H2"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub fitted: StableParams,
    pub kappa: f64,
    pub hypothesis: Hypothesis,
    pub n: usize,
}

const QUAD_REL: f64 = 1e-10;

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
    }
    Ok(())
}

/// `I₁(y) = ∫ cos(ty) e^{−|t|^α − κ|t|} dt`.
pub fn i1(y: f64, alpha: f64, kappa: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_kappa(kappa)?;
    if alpha == 1.0 {
        let k = kappa + 1.0;
        return Ok(2.0 * k / (k * k + y * y));
    }
    let y = y.abs();
    let phi = contour_angle(alpha.max(1.0));
    let [v] = fourier_along_ray(
        y,
        phi,
        |t| [(-(t.ln() * alpha).exp() - kappa * t).exp()],
        &QuadConfig::new(QUAD_REL, 1e-300),
    )?;
    Ok(2.0 * v)
}

/// `I₂ = ∫ e^{−2|t|^α − κ|t|} dt`.
pub fn i2(alpha: f64, kappa: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_kappa(kappa)?;
    let r = integrate_semi_infinite(
        |t| [(-2.0 * t.powf(alpha) - kappa * t).exp()],
        1.0 / (1.0 + kappa),
        &QuadConfig::new(QUAD_REL, 1e-300),
    )?;
    Ok(2.0 * r.value[0])
}

fn standardize(data: &[f64], fitted: &StableParams) -> Result<Vec<f64>> {
    fitted.validate()?;
    if data.is_empty() {
        return Err(Error::DegenerateSample("empty sample".into()));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("data contain non-finite values".into()));
    }
    Ok(data.iter().map(|&x| fitted.standardize(x)).collect())
}

/// `D_{n,κ} = n ∫ |Φ_n(t) − e^{−|t|^α̂}|² e^{−κ|t|} dt` for data standardized
/// by `fitted`, via the closed-form double sum and one-dimensional integrals.
///
/// Under H2 `fitted.alpha` is the hypothesized α₀.
pub fn test_statistic(data: &[f64], fitted: &StableParams, kappa: f64, hypothesis: Hypothesis) -> Result<TestOutcome> {
    check_kappa(kappa)?;
    let ys = standardize(data, fitted)?;
    let n = ys.len();
    let k2 = kappa * kappa;
    let mut pairs = 0.0;
    for (j, &a) in ys.iter().enumerate() {
        for &b in &ys[j + 1..] {
            let d = a - b;
            pairs += 1.0 / (k2 + d * d);
        }
    }
    let pair_term = (2.0 * n as f64 / kappa + 4.0 * kappa * pairs) / n as f64;
    let mut cross = 0.0;
    for &y in &ys {
        cross += i1(y, fitted.alpha, kappa)?;
    }
    let statistic = pair_term - 2.0 * cross + n as f64 * i2(fitted.alpha, kappa)?;
    Ok(TestOutcome {
        statistic: statistic.max(0.0),
        fitted: *fitted,
        kappa,
        hypothesis,
        n,
    })
}

/// `D_{n,κ}` by direct quadrature of the defining integral.
pub fn test_statistic_direct(data: &[f64], fitted: &StableParams, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    let ys = standardize(data, fitted)?;
    let alpha = fitted.alpha;
    let r = integrate_semi_infinite(
        |t| {
            let phi = ecf(t, &ys);
            let d = (phi.re - (-t.powf(alpha)).exp()).powi(2) + phi.im * phi.im;
            [d * (-kappa * t).exp()]
        },
        1.0 / kappa,
        &QuadConfig::new(1e-11, 1e-300),
    )?;
    Ok(2.0 * ys.len() as f64 * r.value[0])
}

/// Fits by maximum likelihood (α fixed at `alpha0` under H2) and computes
/// `D_{n,κ}` for each `κ` in `kappas`.
pub fn mle_test(data: &[f64], kappas: &[f64], hypothesis: Hypothesis, alpha0: Option<f64>, opts: &FitOptions) -> Result<Vec<TestOutcome>> {
    let report = match (hypothesis, alpha0) {
        (Hypothesis::H1, _) => mle_fit(data, opts)?,
        (Hypothesis::H2, Some(a)) => mle_fit_fixed_alpha(data, a, opts)?,
        (Hypothesis::H2, None) => return Err(Error::InvalidParameter("H2 requires alpha0".into())),
    };
    kappas
        .iter()
        .map(|&k| test_statistic(data, &report.params, k, hypothesis))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_scalar;

    #[test]
    fn ecf_examples() {
        assert_eq!(ecf(0.0, &[0.3, -2.0, 7.0]), Complex64::new(1.0, 0.0));
        let z = ecf(0.7, &[1.3]);
        assert!((z - Complex64::from_polar(1.0, 0.91)).norm() < 1e-15);
        assert!(ecf(std::f64::consts::FRAC_PI_2, &[-1.0, 1.0]).norm() < 1e-16);
    }

    #[test]
    fn single_point_cauchy() {
        let p = StableParams::new(4.0, 2.0, 1.0).unwrap();
        let d = test_statistic(&[4.0], &p, 1.0, Hypothesis::H1).unwrap().statistic;
        assert!((d - 2.0 / 3.0).abs() < 1e-10, "{d}");
    }

    #[test]
    fn i1_against_real_quadrature() {
        for &(y, a, k) in &[(0.0, 1.5, 2.5), (0.7, 1.8, 1.0), (3.0, 0.8, 5.0), (12.0, 2.0, 1.0), (2.0, 1.0, 10.0)] {
            let cfg = QuadConfig::new(1e-12, 1e-300);
            let want = 2.0 * integrate_scalar(|t: f64| (t * y).cos() * (-t.powf(a) - k * t).exp(), 0.0, 60.0, &cfg).unwrap();
            let got = i1(y, a, k).unwrap();
            assert!((got - want).abs() < 1e-10, "y={y} α={a} κ={k}: {got} vs {want}");
        }
    }

    #[test]
    fn rejects_bad_kappa() {
        let p = StableParams::standard(1.5).unwrap();
        assert!(test_statistic(&[0.1, 0.2], &p, 0.0, Hypothesis::H1).is_err());
    }
}
