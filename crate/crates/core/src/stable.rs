//! Symmetric stable laws: characteristic function, density with its x- and
//! α-derivatives, score functions and Chambers–Mallows–Stuck variates.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::interp::PiecewiseChebyshev;
use crate::quadrature::{integrate_semi_infinite, QuadConfig};

/// Location, scale and characteristic exponent of a symmetric stable law
/// with characteristic function `exp(iμt − |σt|^α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub mu: f64,
    pub sigma: f64,
    pub alpha: f64,
}

impl StableParams {
    pub fn new(mu: f64, sigma: f64, alpha: f64) -> Result<Self> {
        let p = Self { mu, sigma, alpha };
        p.validate()?;
        Ok(p)
    }

    /// The standard case `(μ, σ) = (0, 1)`.
    pub fn standard(alpha: f64) -> Result<Self> {
        Self::new(0.0, 1.0, alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be finite, got {}", self.mu)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be > 0, got {}", self.sigma)));
        }
        check_alpha(self.alpha)
    }

    /// Standardizes an observation: `(x − μ)/σ`.
    pub fn standardize(&self, x: f64) -> f64 {
        (x - self.mu) / self.sigma
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in (0, 2], got {alpha}")))
    }
}

/// Characteristic function `exp(iμt − |σt|^α)`.
pub fn cf(t: f64, p: &StableParams) -> Complex64 {
    let modulus = (-(p.sigma * t).abs().powf(p.alpha)).exp();
    Complex64::from_polar(modulus, p.mu * t)
}

/// Gradient of [`cf`] with respect to `(μ, σ, α)`.
///
/// The `|σt|^α log|σt|` factor of the α-derivative is taken as 0 at `t = 0`.
pub fn cf_grad(t: f64, p: &StableParams) -> [Complex64; 3] {
    if t == 0.0 {
        return [Complex64::new(0.0, 0.0); 3];
    }
    let phi = cf(t, p);
    let st = (p.sigma * t).abs();
    let st_a = st.powf(p.alpha);
    [
        Complex64::new(0.0, t) * phi,
        -phi * (st_a * p.alpha / p.sigma),
        -phi * (st_a * st.ln()),
    ]
}

/// Which evaluation route produced a [`DensityEval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensityMethod {
    Inversion,
    TailSeries,
    Gaussian,
}

/// Standard symmetric stable density at a point together with its
/// derivatives in `x` and in `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityEval {
    pub f: f64,
    pub fprime: f64,
    pub falpha: f64,
    pub method: DensityMethod,
}

impl DensityEval {
    /// `∂f/∂μ` at `(μ, σ) = (0, 1)`.
    pub fn f_mu(&self) -> f64 {
        -self.fprime
    }

    /// `∂f/∂σ` at `(μ, σ) = (0, 1)`: `−f − x f′`.
    pub fn f_sigma(&self, x: f64) -> f64 {
        -self.f - x * self.fprime
    }

    /// Score vector `h_θ(x) = (f_μ, f_σ, f_α) / f`.
    pub fn score(&self, x: f64) -> [f64; 3] {
        [self.f_mu() / self.f, self.f_sigma(x) / self.f, self.falpha / self.f]
    }
}

/// |x| above which the tail series is tried before falling back to inversion.
pub const DEFAULT_CROSSOVER: f64 = 10.0;
const SERIES_REL_TOL: f64 = 1e-12;
const SERIES_MAX_TERMS: usize = 400;

/// Standard symmetric stable density `f(x; α)` with `f′` and `f_α`.
///
/// Uses the Gaussian closed form at α = 2 (f and f′ only), the tail series
/// when `|x|` exceeds the crossover and the series meets its tolerance, and
/// Fourier inversion otherwise.
pub fn pdf(x: f64, alpha: f64) -> Result<DensityEval> {
    check_alpha(alpha)?;
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("x must be finite, got {x}")));
    }
    let ax = x.abs();
    if alpha == 2.0 {
        let f = (-ax * ax / 4.0).exp() / (2.0 * PI.sqrt());
        let falpha = inversion_components(ax, alpha, &QuadConfig::new(1e-10, 1e-300))?[2];
        return Ok(DensityEval {
            f,
            fprime: -x / 2.0 * f,
            falpha,
            method: DensityMethod::Gaussian,
        });
    }
    if ax >= DEFAULT_CROSSOVER {
        if let Some(series) = tail_series(ax, alpha) {
            if series.error <= SERIES_REL_TOL * series.f.abs() {
                return Ok(reflect(
                    x,
                    DensityEval {
                        f: series.f,
                        fprime: series.fprime,
                        falpha: series.falpha,
                        method: DensityMethod::TailSeries,
                    },
                ));
            }
        }
    }
    pdf_inversion(x, alpha)
}

/// Density by Fourier inversion regardless of `|x|`.
pub fn pdf_inversion(x: f64, alpha: f64) -> Result<DensityEval> {
    check_alpha(alpha)?;
    let ax = x.abs();
    let [f, fprime, falpha] = inversion_components(ax, alpha, &QuadConfig::new(1e-10, 1e-300))?;
    Ok(reflect(
        x,
        DensityEval {
            f: f.max(0.0),
            fprime,
            falpha,
            method: DensityMethod::Inversion,
        },
    ))
}

/// Density by the large-|x| series regardless of accuracy.
///
/// Returns `None` when `x = 0`, `α = 2`, or the series never starts to
/// decrease.
pub fn pdf_tail_series(x: f64, alpha: f64) -> Option<DensityEval> {
    let ax = x.abs();
    tail_series(ax, alpha).map(|s| {
        reflect(
            x,
            DensityEval {
                f: s.f,
                fprime: s.fprime,
                falpha: s.falpha,
                method: DensityMethod::TailSeries,
            },
        )
    })
}

// f and f_α are even in x, f′ is odd.
fn reflect(x: f64, mut d: DensityEval) -> DensityEval {
    if x < 0.0 {
        d.fprime = -d.fprime;
    }
    d
}

/// Rotation angle of the integration contour for an integrand carrying
/// `e^{-t^a}` factors with largest exponent `max_alpha`.
pub(crate) fn contour_angle(max_alpha: f64) -> f64 {
    (PI / (3.0 * max_alpha)).min(0.45 * PI)
}

/// `Re ∫_0^∞ e^{ixt} g(t) dt` for `x ≥ 0`, integrated along the ray
/// `t = s e^{iφ}`.
///
/// `g` must be analytic in the sector `0 < arg t < φ` and decay there, so the
/// ray and the real axis give the same integral while the ray integrand is
/// exponentially damped instead of oscillating.
pub(crate) fn fourier_along_ray<const M: usize, G>(
    x: f64,
    phi: f64,
    g: G,
    cfg: &QuadConfig,
) -> Result<[f64; M]>
where
    G: Fn(Complex64) -> [Complex64; M],
{
    let dir = Complex64::from_polar(1.0, phi);
    let scale = 1.0 / (1.0 + x * phi.sin());
    let r = integrate_semi_infinite(
        |s| {
            let t = dir * s;
            let osc = (Complex64::new(0.0, x) * t).exp() * dir;
            let vals = g(t);
            let mut out = [0.0; M];
            for m in 0..M {
                out[m] = (osc * vals[m]).re;
            }
            out
        },
        scale,
        cfg,
    )?;
    Ok(r.value)
}

/// `(f, f′, f_α)` at `x ≥ 0` by contour-rotated inversion.
fn inversion_components(x: f64, alpha: f64, cfg: &QuadConfig) -> Result<[f64; 3]> {
    let phi = contour_angle(alpha);
    let v = fourier_along_ray(
        x,
        phi,
        |t| {
            let ln_t = t.ln();
            let t_a = (ln_t * alpha).exp();
            let base = (-t_a).exp();
            [base, Complex64::new(0.0, 1.0) * t * base, -(t_a * ln_t) * base]
        },
        cfg,
    )?;
    Ok([v[0] / PI, v[1] / PI, v[2] / PI])
}

pub(crate) struct SeriesEval {
    pub f: f64,
    pub fprime: f64,
    pub falpha: f64,
    /// Magnitude of the first omitted term of the f series.
    pub error: f64,
}

/// Large-|x| series for `(f, f′, f_α)` at `x > 0`.
///
/// Convergent for α < 1 and asymptotic for α > 1; summation stops once the
/// terms fall below 1e-16 of the sum or begin to grow.
pub(crate) fn tail_series(x: f64, alpha: f64) -> Option<SeriesEval> {
    if !(x > 0.0) || alpha >= 2.0 || alpha <= 0.0 {
        return None;
    }
    let ln_x = x.ln();
    let mut f = 0.0;
    let mut fp = 0.0;
    let mut fa = 0.0;
    let mut prev_mag = f64::INFINITY;
    let mut error = f64::INFINITY;
    let mut decreased = false;
    for k in 1..=SERIES_MAX_TERMS {
        let kf = k as f64;
        let ka = kf * alpha;
        // Γ(kα+1)/k! x^{-kα-1}
        let ln_mag = ln_gamma(ka + 1.0) - ln_gamma(kf + 1.0) - (ka + 1.0) * ln_x;
        let mag = ln_mag.exp();
        // Envelope covering the derivative series as well.
        let envelope = mag * (1.0 + kf * (digamma(ka + 1.0).abs() + ln_x + PI));
        if envelope > prev_mag {
            if !decreased {
                return None;
            }
            error = error.min(prev_mag);
            break;
        }
        if k > 1 {
            decreased = true;
        }
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let (s, c) = (PI * ka / 2.0).sin_cos();
        let term = sign * mag * s;
        f += term;
        fp += -(ka + 1.0) / x * term;
        fa += sign * mag * (kf * digamma(ka + 1.0) * s + FRAC_PI_2 * kf * c - kf * ln_x * s);
        prev_mag = envelope;
        error = mag;
        if envelope < 1e-17 * f.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Some(SeriesEval {
        f: f / PI,
        fprime: fp / PI,
        falpha: fa / PI,
        error: error / PI,
    })
}

/// `P(X > x)` for `x > 0` by the term-wise integrated tail series.
pub fn upper_tail_series(x: f64, alpha: f64) -> Option<f64> {
    if !(x > 0.0) || alpha >= 2.0 {
        return None;
    }
    let ln_x = x.ln();
    let mut total = 0.0;
    let mut prev = f64::INFINITY;
    for k in 1..=SERIES_MAX_TERMS {
        let kf = k as f64;
        let ka = kf * alpha;
        let mag = (ln_gamma(ka + 1.0) - ln_gamma(kf + 1.0) - ka * ln_x).exp() / ka;
        if mag > prev {
            break;
        }
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * mag * (PI * ka / 2.0).sin();
        prev = mag;
        if mag < 1e-17 * total.abs() {
            break;
        }
    }
    Some(total / PI)
}

/// Per-α tabulation of the standard density for repeated evaluation.
///
/// On `[0, crossover]` the table holds piecewise Chebyshev interpolants of
/// `ln f` and `f_α / f` sampled from [`pdf`]; `f′` is the derivative of the
/// `ln f` interpolant times `f`, so likelihood values and x-gradients are
/// mutually consistent. Beyond the crossover the tail series is summed from
/// coefficients computed once, with [`pdf`] as a fallback when no crossover
/// below [`TABLE_MAX_CROSSOVER`] makes the series accurate.
#[derive(Debug, Clone)]
pub struct DensityTable {
    alpha: f64,
    interp: PiecewiseChebyshev<2>,
    crossover: f64,
    tail: Option<TailCoefficients>,
}

#[derive(Debug, Clone)]
struct TailCoefficients {
    // f = Σ a_k x^{-kα-1}, f_α = Σ (b_k − k a_k ln x) x^{-kα-1}
    a: Vec<f64>,
    b: Vec<f64>,
}

pub const TABLE_MAX_CROSSOVER: f64 = 64.0;

// Bound on |h_α| in the Gaussian tail, where the ratio overflows.
const H_ALPHA_LOG_CAP: f64 = 230.0;

impl DensityTable {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let candidates = [10.0, 12.0, 14.0, 16.0, 20.0, 24.0, 32.0, 48.0, TABLE_MAX_CROSSOVER];
        let mut crossover = TABLE_MAX_CROSSOVER;
        let mut tail = None;
        for &c in &candidates {
            if let Some(t) = TailCoefficients::at(c, alpha) {
                crossover = c;
                tail = Some(t);
                break;
            }
        }
        // Geometric toward 0, where small α gives a sharp peak.
        let mut breaks = vec![0.0];
        let curvature_scale = ((ln_gamma(1.0 / alpha) - ln_gamma(3.0 / alpha)) / 2.0).exp();
        let mut b = (curvature_scale / 16.0).min(0.125);
        while b < 1.0 {
            breaks.push(b);
            b *= 2.0;
        }
        breaks.push(1.0);
        let mut b = 1.0;
        while b < crossover {
            b = (b * if alpha > 1.9 { 1.25 } else { 1.5 }).min(crossover);
            breaks.push(b);
        }
        // the Gaussian-to-power-law transition near α = 2 needs more nodes
        let points = if alpha > 1.85 { 24 } else { 16 };
        let interp = PiecewiseChebyshev::build(&breaks, points, |x| {
            let d = pdf(x, alpha)?;
            Ok([d.f.ln(), d.falpha / envelope(x, d.f, alpha)])
        })?;
        Ok(Self {
            alpha,
            interp,
            crossover,
            tail,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn crossover(&self) -> f64 {
        self.crossover
    }

    /// `ln f(x)`, `d ln f / dx` and `h_α = f_α / f` at `x`.
    pub fn log_eval(&self, x: f64) -> Result<[f64; 3]> {
        let ax = x.abs();
        let sign = if x < 0.0 { -1.0 } else { 1.0 };
        if ax <= self.crossover {
            let (v, d) = self.interp.eval_with_derivative(ax);
            let f = v[0].exp();
            return Ok([v[0], sign * d[0], v[1] * envelope(ax, f, self.alpha) / f]);
        }
        let d = match &self.tail {
            Some(t) => t.eval(ax, self.alpha),
            None => pdf(ax, self.alpha)?,
        };
        if self.alpha == 2.0 {
            // f underflows long before ln f does; h_α grows like e^{x²/4}
            let lf = -ax * ax / 4.0 - (2.0 * PI.sqrt()).ln();
            let h = d.falpha.signum() * (d.falpha.abs().ln() - lf).min(H_ALPHA_LOG_CAP).exp();
            return Ok([lf, -x / 2.0, h]);
        }
        Ok([d.f.ln(), sign * d.fprime / d.f, d.falpha / d.f])
    }

    pub fn eval(&self, x: f64) -> Result<DensityEval> {
        let [lf, dlf, ha] = self.log_eval(x)?;
        let f = lf.exp();
        Ok(DensityEval {
            f,
            fprime: f * dlf,
            falpha: f * ha,
            method: if x.abs() <= self.crossover {
                DensityMethod::Inversion
            } else {
                DensityMethod::TailSeries
            },
        })
    }
}

// Positive scale of |f_α| in the body and the tails; tabulating f_α relative
// to it keeps h_α accurate where f itself is Gaussian-small.
fn envelope(x: f64, f: f64, alpha: f64) -> f64 {
    f + (1.0 + x).powf(-alpha - 1.0)
}

/// Shared [`DensityTable`] for `alpha`, built on first use and kept for the
/// life of the process.
///
/// Meant for the handful of exponents that recur across many fits (grid
/// values, a hypothesized α₀, a weighting index); transient exponents should
/// build their own table.
pub fn cached_table(alpha: f64) -> Result<Arc<DensityTable>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<DensityTable>>>> = OnceLock::new();
    check_alpha(alpha)?;
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&alpha.to_bits()) {
        return Ok(t.clone());
    }
    // Built outside the lock; a concurrent duplicate build is harmless.
    let table = Arc::new(DensityTable::new(alpha)?);
    Ok(cache
        .lock()
        .unwrap()
        .entry(alpha.to_bits())
        .or_insert(table)
        .clone())
}

impl TailCoefficients {
    /// Coefficients truncated where the series reaches relative accuracy
    /// `SERIES_REL_TOL` at `x0`, or `None` if it never does.
    fn at(x0: f64, alpha: f64) -> Option<Self> {
        if alpha == 2.0 {
            return Self::gaussian_alpha_derivative(x0);
        }
        let s = tail_series(x0, alpha)?;
        if s.error > SERIES_REL_TOL * s.f.abs() {
            return None;
        }
        let ln_x = x0.ln();
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut prev = f64::INFINITY;
        for k in 1..=SERIES_MAX_TERMS {
            let kf = k as f64;
            let ka = kf * alpha;
            let ln_c = ln_gamma(ka + 1.0) - ln_gamma(kf + 1.0);
            let mag = (ln_c - (ka + 1.0) * ln_x).exp();
            // for α > 1 the series is asymptotic: stop at its smallest term
            if mag < 1e-3 * SERIES_REL_TOL * s.f.abs() || mag > prev {
                break;
            }
            prev = mag;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            let c = sign * ln_c.exp() / PI;
            let (sn, cs) = (PI * ka / 2.0).sin_cos();
            a.push(c * sn);
            b.push(c * (kf * digamma(ka + 1.0) * sn + FRAC_PI_2 * kf * cs));
        }
        Some(Self { a, b })
    }

    // At α = 2 only the α-derivative has a tail series; f itself is Gaussian.
    fn gaussian_alpha_derivative(x0: f64) -> Option<Self> {
        let ln_x = x0.ln();
        let mut b = Vec::new();
        let mut prev = f64::INFINITY;
        for k in 1..=SERIES_MAX_TERMS {
            let kf = k as f64;
            let ln_c = ln_gamma(2.0 * kf + 1.0) - ln_gamma(kf + 1.0);
            let mag = kf * (ln_c - (2.0 * kf + 1.0) * ln_x).exp();
            if mag > prev {
                return None;
            }
            let gauss = (-x0 * x0 / 4.0).exp() / (2.0 * PI.sqrt());
            if mag < 1e-16 * gauss.max(x0.powi(-3)) {
                break;
            }
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            // sin(πk) = 0 and cos(πk) = (−1)^k
            let cs = if k % 2 == 0 { 1.0 } else { -1.0 };
            b.push(sign * ln_c.exp() / PI * FRAC_PI_2 * kf * cs);
            prev = mag;
        }
        Some(Self { a: vec![0.0; b.len()], b })
    }

    fn eval(&self, x: f64, alpha: f64) -> DensityEval {
        let ln_x = x.ln();
        let mut f = 0.0;
        let mut fp = 0.0;
        let mut fa = 0.0;
        for (i, (&a, &b)) in self.a.iter().zip(&self.b).enumerate() {
            let kf = (i + 1) as f64;
            let ka = kf * alpha;
            let p = (-(ka + 1.0) * ln_x).exp();
            f += a * p;
            fp -= (ka + 1.0) / x * a * p;
            fa += (b - kf * a * ln_x) * p;
        }
        if alpha == 2.0 {
            f = (-x * x / 4.0).exp() / (2.0 * PI.sqrt());
            fp = -x / 2.0 * f;
        }
        DensityEval {
            f,
            fprime: fp,
            falpha: fa,
            method: DensityMethod::TailSeries,
        }
    }
}

/// Draws one standard symmetric stable variate (characteristic function
/// `e^{-|t|^α}`) by the Chambers–Mallows–Stuck construction.
pub fn rand_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = PI * (open_unit(rng) - 0.5);
    if alpha == 1.0 {
        return u.tan();
    }
    let w = -open_unit(rng).ln();
    (alpha * u).sin() / u.cos().powf(1.0 / alpha) * ((u - alpha * u).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Uniform draw on the open interval (0, 1).
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Sampler for a stable law with arbitrary location and scale.
#[derive(Debug, Clone, Copy)]
pub struct StableSampler {
    pub params: StableParams,
}

impl StableSampler {
    pub fn new(params: StableParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

impl rand_distr::Distribution<f64> for StableSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.params.mu + self.params.sigma * rand_stable(self.params.alpha, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn cf_examples() {
        let p = StableParams::standard(1.5).unwrap();
        assert_eq!(cf(0.0, &p), Complex64::new(1.0, 0.0));
        let c = cf(1.0, &StableParams::standard(1.0).unwrap());
        assert!((c.re - (-1.0f64).exp()).abs() < 1e-15 && c.im == 0.0);
        let g = cf(2.0, &StableParams::standard(2.0).unwrap());
        assert!((g.re - (-4.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn cf_grad_examples() {
        let p = StableParams::standard(1.5).unwrap();
        assert!(cf_grad(0.0, &p).iter().all(|z| z.norm() == 0.0));
        let g = cf_grad(1.0, &StableParams::standard(1.0).unwrap());
        let e = (-1.0f64).exp();
        assert!((g[0] - Complex64::new(0.0, e)).norm() < 1e-15);
        assert!((g[1] - Complex64::new(-e, 0.0)).norm() < 1e-15);
        assert!(g[2].norm() < 1e-15);
    }

    #[test]
    fn params_reject_out_of_range() {
        assert!(StableParams::new(0.0, 0.0, 1.0).is_err());
        assert!(StableParams::new(0.0, 1.0, 2.5).is_err());
        assert!(StableParams::new(0.0, 1.0, 0.0).is_err());
        assert!(pdf(0.0, 2.1).is_err());
    }

    #[test]
    fn pdf_closed_forms() {
        let c = pdf(0.0, 1.0).unwrap();
        assert!(rel(c.f, 1.0 / PI) < 1e-10);
        let g = pdf(0.0, 2.0).unwrap();
        assert!(rel(g.f, 1.0 / (2.0 * PI.sqrt())) < 1e-14);
        let d = pdf(1.0, 1.0).unwrap();
        assert!(rel(d.fprime, -1.0 / (2.0 * PI)) < 1e-9);
        // Cauchy away from the origin, including the series region.
        for &x in &[0.3, 2.0, 7.5, 12.0, 40.0, -25.0] {
            let d = pdf(x, 1.0).unwrap();
            let exact = 1.0 / (PI * (1.0 + x * x));
            assert!(rel(d.f, exact) < 1e-9, "x={x}: {} vs {exact}", d.f);
            let exact_p = -2.0 * x / (PI * (1.0 + x * x).powi(2));
            assert!(rel(d.fprime, exact_p) < 1e-8, "x={x}");
        }
    }

    #[test]
    fn gaussian_branch_alpha_derivative_is_one_sided_limit() {
        let d2 = pdf(1.3, 2.0).unwrap();
        let h = 1e-5;
        let fd = (pdf(1.3, 2.0).unwrap().f - pdf(1.3, 2.0 - h).unwrap().f) / h;
        assert!((d2.falpha - fd).abs() < 1e-4);
    }

    #[test]
    fn density_is_even() {
        for &a in &[0.7, 1.3, 1.9] {
            for &x in &[0.1, 1.7, 9.9, 15.0] {
                let p = pdf(x, a).unwrap();
                let m = pdf(-x, a).unwrap();
                assert_eq!(p.f, m.f);
                assert_eq!(p.fprime, -m.fprime);
                assert_eq!(p.falpha, m.falpha);
            }
        }
    }

    #[test]
    fn cms_alpha_two_has_variance_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| rand_stable(2.0, &mut rng)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((1.94..=2.06).contains(&v), "variance {v}");
    }

    #[test]
    fn cms_alpha_one_is_cauchy() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| rand_stable(1.0, &mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let mut ks: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let cdf = 0.5 + x.atan() / PI;
            ks = ks.max((cdf - i as f64 / n as f64).abs()).max((cdf - (i + 1) as f64 / n as f64).abs());
        }
        assert!(ks < 0.006, "KS distance {ks}");
    }

    #[test]
    fn cms_is_reproducible() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(rand_stable(1.3, &mut a), rand_stable(1.3, &mut b));
        }
    }

    #[test]
    fn table_tail_finite_near_gaussian() {
        for alpha in [1.8, 1.9, 1.975] {
            let t = DensityTable::new(alpha).unwrap();
            for x in [t.crossover() + 0.5, 20.0, 40.0, 1e3, 1e6] {
                let [lf, dlf, h] = t.log_eval(x).unwrap();
                let d = pdf(x, alpha).unwrap();
                assert!(rel(lf.exp(), d.f) < 1e-6, "α={alpha} x={x}: {} vs {}", lf.exp(), d.f);
                assert!(dlf.is_finite() && h.is_finite());
            }
        }
        let t = DensityTable::new(2.0).unwrap();
        let [lf, dlf, h] = t.log_eval(100.0).unwrap();
        assert!((lf + 2500.0 + (2.0 * PI.sqrt()).ln()).abs() < 1e-9);
        assert_eq!(dlf, -50.0);
        assert!(h.is_finite() && h < 0.0);
    }
}
