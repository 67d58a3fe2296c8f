//! Asymptotic covariance kernels `Γ(s, t)` of the estimated ECF process and
//! their transforms `K(u, v)` to `[−1, 1]²`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{eise_matrices, fisher_info, fisher_location_scale, EiseMatrices, FisherInfo, FisherInverse, WeightSpec};
use crate::interp::PiecewiseChebyshev;
use crate::quadrature::{integrate, integrate_semi_infinite, QuadConfig};
use crate::stable::{cf, cf_grad, check_alpha, StableParams};
use crate::EULER_GAMMA;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    MleH1,
    MleH2,
    CauchyMle,
    EiseH1,
    EiseFixed,
    EfficientGeneral,
}

impl KernelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelKind::MleH1 => "mle_h1",
            KernelKind::MleH2 => "mle_h2",
            KernelKind::CauchyMle => "cauchy_mle",
            KernelKind::EiseH1 => "eise_h1",
            KernelKind::EiseFixed => "eise_fixed",
            KernelKind::EfficientGeneral => "efficient_general",
        }
    }
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mle_h1" => KernelKind::MleH1,
            "mle_h2" => KernelKind::MleH2,
            "cauchy_mle" => KernelKind::CauchyMle,
            "eise_h1" => KernelKind::EiseH1,
            "eise_fixed" => KernelKind::EiseFixed,
            "efficient_general" => KernelKind::EfficientGeneral,
            _ => return Err(Error::Parse(format!("unknown kernel kind {s:?}"))),
        })
    }
}

/// Which covariance kernel to evaluate, with the matrices it needs.
///
/// `kappa` is the exponent of the test weight `e^{−κ|t|}`; it only enters
/// the transformed kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub alpha: f64,
    pub kappa: f64,
    pub weight: Option<WeightSpec>,
    pub fisher: Option<FisherInverse>,
    pub eise: Option<EiseMatrices>,
}

impl KernelSpec {
    fn base(kind: KernelKind, alpha: f64, kappa: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
        }
        Ok(Self {
            kind,
            alpha,
            kappa,
            weight: None,
            fisher: None,
            eise: None,
        })
    }

    /// MLE with all three parameters estimated.
    pub fn mle_h1(alpha: f64, kappa: f64) -> Result<Self> {
        let mut s = Self::base(KernelKind::MleH1, alpha, kappa)?;
        s.fisher = Some(fisher_info(alpha)?.inverse()?);
        Ok(s)
    }

    /// MLE of `(μ, σ)` with α known; valid up to and including α = 2.
    pub fn mle_h2(alpha: f64, kappa: f64) -> Result<Self> {
        let mut s = Self::base(KernelKind::MleH2, alpha, kappa)?;
        let (i11, i22) = fisher_location_scale(alpha)?;
        s.fisher = Some(FisherInverse {
            i11: 1.0 / i11,
            i22: 1.0 / i22,
            i23: 0.0,
            i33: 0.0,
        });
        Ok(s)
    }

    /// Cauchy law with α estimated by MLE, closed form.
    pub fn cauchy_mle(kappa: f64) -> Result<Self> {
        let mut s = Self::base(KernelKind::CauchyMle, 1.0, kappa)?;
        s.fisher = Some(FisherInfo::cauchy().inverse()?);
        Ok(s)
    }

    pub fn eise_h1(alpha: f64, kappa: f64, weight: WeightSpec) -> Result<Self> {
        let mut s = Self::base(KernelKind::EiseH1, alpha, kappa)?;
        s.weight = Some(weight);
        s.eise = Some(eise_matrices(alpha, weight)?);
        Ok(s)
    }

    pub fn eise_fixed(alpha: f64, kappa: f64, weight: WeightSpec) -> Result<Self> {
        let mut s = Self::eise_h1(alpha, kappa, weight)?;
        s.kind = KernelKind::EiseFixed;
        Ok(s)
    }

    /// The MLE kernel written through the generic efficient-estimator form.
    pub fn efficient_general(alpha: f64, kappa: f64) -> Result<Self> {
        let mut s = Self::mle_h1(alpha, kappa)?;
        s.kind = KernelKind::EfficientGeneral;
        Ok(s)
    }

    /// Builds the spec of `kind`; `weight` is required for the EISE kinds.
    pub fn new(kind: KernelKind, alpha: f64, kappa: f64, weight: Option<WeightSpec>) -> Result<Self> {
        let need_weight = || weight.ok_or_else(|| Error::InvalidParameter(format!("{kind} needs a weight")));
        match kind {
            KernelKind::MleH1 => Self::mle_h1(alpha, kappa),
            KernelKind::MleH2 => Self::mle_h2(alpha, kappa),
            KernelKind::CauchyMle => Self::cauchy_mle(kappa),
            KernelKind::EiseH1 => Self::eise_h1(alpha, kappa, need_weight()?),
            KernelKind::EiseFixed => Self::eise_fixed(alpha, kappa, need_weight()?),
            KernelKind::EfficientGeneral => Self::efficient_general(alpha, kappa),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa must be positive, got {}", self.kappa)));
        }
        let missing = |what: &str| Err(Error::InvalidParameter(format!("{} kernel is missing {what}", self.kind)));
        match self.kind {
            KernelKind::MleH1 | KernelKind::MleH2 | KernelKind::CauchyMle | KernelKind::EfficientGeneral => {
                if self.fisher.is_none() {
                    return missing("the inverse Fisher information");
                }
            }
            KernelKind::EiseH1 | KernelKind::EiseFixed => {
                if self.eise.is_none() || self.weight.is_none() {
                    return missing("the EISE matrices");
                }
            }
        }
        if self.kind == KernelKind::CauchyMle && self.alpha != 1.0 {
            return Err(Error::InvalidParameter("the Cauchy kernel needs alpha = 1".into()));
        }
        Ok(())
    }
}

/// `(|x|^α, |x|^α log|x|)` with the limits `(0, 0)` at `x = 0`.
fn pow_log(x: f64, alpha: f64) -> (f64, f64) {
    let ax = x.abs();
    if ax == 0.0 {
        (0.0, 0.0)
    } else {
        let p = ax.powf(alpha);
        (p, p * ax.ln())
    }
}

fn base_cov(s: f64, t: f64, alpha: f64) -> (f64, f64) {
    let (ps, pt) = (s.abs().powf(alpha), t.abs().powf(alpha));
    let e = (-(ps + pt)).exp();
    ((-(t - s).abs().powf(alpha)).exp() - e, e)
}

/// MLE kernel with `(μ, σ, α)` estimated.
pub fn gamma_mle(s: f64, t: f64, alpha: f64, fisher: &FisherInverse) -> f64 {
    let (c, e) = base_cov(s, t, alpha);
    let (ps, psl) = pow_log(s, alpha);
    let (pt, ptl) = pow_log(t, alpha);
    let bracket = fisher.i11 * s * t
        + fisher.i22 * alpha * alpha * ps * pt
        + fisher.i23 * alpha * (psl * pt + ps * ptl)
        + fisher.i33 * psl * ptl;
    c - bracket * e
}

/// MLE kernel with α known and `(μ, σ)` estimated.
pub fn gamma_mle_fixed(s: f64, t: f64, alpha: f64, fisher: &FisherInverse) -> f64 {
    let (c, e) = base_cov(s, t, alpha);
    let (ps, pt) = (s.abs().powf(alpha), t.abs().powf(alpha));
    c - (fisher.i11 * s * t + fisher.i22 * alpha * alpha * ps * pt) * e
}

/// Closed-form kernel for the Cauchy law with α estimated by MLE.
pub fn gamma_cauchy(s: f64, t: f64) -> f64 {
    let c = EULER_GAMMA + 2f64.ln() - 1.0;
    let e = (-s.abs() - t.abs()).exp();
    let st = s * t;
    let mut v = (-(t - s).abs()).exp() - (1.0 + 2.0 * (st + st.abs())) * e;
    if st != 0.0 {
        v -= 12.0 / (PI * PI) * (s.abs().ln() + c) * (t.abs().ln() + c) * st.abs() * e;
    }
    v
}

/// A parametric family through its characteristic function and gradient.
pub trait CfFamily {
    fn cf(&self, t: f64) -> Complex64;
    fn cf_grad(&self, t: f64) -> Vec<Complex64>;
}

/// Symmetric stable family at fixed parameters.
#[derive(Debug, Clone, Copy)]
pub struct StableFamily(pub StableParams);

impl CfFamily for StableFamily {
    fn cf(&self, t: f64) -> Complex64 {
        cf(t, &self.0)
    }

    fn cf_grad(&self, t: f64) -> Vec<Complex64> {
        cf_grad(t, &self.0).to_vec()
    }
}

/// Kernel of an efficient estimator: `Φ(s−t) − Φ(s) conj Φ(t) −
/// ∇Φ(s)′ I⁻¹ conj ∇Φ(t)`.
pub fn gamma_efficient<F: CfFamily + ?Sized>(s: f64, t: f64, family: &F, fisher_inv: &DMatrix<f64>) -> Complex64 {
    let gs = family.cf_grad(s);
    let gt = family.cf_grad(t);
    let mut quad = Complex64::new(0.0, 0.0);
    for i in 0..gs.len() {
        for j in 0..gt.len() {
            let a = fisher_inv[(i, j)];
            if a != 0.0 {
                quad += gs[i] * a * gt[j].conj();
            }
        }
    }
    family.cf(s - t) - family.cf(s) * family.cf(t).conj() - quad
}

/// Full 3×3 inverse Fisher matrix in `(μ, σ, α)` order.
pub fn fisher_inverse_matrix(f: &FisherInverse) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[f.i11, 0.0, 0.0, 0.0, f.i22, f.i23, 0.0, f.i23, f.i33])
}

/// Integrals `∫ e^{−|s−u|^α − |u|^α} {u, |u|^α, |u|^α log|u|} w(u) du`
/// entering the EISE kernel, tabulated in `s ≥ 0`.
pub struct EiseInner {
    alpha: f64,
    weight: WeightSpec,
    table: PiecewiseChebyshev<3>,
}

fn inner_direct(s: f64, alpha: f64, weight: &WeightSpec) -> Result<[f64; 3]> {
    let s = s.abs();
    let cfg = QuadConfig::new(1e-12, 1e-300);
    let row = |u: f64, e: f64| -> [f64; 3] {
        if u == 0.0 {
            return [0.0; 3];
        }
        let au = u.abs();
        let p = au.powf(alpha);
        let ew = e * weight.eval(u);
        [u * ew, p * ew, p * au.ln() * ew]
    };
    let scale = 1.0 / (1.0 + weight.kappa_or_nu);
    let left = integrate_semi_infinite(|v| row(-v, (-(s + v).powf(alpha) - v.powf(alpha)).exp()), scale, &cfg)?;
    let right = integrate_semi_infinite(|v| row(s + v, (-v.powf(alpha) - (s + v).powf(alpha)).exp()), scale, &cfg)?;
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[k] = left.value[k] + right.value[k];
    }
    if s > 0.0 {
        let mid = integrate(|u| row(u, (-(s - u).powf(alpha) - u.powf(alpha)).exp()), 0.0, s, &cfg)?;
        for k in 0..3 {
            out[k] += mid.value[k];
        }
    }
    Ok(out)
}

impl EiseInner {
    pub fn new(alpha: f64, weight: WeightSpec) -> Result<Self> {
        check_alpha(alpha)?;
        weight.validate()?;
        // beyond `upper` both e^{−s^α} and w(s) are negligible
        let mut upper: f64 = 1.0;
        while ((-upper.powf(alpha)).exp().max(weight.eval(upper))) * (1.0 + upper).powi(2) > 1e-20 {
            upper *= 1.5;
        }
        let mut breaks = vec![0.0];
        let mut b = 0.01;
        while b < 1.0 {
            breaks.push(b);
            b *= 2.0;
        }
        b = 1.0;
        while b < upper {
            breaks.push(b);
            b *= 1.5;
        }
        breaks.push(upper);
        let table = PiecewiseChebyshev::build(&breaks, 20, |s| inner_direct(s, alpha, &weight))?;
        Ok(Self { alpha, weight, table })
    }

    /// `(P(s), R(s), S(s))`; P is odd in s, R and S are even.
    pub fn eval(&self, s: f64) -> Result<[f64; 3]> {
        let a = s.abs();
        let mut v = if a <= self.table.upper() {
            self.table.eval(a)
        } else {
            inner_direct(a, self.alpha, &self.weight)?
        };
        if s < 0.0 {
            v[0] = -v[0];
        }
        Ok(v)
    }

    pub fn eval_direct(&self, s: f64) -> Result<[f64; 3]> {
        let mut v = inner_direct(s, self.alpha, &self.weight)?;
        if s < 0.0 {
            v[0] = -v[0];
        }
        Ok(v)
    }
}

/// EISE kernel evaluator: matrices plus tabulated inner integrals.
pub struct EiseKernel {
    m: EiseMatrices,
    inner: EiseInner,
    fixed_alpha: bool,
}

impl EiseKernel {
    pub fn new(m: EiseMatrices, fixed_alpha: bool) -> Result<Self> {
        Ok(Self {
            inner: EiseInner::new(m.alpha, m.weight)?,
            m,
            fixed_alpha,
        })
    }

    pub fn matrices(&self) -> &EiseMatrices {
        &self.m
    }

    pub fn gamma(&self, s: f64, t: f64) -> Result<f64> {
        let alpha = self.m.alpha;
        let (c, e) = base_cov(s, t, alpha);
        let (ps, psl) = pow_log(s, alpha);
        let (pt, ptl) = pow_log(t, alpha);
        let [p_s, r_s, s_s] = self.inner.eval(s)?;
        let [p_t, r_t, s_t] = self.inner.eval(t)?;
        let (es, et) = ((-ps).exp(), (-pt).exp());
        let (bs, ba) = (self.m.b_sigma, self.m.b_alpha);
        if self.fixed_alpha {
            let (a11, a22) = (1.0 / self.m.a[0][0], 1.0 / self.m.a[1][1]);
            let j11 = self.m.h[0][0] * a11 * a11;
            let j22 = self.m.h[1][1] * a22 * a22;
            let bracket = j11 * s * t + j22 * alpha * alpha * ps * pt + a22 * bs * alpha * (ps + pt);
            let sym = a11 * (t * et * p_s + s * es * p_t) + a22 * alpha * alpha * (pt * et * r_s + ps * es * r_t);
            return Ok(c + bracket * e - sym);
        }
        let j = &self.m.j;
        let ai = &self.m.a_inv;
        let (a11, a22, a23, a33) = (ai[0][0], ai[1][1], ai[1][2], ai[2][2]);
        let bracket = j[0][0] * s * t
            + j[1][1] * alpha * alpha * ps * pt
            + j[1][2] * alpha * (psl * pt + ps * ptl)
            + j[2][2] * psl * ptl
            + (bs * a22 + ba * a23) * alpha * (pt + ps)
            + (bs * a23 + ba * a33) * (ptl + psl);
        let half = |x: f64, px: f64, pxl: f64, ex: f64, p: f64, r: f64, sv: f64| {
            a11 * x * ex * p + alpha * (a22 * alpha * px + a23 * pxl) * ex * r + (a23 * alpha * px + a33 * pxl) * ex * sv
        };
        let sym = half(t, pt, ptl, et, p_s, r_s, s_s) + half(s, ps, psl, es, p_t, r_t, s_t);
        Ok(c + bracket * e - sym)
    }
}

/// EISE kernel at `(s, t)`.
pub fn gamma_eise(s: f64, t: f64, kernel: &EiseKernel) -> Result<f64> {
    kernel.gamma(s, t)
}

/// Ready-to-evaluate kernel built from a [`KernelSpec`].
pub struct Kernel {
    spec: KernelSpec,
    eise: Option<EiseKernel>,
    fisher_matrix: Option<DMatrix<f64>>,
}

impl Kernel {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        spec.validate()?;
        let eise = match spec.kind {
            KernelKind::EiseH1 => Some(EiseKernel::new(spec.eise.unwrap(), false)?),
            KernelKind::EiseFixed => Some(EiseKernel::new(spec.eise.unwrap(), true)?),
            _ => None,
        };
        let fisher_matrix = match spec.kind {
            KernelKind::EfficientGeneral => Some(fisher_inverse_matrix(&spec.fisher.unwrap())),
            _ => None,
        };
        Ok(Self {
            spec,
            eise,
            fisher_matrix,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// `Γ(s, t)`.
    pub fn gamma(&self, s: f64, t: f64) -> Result<f64> {
        let alpha = self.spec.alpha;
        Ok(match self.spec.kind {
            KernelKind::MleH1 => gamma_mle(s, t, alpha, self.spec.fisher.as_ref().unwrap()),
            KernelKind::MleH2 => gamma_mle_fixed(s, t, alpha, self.spec.fisher.as_ref().unwrap()),
            KernelKind::CauchyMle => gamma_cauchy(s, t),
            KernelKind::EiseH1 | KernelKind::EiseFixed => self.eise.as_ref().unwrap().gamma(s, t)?,
            KernelKind::EfficientGeneral => {
                let fam = StableFamily(StableParams::standard(alpha)?);
                gamma_efficient(s, t, &fam, self.fisher_matrix.as_ref().unwrap()).re
            }
        })
    }

    /// `K(u, v) = Γ(s(u), s(v)) e^{−κ(|s(u)|+|s(v)|)/2} / √((1−|u|)(1−|v|))`
    /// with `s(u) = −sgn(u) log(1 − |u|)`.
    pub fn transformed(&self, u: f64, v: f64) -> Result<f64> {
        transformed_kernel(u, v, self)
    }
}

/// Map `u ∈ (−1, 1) ↦ s = −sgn(u) log(1 − |u|)`.
pub fn to_real_line(u: f64) -> f64 {
    -u.signum() * (-u.abs()).ln_1p()
}

/// Transformed kernel on `[−1, 1]²`.
///
/// At `|u| = 1` returns 0 for `κ > 1`; for `κ ≤ 1` the kernel has no limit
/// there and the value at the closest interior point is returned.
pub fn transformed_kernel(u: f64, v: f64, kernel: &Kernel) -> Result<f64> {
    if !(u.abs() <= 1.0 && v.abs() <= 1.0) {
        return Err(Error::InvalidParameter(format!("transformed kernel needs |u|, |v| ≤ 1, got ({u}, {v})")));
    }
    let kappa = kernel.spec.kappa;
    let edge = 1.0 - f64::EPSILON;
    let (mut u, mut v) = (u, v);
    if u.abs() == 1.0 || v.abs() == 1.0 {
        if kappa > 1.0 {
            return Ok(0.0);
        }
        u = u.clamp(-edge, edge);
        v = v.clamp(-edge, edge);
    }
    let (s, t) = (to_real_line(u), to_real_line(v));
    let factor = ((1.0 - u.abs()) * (1.0 - v.abs())).powf(0.5 * (kappa - 1.0));
    Ok(kernel.gamma(s, t)? * factor)
}
