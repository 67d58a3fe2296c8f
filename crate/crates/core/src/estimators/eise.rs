use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::profile::{fit, Criterion, CriterionEval, FitOptions, FitReport};
use crate::estimators::weight::{CosineTransform, WeightSpec};
use crate::interp::PiecewiseChebyshev;
use crate::quadrature::{integrate, integrate_semi_infinite, try_integrate_semi_infinite, QuadConfig};
use crate::stable::{check_alpha, contour_angle, fourier_along_ray, StableParams};

/// A, H and J matrices of the EISE asymptotic theory at `(0, 1, α)`, with
/// the constants `B_σ`, `B_α` that enter the covariance kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EiseMatrices {
    pub a: [[f64; 3]; 3],
    pub h: [[f64; 3]; 3],
    pub j: [[f64; 3]; 3],
    /// `A^{ij}`, entries of `A⁻¹`.
    pub a_inv: [[f64; 3]; 3],
    pub b_sigma: f64,
    pub b_alpha: f64,
    pub alpha: f64,
    pub weight: WeightSpec,
}

fn to_array(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    out
}

fn from_array(a: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| a[i][j])
}

impl EiseMatrices {
    pub fn a_matrix(&self) -> Matrix3<f64> {
        from_array(&self.a)
    }

    pub fn h_matrix(&self) -> Matrix3<f64> {
        from_array(&self.h)
    }

    pub fn j_matrix(&self) -> Matrix3<f64> {
        from_array(&self.j)
    }
}

// t^p with 0^p = 0 for p > 0, and t^α log t → 0 at t = 0
fn pow_log(t: f64, p: f64) -> (f64, f64) {
    if t == 0.0 {
        (0.0, 0.0)
    } else {
        let tp = t.powf(p);
        (tp, tp * t.ln())
    }
}

/// Computes A by 1-D quadrature, H by nested 2-D quadrature over the
/// positive quadrant (every H integrand is even in `s` and in `t`), and
/// `J = A⁻¹ H A⁻ᵀ`.
pub fn eise_matrices(alpha: f64, weight: WeightSpec) -> Result<EiseMatrices> {
    check_alpha(alpha)?;
    weight.validate()?;
    let cfg = QuadConfig::new(1e-11, 1e-15);
    let one_d = integrate_semi_infinite(
        |t| {
            let e2 = (-2.0 * t.powf(alpha)).exp() * weight.eval(t);
            let (ta, ta_log) = pow_log(t, alpha);
            let log_t = if t > 0.0 { t.ln() } else { 0.0 };
            [
                e2 * t * t,
                e2 * ta * ta,
                e2 * ta * ta_log,
                e2 * ta_log * ta_log,
                e2 * ta,
                e2 * ta * log_t,
            ]
            .map(|v| if v.is_finite() { v } else { 0.0 })
        },
        1.0,
        &cfg,
    )?
    .value;
    let a11 = 2.0 * one_d[0];
    let a22 = 2.0 * alpha * alpha * one_d[1];
    let a23 = 2.0 * alpha * one_d[2];
    let a33 = 2.0 * one_d[3];
    let b_sigma = 2.0 * alpha * one_d[4];
    let b_alpha = 2.0 * one_d[5];

    let h = h_integrals(alpha, &weight)?;
    let a = Matrix3::new(a11, 0.0, 0.0, 0.0, a22, a23, 0.0, a23, a33);
    let hm = Matrix3::new(h[0], 0.0, 0.0, 0.0, h[1], h[2], 0.0, h[2], h[3]);
    let a_inv = a
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter(format!("singular EISE A matrix at α={alpha}")))?;
    let j = a_inv * hm * a_inv.transpose();
    Ok(EiseMatrices {
        a: to_array(&a),
        h: to_array(&hm),
        j: to_array(&j),
        a_inv: to_array(&a_inv),
        b_sigma,
        b_alpha,
        alpha,
        weight,
    })
}

// (H_μμ, H_σσ, H_σα, H_αα)
fn h_integrals(alpha: f64, weight: &WeightSpec) -> Result<[f64; 4]> {
    let inner_cfg = QuadConfig::new(1e-11, 1e-16);
    let outer_cfg = QuadConfig::new(1e-9, 1e-14);
    let integrand = |s: f64, t: f64| -> [f64; 4] {
        let (sa, sa_log) = pow_log(s, alpha);
        let (ta, ta_log) = pow_log(t, alpha);
        let base = (-(sa + ta)).exp() * weight.eval(s) * weight.eval(t);
        let minus = (-(s - t).abs().powf(alpha)).exp();
        let plus = (-(s + t).powf(alpha)).exp();
        let odd = 0.5 * (minus - plus);
        let even = 0.5 * (minus + plus) - (-(sa + ta)).exp();
        let v = [
            odd * s * t * base,
            alpha * alpha * even * sa * ta * base,
            alpha * even * sa * ta_log * base,
            even * sa_log * ta_log * base,
        ];
        v.map(|x| if x.is_finite() { x } else { 0.0 })
    };
    let mut failure = None;
    let outer = integrate_semi_infinite(
        |s| {
            if failure.is_some() {
                return [0.0; 4];
            }
            // |s − t|^α has a kink at t = s
            let lower = integrate(|t| integrand(s, t), 0.0, s, &inner_cfg);
            let upper = integrate_semi_infinite(|u| integrand(s, s + u), 1.0, &inner_cfg);
            match (lower, upper) {
                (Ok(l), Ok(u)) => {
                    let mut v = [0.0; 4];
                    for k in 0..4 {
                        v[k] = l.value[k] + u.value[k];
                    }
                    v
                }
                (Err(e), _) | (_, Err(e)) => {
                    failure = Some(e);
                    [0.0; 4]
                }
            }
        },
        1.0,
        &outer_cfg,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(outer?.value.map(|v| 4.0 * v))
}

/// `(M, M′, M_α)` at `y ≥ 0` where `M(y) = ∫cos(ty)e^{−|t|^α}w(t)dt`.
fn m_direct(y: f64, alpha: f64, weight: &WeightSpec) -> Result<[f64; 3]> {
    let phi = contour_angle(alpha.max(weight.index()));
    let cfg = QuadConfig::new(1e-11, 1e-300);
    let v = fourier_along_ray(
        y,
        phi,
        |t| {
            let ln_t = t.ln();
            let t_a = (ln_t * alpha).exp();
            let base = 2.0 * (-t_a).exp() * weight.eval_complex(t);
            [base, Complex64::new(0.0, 1.0) * t * base, -(t_a * ln_t) * base]
        },
        &cfg,
    )?;
    Ok(v)
}

/// Per-α tabulation of the data term of Q.
pub struct EiseTable {
    alpha: f64,
    weight: WeightSpec,
    m: PiecewiseChebyshev<2>,
    // ∫e^{−2|t|^α}w and its α-derivative
    n_val: f64,
    n_der: f64,
}

const EISE_TABLE_MAX: f64 = 1.0e4;

impl EiseTable {
    pub fn new(alpha: f64, weight: WeightSpec) -> Result<Self> {
        check_alpha(alpha)?;
        let scale = weight.kappa_or_nu.powf(1.0 / weight.index());
        let mut breaks = vec![0.0];
        let mut b = (0.25 * scale).min(0.125);
        while b < 1.0 {
            breaks.push(b);
            b *= 2.0;
        }
        let mut b = 1.0;
        while b < 40.0 {
            breaks.push(b);
            b *= 1.5;
        }
        // far panels serve the small-σ end of the starting grid
        while b < EISE_TABLE_MAX {
            breaks.push(b);
            b *= 2.0;
        }
        breaks.push(EISE_TABLE_MAX);
        let m = PiecewiseChebyshev::build(&breaks, 20, |y| {
            let v = m_direct(y, alpha, &weight)?;
            Ok([v[0], v[2]])
        })?;
        let cfg = QuadConfig::new(1e-12, 1e-16);
        let nv = try_integrate_semi_infinite(
            |t| {
                let (ta, ta_log) = pow_log(t, alpha);
                let e = (-2.0 * ta).exp() * weight.eval(t);
                Ok([2.0 * e, -4.0 * ta_log * e])
            },
            1.0,
            &cfg,
        )?
        .value;
        Ok(Self {
            alpha,
            weight,
            m,
            n_val: nv[0],
            n_der: nv[1],
        })
    }

    /// `(M, M′, M_α)` at `y`.
    pub fn data_term(&self, y: f64) -> Result<[f64; 3]> {
        let ay = y.abs();
        let sign = if y < 0.0 { -1.0 } else { 1.0 };
        if ay <= EISE_TABLE_MAX {
            let (v, d) = self.m.eval_with_derivative(ay);
            return Ok([v[0], sign * d[0], v[1]]);
        }
        let v = m_direct(ay, self.alpha, &self.weight)?;
        Ok([v[0], sign * v[1], v[2]])
    }
}

type EiseKey = (u64, u64, u64);

/// Shared [`EiseTable`] for recurring `(α, weight)` pairs.
pub fn cached_eise_table(alpha: f64, weight: WeightSpec) -> Result<Arc<EiseTable>> {
    static CACHE: OnceLock<Mutex<HashMap<EiseKey, Arc<EiseTable>>>> = OnceLock::new();
    let key = (
        alpha.to_bits(),
        weight.kappa_or_nu.to_bits(),
        weight.bar_alpha.map_or(0, f64::to_bits) ^ (weight.kind as u64),
    );
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&key) {
        return Ok(t.clone());
    }
    let table = Arc::new(EiseTable::new(alpha, weight)?);
    Ok(cache.lock().unwrap().entry(key).or_insert(table).clone())
}

/// EISE objective `Q(μ, σ, α) = ∫|Φ_n(t; μ, σ) − e^{−|t|^α}|² w(t) dt`
/// through its cosine-sum expansion.
pub struct EiseObjective<'a> {
    data: &'a [f64],
    weight: WeightSpec,
    transform: CosineTransform,
    diffs: Vec<f64>,
    pair_cache: Mutex<HashMap<u64, (f64, f64)>>,
}

impl<'a> EiseObjective<'a> {
    pub fn new(data: &'a [f64], weight: WeightSpec) -> Result<Self> {
        let mut diffs = Vec::with_capacity(data.len() * data.len().saturating_sub(1) / 2);
        for (j, &xj) in data.iter().enumerate() {
            for &xk in &data[j + 1..] {
                diffs.push(xj - xk);
            }
        }
        Ok(Self {
            data,
            weight,
            transform: CosineTransform::new(weight)?,
            diffs,
            pair_cache: Mutex::new(HashMap::new()),
        })
    }

    /// `(Σ_{j<k} C_w(d/σ), Σ_{j<k} C_w′(d/σ) d/σ)`, which depend on σ only.
    fn pair_sums(&self, sigma: f64) -> Result<(f64, f64)> {
        if let Some(v) = self.pair_cache.lock().unwrap().get(&sigma.to_bits()) {
            return Ok(*v);
        }
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for &d in &self.diffs {
            let c = d / sigma;
            let (v, dv) = self.transform.eval(c)?;
            s0 += v;
            s1 += dv * c;
        }
        self.pair_cache.lock().unwrap().insert(sigma.to_bits(), (s0, s1));
        Ok((s0, s1))
    }

    /// Q by the double-sum expansion.
    pub fn value(&self, params: &StableParams) -> Result<f64> {
        let table = EiseTable::new(params.alpha, self.weight)?;
        Ok(self.eval(&table, params.mu, params.sigma, false, false)?.value)
    }

    /// Q by direct quadrature of `|Φ_n − Φ|² w`.
    pub fn value_direct(&self, params: &StableParams) -> Result<f64> {
        params.validate()?;
        let n = self.data.len() as f64;
        let ys: Vec<f64> = self.data.iter().map(|x| (x - params.mu) / params.sigma).collect();
        let cfg = QuadConfig::new(1e-12, 1e-16);
        let r = integrate_semi_infinite(
            |t| {
                let (mut c, mut s) = (0.0, 0.0);
                for &y in &ys {
                    let (sn, cs) = (t * y).sin_cos();
                    c += cs;
                    s += sn;
                }
                let re = c / n - (-t.powf(params.alpha)).exp();
                let im = s / n;
                [(re * re + im * im) * self.weight.eval(t)]
            },
            1.0,
            &cfg,
        )?;
        Ok(2.0 * r.value[0])
    }
}

impl Criterion for EiseObjective<'_> {
    type Table = EiseTable;

    fn table(&self, alpha: f64, recurring: bool) -> Result<Arc<EiseTable>> {
        if recurring {
            cached_eise_table(alpha, self.weight)
        } else {
            Ok(Arc::new(EiseTable::new(alpha, self.weight)?))
        }
    }

    fn eval(&self, table: &EiseTable, mu: f64, sigma: f64, gradient: bool, alpha_derivative: bool) -> Result<CriterionEval> {
        let n = self.data.len() as f64;
        let (s0, s1) = self.pair_sums(sigma)?;
        let c0 = self.transform.eval(0.0)?.0;
        let mut m_sum = 0.0;
        let mut md_sum = 0.0;
        let mut myd_sum = 0.0;
        let mut ma_sum = 0.0;
        for &x in self.data {
            let y = (x - mu) / sigma;
            let [m, md, ma] = table.data_term(y)?;
            m_sum += m;
            md_sum += md;
            myd_sum += md * y;
            ma_sum += ma;
        }
        let mut e = CriterionEval {
            value: (n * c0 + 2.0 * s0) / (n * n) - 2.0 * m_sum / n + table.n_val,
            ..Default::default()
        };
        if gradient {
            e.d_mu = 2.0 * md_sum / (n * sigma);
            e.d_log_sigma = -2.0 * s1 / (n * n) + 2.0 * myd_sum / n;
            if alpha_derivative {
                e.d_alpha = -2.0 * ma_sum / n + table.n_der;
            }
        }
        Ok(e)
    }
}

/// Equivariant integrated squared error fit of `(μ, σ, α)`.
pub fn eise_fit(data: &[f64], weight: WeightSpec, opts: &FitOptions) -> Result<FitReport> {
    let obj = EiseObjective::new(data, weight)?;
    fit(&obj, data, None, opts)
}

/// EISE fit of `(μ, σ)` with α held at `alpha0`.
pub fn eise_fit_fixed_alpha(data: &[f64], alpha0: f64, weight: WeightSpec, opts: &FitOptions) -> Result<FitReport> {
    check_alpha(alpha0)?;
    let obj = EiseObjective::new(data, weight)?;
    fit(&obj, data, Some(alpha0), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a11_closed_form_cauchy() {
        let m = eise_matrices(1.0, WeightSpec::exp_abs(1.0).unwrap()).unwrap();
        assert!((m.a[0][0] - 4.0 / 27.0).abs() < 1e-10);
        assert!((m.a[1][1] - 4.0 / 27.0).abs() < 1e-10);
    }

    #[test]
    fn j_has_zero_block() {
        let m = eise_matrices(1.5, WeightSpec::exp_abs(1.0).unwrap()).unwrap();
        assert_eq!(m.j[0][1], 0.0);
        assert_eq!(m.j[0][2], 0.0);
        assert!((m.j[1][2] - m.j[2][1]).abs() < 1e-12 * m.j[1][1].abs());
        assert!(m.j_matrix().symmetric_eigenvalues().min() >= 0.0);
    }

    #[test]
    fn table_matches_direct() {
        let w = WeightSpec::exp_power(1.0, 1.5).unwrap();
        for &alpha in &[0.8, 1.5, 2.0] {
            let t = EiseTable::new(alpha, w).unwrap();
            for i in 0..120 {
                let y = -3.0 + 0.37 * i as f64;
                let a = t.data_term(y).unwrap();
                let d = m_direct(y.abs(), alpha, &w).unwrap();
                assert!((a[0] - d[0]).abs() < 1e-10, "α={alpha} y={y}");
                assert!((a[1] - y.signum() * d[1]).abs() < 1e-8, "α={alpha} y={y}");
                assert!((a[2] - d[2]).abs() < 1e-10, "α={alpha} y={y}");
            }
        }
    }
}
