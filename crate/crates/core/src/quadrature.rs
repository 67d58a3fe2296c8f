//! Adaptive Gauss-Kronrod (21-point) quadrature for vector-valued integrands.
//!
//! Every integral in this crate goes through [`integrate`] or
//! [`integrate_semi_infinite`]. Integrands return a fixed-size array so that
//! related quantities (a density and its derivatives, say) share one
//! subdivision of the interval.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes (10-point rule).
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances and limits for an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 2000,
        }
    }
}

impl QuadConfig {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }
}

/// Value and error estimate of a vector integral.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<const M: usize> {
    pub value: [f64; M],
    pub error: [f64; M],
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel<const M: usize> {
    a: f64,
    b: f64,
    value: [f64; M],
    error: [f64; M],
    l1: [f64; M],
    // Largest error relative to the per-component tolerance scale.
    priority: f64,
}

impl<const M: usize> PartialEq for Panel<M> {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl<const M: usize> Eq for Panel<M> {}
impl<const M: usize> PartialOrd for Panel<M> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const M: usize> Ord for Panel<M> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

/// One 21-point Kronrod panel: (value, error, L1 norm).
fn gk21<F, const M: usize>(f: &mut F, a: f64, b: f64) -> ([f64; M], [f64; M], [f64; M])
where
    F: FnMut(f64) -> [f64; M],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = [0.0; M];
    let mut res_g = [0.0; M];
    let mut res_abs = [0.0; M];
    let mut fv1 = [[0.0; M]; 10];
    let mut fv2 = [[0.0; M]; 10];
    for i in 0..M {
        res_k[i] = fc[i] * WGK[10];
        res_abs[i] = (fc[i] * WGK[10]).abs();
    }
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for i in 0..M {
            res_k[i] += WGK[j] * (f1[i] + f2[i]);
            res_abs[i] += WGK[j] * (f1[i].abs() + f2[i].abs());
            if j % 2 == 1 {
                res_g[i] += WG[j / 2] * (f1[i] + f2[i]);
            }
        }
        fv1[j] = f1;
        fv2[j] = f2;
    }
    let mut value = [0.0; M];
    let mut error = [0.0; M];
    let mut l1 = [0.0; M];
    for i in 0..M {
        let mean = 0.5 * res_k[i];
        let mut res_asc = WGK[10] * (fc[i] - mean).abs();
        for j in 0..10 {
            res_asc += WGK[j] * ((fv1[j][i] - mean).abs() + (fv2[j][i] - mean).abs());
        }
        value[i] = res_k[i] * half;
        l1[i] = res_abs[i] * half.abs();
        error[i] = rescale_error(
            (res_k[i] - res_g[i]) * half,
            res_abs[i] * half.abs(),
            res_asc * half.abs(),
        );
    }
    (value, error, l1)
}

/// Integrates a vector-valued `f` over the finite interval `[a, b]`.
///
/// Converges when, for every component, the summed error estimate is below
/// `max(abs_tol, rel_tol * |value|)`, or below the roundoff floor implied by
/// the integrand's L1 norm.
pub fn integrate<F, const M: usize>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult<M>>
where
    F: FnMut(f64) -> [f64; M],
{
    if a == b {
        return Ok(QuadResult {
            value: [0.0; M],
            error: [0.0; M],
            evaluations: 0,
        });
    }
    let mut heap: BinaryHeap<Panel<M>> = BinaryHeap::new();
    let (v, e, l) = gk21(&mut f, a, b);
    let mut evaluations = 21;
    heap.push(Panel {
        a,
        b,
        value: v,
        error: e,
        l1: l,
        priority: f64::INFINITY,
    });
    let mut total = v;
    let mut total_err = e;
    let mut total_l1 = l;
    let mut subdivisions = 1;

    loop {
        let mut done = true;
        let mut scales = [0.0; M];
        for i in 0..M {
            let tol = cfg.abs_tol.max(cfg.rel_tol * total[i].abs());
            let floor = 1000.0 * f64::EPSILON * total_l1[i];
            scales[i] = tol.max(floor);
            if total_err[i] > scales[i] {
                done = false;
            }
        }
        if done {
            return Ok(QuadResult {
                value: total,
                error: total_err,
                evaluations,
            });
        }
        if subdivisions >= cfg.max_subdivisions {
            let worst = (0..M)
                .map(|i| total_err[i] / scales[i].max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            return Err(Error::Quadrature {
                a,
                b,
                estimate: total[0],
                error: total_err.iter().cloned().fold(0.0, f64::max),
                detail: format!("tolerance missed by factor {worst:.2e} after {subdivisions} subdivisions"),
            });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval can no longer be split in floating point; accept as is.
            let mut frozen = worst;
            frozen.priority = f64::NEG_INFINITY;
            heap.push(frozen);
            // Make sure we don't spin: if everything left is frozen, stop.
            if heap.iter().all(|p| p.priority == f64::NEG_INFINITY) {
                return Ok(QuadResult {
                    value: total,
                    error: total_err,
                    evaluations,
                });
            }
            continue;
        }
        let (v1, e1, l1) = gk21(&mut f, worst.a, mid);
        let (v2, e2, l2) = gk21(&mut f, mid, worst.b);
        evaluations += 42;
        subdivisions += 1;
        for i in 0..M {
            total[i] += v1[i] + v2[i] - worst.value[i];
            total_err[i] += e1[i] + e2[i] - worst.error[i];
            total_l1[i] += l1[i] + l2[i] - worst.l1[i];
        }
        for (lo, hi, v, e, l) in [(worst.a, mid, v1, e1, l1), (mid, worst.b, v2, e2, l2)] {
            let priority = (0..M)
                .map(|i| e[i] / scales[i].max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            heap.push(Panel {
                a: lo,
                b: hi,
                value: v,
                error: e,
                l1: l,
                priority,
            });
        }
        // Recompute sums from scratch now and then to shed accumulated drift.
        if subdivisions % 64 == 0 {
            total = [0.0; M];
            total_err = [0.0; M];
            total_l1 = [0.0; M];
            for p in heap.iter() {
                for i in 0..M {
                    total[i] += p.value[i];
                    total_err[i] += p.error[i];
                    total_l1[i] += p.l1[i];
                }
            }
        }
    }
}

/// Integrates `f` over `[0, ∞)` through the map `s = scale * (1 - τ) / τ`.
///
/// `scale` should be of the order of the integrand's decay length.
pub fn integrate_semi_infinite<F, const M: usize>(
    mut f: F,
    scale: f64,
    cfg: &QuadConfig,
) -> Result<QuadResult<M>>
where
    F: FnMut(f64) -> [f64; M],
{
    integrate(
        |tau| {
            let s = scale * (1.0 - tau) / tau;
            let jac = scale / (tau * tau);
            let mut v = f(s);
            for x in v.iter_mut() {
                *x *= jac;
            }
            // s = inf at tau = 0 exactly; the rule never evaluates there but
            // huge s can still produce inf * 0.
            for x in v.iter_mut() {
                if !x.is_finite() {
                    *x = 0.0;
                }
            }
            v
        },
        0.0,
        1.0,
        cfg,
    )
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate(|x| [f(x)], a, b, cfg).map(|r| r.value[0])
}

/// Scalar convenience wrapper around [`integrate_semi_infinite`].
pub fn integrate_semi_infinite_scalar<F>(mut f: F, scale: f64, cfg: &QuadConfig) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate_semi_infinite(|x| [f(x)], scale, cfg).map(|r| r.value[0])
}

/// [`integrate`] for an integrand that can fail; the first failure aborts
/// the integration and is returned.
pub fn try_integrate<F, const M: usize>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult<M>>
where
    F: FnMut(f64) -> Result<[f64; M]>,
{
    let mut failure = None;
    let r = integrate(
        |x| {
            if failure.is_some() {
                return [0.0; M];
            }
            match f(x) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    [0.0; M]
                }
            }
        },
        a,
        b,
        cfg,
    );
    match failure {
        Some(e) => Err(e),
        None => r,
    }
}

/// [`integrate_semi_infinite`] for an integrand that can fail.
pub fn try_integrate_semi_infinite<F, const M: usize>(mut f: F, scale: f64, cfg: &QuadConfig) -> Result<QuadResult<M>>
where
    F: FnMut(f64) -> Result<[f64; M]>,
{
    let mut failure = None;
    let r = integrate_semi_infinite(
        |x| {
            if failure.is_some() {
                return [0.0; M];
            }
            match f(x) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    [0.0; M]
                }
            }
        },
        scale,
        cfg,
    );
    match failure {
        Some(e) => Err(e),
        None => r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate_scalar(|x| x * x * x - 2.0 * x, -1.0, 2.0, &QuadConfig::default()).unwrap();
        // [x^4/4 - x^2] from -1 to 2 = (4 - 4) - (1/4 - 1)
        assert!((r - 0.75).abs() < 1e-14);
    }

    #[test]
    fn oscillatory_finite() {
        let cfg = QuadConfig::new(1e-12, 1e-15);
        let r = integrate_scalar(|x| (50.0 * x).cos(), 0.0, 3.0, &cfg).unwrap();
        assert!((r - (150.0f64).sin() / 50.0).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let cfg = QuadConfig::new(1e-10, 1e-14);
        let r = integrate_scalar(|x| 1.0 / x.sqrt(), 0.0, 1.0, &cfg).unwrap();
        assert!((r - 2.0).abs() < 1e-8);
    }

    #[test]
    fn semi_infinite_gamma() {
        // ∫_0^∞ t^2 e^{-3t} dt = 2/27
        let cfg = QuadConfig::new(1e-12, 1e-16);
        let r = integrate_semi_infinite_scalar(|t| t * t * (-3.0 * t).exp(), 1.0, &cfg).unwrap();
        assert!((r - 2.0 / 27.0).abs() < 1e-14);
    }

    #[test]
    fn vector_components_share_panels() {
        let cfg = QuadConfig::default();
        let r = integrate(|x| [x.sin(), x.cos(), 1.0], 0.0, std::f64::consts::PI, &cfg).unwrap();
        assert!((r.value[0] - 2.0).abs() < 1e-12);
        assert!(r.value[1].abs() < 1e-12);
        assert!((r.value[2] - std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn reports_failure_when_budget_exhausted() {
        let cfg = QuadConfig {
            rel_tol: 1e-14,
            abs_tol: 0.0,
            max_subdivisions: 3,
        };
        let r = integrate_scalar(|x| (1.0 / (x + 1e-9)).sin(), 0.0, 1.0, &cfg);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
