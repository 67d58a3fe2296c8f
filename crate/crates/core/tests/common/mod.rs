//! Property suites shared by the `properties` and `acceptance` targets.
//!
//! Each suite runs a seeded proptest runner so results are reproducible.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stable_gof::ecf::{test_statistic, test_statistic_direct, Hypothesis};
use stable_gof::estimators::{eise_fit, mle_fit, EiseObjective, FitOptions, WeightSpec};
use stable_gof::inversion::{cdf_dk, cdf_dk_bounded, quantile_dk, InversionConfig};
use stable_gof::kernels::{Kernel, KernelKind, KernelSpec};
use stable_gof::quadrature::{integrate_scalar, QuadConfig};
use stable_gof::spectral::{compute_spectrum, Spectrum};
use stable_gof::stable::{cf, pdf, pdf_inversion, pdf_tail_series, rand_stable, upper_tail_series};
use stable_gof::StableParams;

pub type SuiteResult = Result<(), String>;

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> SuiteResult
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn stable_sample(alpha: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rand_stable(alpha, &mut rng)).collect()
}

/// `|φ(t)| ≤ 1`, `φ(0) = 1` and `φ(−t) = conj φ(t)`.
pub fn cf_modulus_conjugacy() -> SuiteResult {
    let s = (-5.0..5.0f64, 0.1..5.0f64, 0.1..=2.0f64, -50.0..50.0f64);
    run(512, s, |(mu, sigma, alpha, t)| {
        let p = StableParams::new(mu, sigma, alpha).unwrap();
        let z = cf(t, &p);
        prop_assert!(z.norm() <= 1.0 + 1e-15);
        prop_assert!((cf(-t, &p) - z.conj()).norm() < 1e-15);
        prop_assert_eq!(cf(0.0, &p).re, 1.0);
        Ok(())
    })
}

/// `∫ f = 1`, `f(−x) = f(x)` and `f′(−x) = −f′(x)`.
pub fn density_normalization_symmetry() -> SuiteResult {
    run(10, (0.5..1.95f64, 0.0..15.0f64), |(alpha, x)| {
        let d = pdf(x, alpha).unwrap();
        let m = pdf(-x, alpha).unwrap();
        prop_assert!(rel(m.f, d.f) < 1e-12);
        prop_assert!((m.fprime + d.fprime).abs() < 1e-12 * d.fprime.abs().max(1e-12));
        // mass on [0, 30] by quadrature plus the tail series beyond
        let cfg = QuadConfig::new(1e-10, 1e-14);
        let body = integrate_scalar(|y| pdf(y, alpha).unwrap().f, 0.0, 30.0, &cfg).unwrap();
        let tail = upper_tail_series(30.0, alpha).unwrap();
        let total = 2.0 * (body + tail);
        prop_assert!((total - 1.0).abs() < 1e-7, "α={}: total mass {}", alpha, total);
        Ok(())
    })
}

/// The large-|x| series and Fourier inversion agree where both apply.
pub fn tail_series_vs_inversion() -> SuiteResult {
    run(64, (0.3..1.8f64, 40.0..400.0f64, prop::bool::ANY), |(alpha, x, neg)| {
        let x = if neg { -x } else { x };
        let s = pdf_tail_series(x, alpha).unwrap();
        let i = pdf_inversion(x, alpha).unwrap();
        prop_assert!(rel(s.f, i.f) < 1e-7, "α={} x={}: {} vs {}", alpha, x, s.f, i.f);
        prop_assert!(rel(s.fprime, i.fprime) < 1e-6, "α={} x={}: f′ {} vs {}", alpha, x, s.fprime, i.fprime);
        Ok(())
    })
}

/// Every kernel kind over the acceptance grid.
pub fn kernel_grid() -> Vec<KernelSpec> {
    let mut specs = Vec::new();
    for &kappa in &[1.0, 2.5, 5.0, 10.0] {
        for &alpha in &[1.0, 1.5, 1.8] {
            let w = WeightSpec::exp_abs(1.0).unwrap();
            specs.push(KernelSpec::new(KernelKind::MleH1, alpha, kappa, None).unwrap());
            specs.push(KernelSpec::new(KernelKind::MleH2, alpha, kappa, None).unwrap());
            specs.push(KernelSpec::new(KernelKind::EfficientGeneral, alpha, kappa, None).unwrap());
            specs.push(KernelSpec::new(KernelKind::EiseH1, alpha, kappa, Some(w)).unwrap());
            specs.push(KernelSpec::new(KernelKind::EiseFixed, alpha, kappa, Some(w)).unwrap());
        }
        specs.push(KernelSpec::new(KernelKind::MleH2, 2.0, kappa, None).unwrap());
        specs.push(KernelSpec::cauchy_mle(kappa).unwrap());
        let w = WeightSpec::exp_power(1.0, 1.5).unwrap();
        specs.push(KernelSpec::new(KernelKind::EiseH1, 1.5, kappa, Some(w)).unwrap());
    }
    specs
}

/// `K(u, v) = K(v, u)` and the Gram matrix on 60 random interior nodes has
/// no eigenvalue below `−1e−7` times the largest.
pub fn kernel_symmetry_psd() -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    for spec in kernel_grid() {
        let k = Kernel::new(spec).map_err(|e| e.to_string())?;
        let nodes: Vec<f64> = (0..60).map(|_| rng.random_range(-0.999..0.999)).collect();
        let mut g = DMatrix::zeros(60, 60);
        for i in 0..60 {
            for j in 0..60 {
                g[(i, j)] = k.transformed(nodes[i], nodes[j]).map_err(|e| e.to_string())?;
            }
        }
        let asym = (&g - g.transpose()).amax();
        if asym > 1e-12 * g.amax() {
            return Err(format!("{} α={} κ={}: asymmetry {asym:e}", spec.kind, spec.alpha, spec.kappa));
        }
        let eig = SymmetricEigen::new(g).eigenvalues;
        let (min, max) = (eig.min(), eig.max());
        if min < -1e-7 * max {
            return Err(format!("{} α={} κ={}: eigenvalue {min:e} vs max {max:e}", spec.kind, spec.alpha, spec.kappa));
        }
    }
    Ok(())
}

fn small_spectrum(kind: KernelKind, alpha: f64, kappa: f64) -> Spectrum {
    compute_spectrum(KernelSpec::new(kind, alpha, kappa, None).unwrap(), 200).unwrap()
}

/// With few terms, the reported value ± bound contains the distribution
/// function computed with many terms.
pub fn alternating_series_bracketing() -> SuiteResult {
    let spectra = [small_spectrum(KernelKind::MleH2, 1.5, 2.5), small_spectrum(KernelKind::MleH1, 1.0, 1.0)];
    run(24, (0usize..2, 1usize..6, 0.2..3.0f64), |(which, l, scale)| {
        let s = &spectra[which];
        let x = scale * s.mean();
        let reference = cdf_dk(x, s, &InversionConfig { l: 25, m: 150, quad_rel_tol: 1e-9 }).unwrap();
        let v = cdf_dk_bounded(x, s, &InversionConfig { l, m: 150, quad_rel_tol: 1e-9 }).unwrap();
        prop_assert!(
            (v.value - reference).abs() <= v.bound + 1e-8,
            "l={} x={}: {} ± {} vs {}",
            l,
            x,
            v.value,
            v.bound,
            reference
        );
        Ok(())
    })
}

/// `F(quantile(ξ)) = 1 − ξ`.
pub fn quantile_round_trip() -> SuiteResult {
    let spectra = [
        small_spectrum(KernelKind::MleH1, 1.5, 1.0),
        small_spectrum(KernelKind::MleH2, 1.8, 5.0),
        small_spectrum(KernelKind::MleH2, 2.0, 10.0),
    ];
    run(24, (0usize..3, 0.01..0.45f64), |(which, xi)| {
        let s = &spectra[which];
        let cfg = InversionConfig::for_spectrum(s);
        let q = quantile_dk(xi, s, &cfg).unwrap();
        let f = cdf_dk(q, s, &cfg).unwrap();
        prop_assert!((f - (1.0 - xi)).abs() < 1e-8, "ξ={}: F(q)={}", xi, f);
        Ok(())
    })
}

fn check_equivariance(a: &StableParams, b: &StableParams, shift: f64, factor: f64) -> Result<(), TestCaseError> {
    prop_assert!((b.alpha - a.alpha).abs() < 1e-6, "α {} vs {}", a.alpha, b.alpha);
    prop_assert!(rel(b.sigma, factor.abs() * a.sigma) < 1e-6, "σ {} vs {}", b.sigma, a.sigma);
    let mu = shift + factor * a.mu;
    prop_assert!((b.mu - mu).abs() < 1e-6 * b.sigma, "μ {} vs {}", b.mu, mu);
    Ok(())
}

fn affine_strategy() -> impl Strategy<Value = (f64, u64, f64, f64)> {
    let factor = prop_oneof![-20.0..-0.05f64, 0.05..20.0f64];
    (1.1..1.9f64, any::<u64>(), -100.0..100.0f64, factor)
}

/// Fitting `a + b x` gives `(a + bμ̂, |b|σ̂, α̂)`, by maximum likelihood.
pub fn mle_affine_equivariance() -> SuiteResult {
    let opts = FitOptions::default();
    run(6, affine_strategy(), |(alpha, seed, shift, factor)| {
        let x = stable_sample(alpha, 100, seed);
        let y: Vec<f64> = x.iter().map(|v| shift + factor * v).collect();
        let a = mle_fit(&x, &opts).unwrap().params;
        let b = mle_fit(&y, &opts).unwrap().params;
        check_equivariance(&a, &b, shift, factor)
    })
}

/// The same for the EISE estimator.
pub fn eise_affine_equivariance() -> SuiteResult {
    let opts = FitOptions::default();
    let w = WeightSpec::exp_abs(1.0).unwrap();
    run(4, affine_strategy(), |(alpha, seed, shift, factor)| {
        let x = stable_sample(alpha, 60, seed);
        let y: Vec<f64> = x.iter().map(|v| shift + factor * v).collect();
        let a = eise_fit(&x, w, &opts).unwrap().params;
        let b = eise_fit(&y, w, &opts).unwrap().params;
        check_equivariance(&a, &b, shift, factor)
    })
}

// The quadrature paths integrate cos(t y_j) over a long range; keep the
// standardized data moderate so the oracle itself converges.
fn resolvable(x: &[f64], mu: f64, sigma: f64) -> bool {
    x.iter().all(|v| ((v - mu) / sigma).abs() < 40.0)
}

/// The EISE criterion Q by its double-sum expansion and by direct
/// quadrature.
pub fn two_path_q() -> SuiteResult {
    let weight = prop_oneof![
        (0.5..5.0f64).prop_map(|nu| WeightSpec::exp_abs(nu).unwrap()),
        (0.5..5.0f64, 1.0..2.0f64).prop_map(|(nu, a)| WeightSpec::exp_power(nu, a).unwrap()),
    ];
    run(16, (1.0..2.0f64, any::<u64>(), -1.0..1.0f64, 0.5..2.0f64, weight), |(alpha, seed, mu, sigma, w)| {
        let x = stable_sample(alpha, 40, seed);
        prop_assume!(resolvable(&x, mu, sigma));
        let q = EiseObjective::new(&x, w).unwrap();
        let p = StableParams::new(mu, sigma, alpha).unwrap();
        let (a, b) = (q.value(&p).unwrap(), q.value_direct(&p).unwrap());
        prop_assert!(rel(a, b) < 1e-7, "{} vs {}", a, b);
        Ok(())
    })
}

/// `D_{n,κ}` by its closed-form expansion and by direct quadrature.
pub fn two_path_d() -> SuiteResult {
    run(24, (1.0..=2.0f64, any::<u64>(), 0.5..10.0f64, -1.0..1.0f64, 0.5..2.0f64), |(alpha, seed, kappa, mu, sigma)| {
        let x = stable_sample(alpha, 50, seed);
        prop_assume!(resolvable(&x, mu, sigma));
        let p = StableParams::new(mu, sigma, alpha).unwrap();
        let a = test_statistic(&x, &p, kappa, Hypothesis::H1).unwrap().statistic;
        let b = test_statistic_direct(&x, &p, kappa).unwrap();
        prop_assert!((a - b).abs() < 1e-8 * b.max(1e-3), "{} vs {}", a, b);
        Ok(())
    })
}

pub type Suite = (&'static str, fn() -> SuiteResult);

pub const SUITES: [Suite; 10] = [
    ("cf modulus and conjugacy", cf_modulus_conjugacy),
    ("density normalization and symmetry", density_normalization_symmetry),
    ("tail series vs inversion", tail_series_vs_inversion),
    ("kernel symmetry and Gram PSD", kernel_symmetry_psd),
    ("alternating-series bracketing", alternating_series_bracketing),
    ("quantile round trip", quantile_round_trip),
    ("MLE affine equivariance", mle_affine_equivariance),
    ("EISE affine equivariance", eise_affine_equivariance),
    ("two-path Q", two_path_q),
    ("two-path D", two_path_d),
];
