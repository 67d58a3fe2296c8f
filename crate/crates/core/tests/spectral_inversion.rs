use stable_gof::inversion::{cdf_dk, pdf_dk, quantile_dk, InversionConfig};
use stable_gof::kernels::{Kernel, KernelKind, KernelSpec};
use stable_gof::spectral::{compute_spectrum, diagonal_integral, discretize, fredholm_det, Spectrum};

fn spectrum(kind: KernelKind, alpha: f64, kappa: f64, n: usize) -> Spectrum {
    compute_spectrum(KernelSpec::new(kind, alpha, kappa, None).unwrap(), n).unwrap()
}

#[test]
fn discretized_kernel_symmetric_and_small_near_origin() {
    let k = Kernel::new(KernelSpec::mle_h1(1.5, 2.5).unwrap()).unwrap();
    let (m, grid) = discretize(&k, 200).unwrap();
    assert_eq!((&m - m.transpose()).amax(), 0.0);
    // the kernel vanishes on u = 0; the two central nodes sit 1/N away
    let scale = m.amax();
    for i in [99, 100] {
        assert!(grid[i].abs() < 0.01);
        assert!(m.row(i).amax() < 0.1 * scale, "{}", m.row(i).amax());
    }
}

#[test]
fn matrix_trace_matches_diagonal_integral() {
    let k = Kernel::new(KernelSpec::mle_h1(1.5, 2.5).unwrap()).unwrap();
    let (m, _) = discretize(&k, 200).unwrap();
    let trace = m.trace() * 2.0 / 200.0;
    let exact = diagonal_integral(&k).unwrap();
    assert!((trace / exact - 1.0).abs() < 0.01, "{trace} vs {exact}");
}

#[test]
fn refinement_moves_leading_eigenvalues_little() {
    let a = spectrum(KernelKind::MleH1, 1.0, 1.0, 400);
    let b = spectrum(KernelKind::MleH1, 1.0, 1.0, 800);
    assert!((a.lambdas[0] / b.lambdas[0] - 1.0).abs() < 0.003);
    for j in 0..10 {
        assert!((a.lambdas[j] / b.lambdas[j] - 1.0).abs() < 0.01, "λ_{j}: {} vs {}", a.lambdas[j], b.lambdas[j]);
    }
}

#[test]
fn simple_eigenvalues_away_from_cauchy() {
    let s = spectrum(KernelKind::MleH1, 1.5, 2.5, 400);
    for w in s.lambdas[..20].windows(2) {
        assert!(w[1] - w[0] > 1e-8 * w[1], "{w:?}");
    }
}

#[test]
fn determinant_changes_sign_at_each_eigenvalue() {
    let s = spectrum(KernelKind::MleH2, 1.5, 2.5, 200);
    for j in 0..6 {
        let mid = 0.5 * (s.lambdas[j] + s.lambdas[j + 1]);
        let expect = if j % 2 == 0 { -1.0 } else { 1.0 };
        assert_eq!(fredholm_det(mid, &s, 40).signum(), expect, "between λ_{} and λ_{}", j + 1, j + 2);
    }
}

#[test]
fn distribution_function_is_monotone_with_limit_one() {
    let s = spectrum(KernelKind::MleH1, 1.5, 2.5, 400);
    let cfg = InversionConfig::for_spectrum(&s);
    let mean = s.mean();
    let mut prev = 0.0;
    for i in 1..=40 {
        let f = cdf_dk(mean * i as f64 / 2.0, &s, &cfg).unwrap();
        assert!(f > prev, "step {i}: {f} ≤ {prev}");
        prev = f;
    }
    assert!(prev > 1.0 - 1e-6);
}

#[test]
fn distribution_function_at_table_points() {
    let s = spectrum(KernelKind::MleH1, 1.0, 1.0, 800);
    let f = cdf_dk(0.988, &s, &InversionConfig::for_spectrum(&s)).unwrap();
    assert!((f - 0.90).abs() < 0.005, "{f}");
    let s = spectrum(KernelKind::MleH2, 1.5, 2.5, 800);
    let f = cdf_dk(0.1697, &s, &InversionConfig::for_spectrum(&s)).unwrap();
    assert!((f - 0.95).abs() < 0.005, "{f}");
}

#[test]
fn density_consistent_with_distribution_function() {
    let s = spectrum(KernelKind::MleH2, 1.5, 2.5, 400);
    let cfg = InversionConfig::for_spectrum(&s);
    let mean = s.mean();
    // finite differences and nonnegativity on a grid
    for i in 1..=10 {
        let x = mean * i as f64 / 4.0;
        let h = 1e-4 * x;
        let fd = (cdf_dk(x + h, &s, &cfg).unwrap() - cdf_dk(x - h, &s, &cfg).unwrap()) / (2.0 * h);
        let p = pdf_dk(x, &s, &cfg).unwrap();
        assert!(p >= -1e-6);
        assert!((fd - p).abs() < 1e-3 * p.max(1.0), "x={x}: {fd} vs {p}");
    }
    // ∫ pdf over [0.01, x_max] by Simpson's rule
    let (a, b) = (0.01, 4.0 * mean);
    let k = 400;
    let h = (b - a) / k as f64;
    let mut int = 0.0;
    for i in 0..=k {
        let w = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        int += w * pdf_dk(a + i as f64 * h, &s, &cfg).unwrap();
    }
    int *= h / 3.0;
    let diff = cdf_dk(b, &s, &cfg).unwrap() - cdf_dk(a, &s, &cfg).unwrap();
    assert!((int - diff).abs() < 1e-3, "{int} vs {diff}");
}

#[test]
fn heavy_tail_quantile() {
    let s = spectrum(KernelKind::MleH1, 0.5, 1.0, 800);
    let q = quantile_dk(0.05, &s, &InversionConfig::for_spectrum(&s)).unwrap();
    assert!((q / 1.609 - 1.0).abs() < 0.02, "{q}");
}

#[test]
fn quantiles_stable_in_m() {
    for (kind, alpha, kappa) in [(KernelKind::MleH1, 1.5, 1.0), (KernelKind::MleH2, 1.8, 5.0)] {
        let s = spectrum(kind, alpha, kappa, 800);
        let mut cfg = InversionConfig::for_spectrum(&s);
        let a = quantile_dk(0.1, &s, &cfg).unwrap();
        cfg.m = cfg.m.min(300);
        let b = quantile_dk(0.1, &s, &cfg).unwrap();
        assert!((a / b - 1.0).abs() < 0.005, "{kind}: {a} vs {b}");
    }
}
