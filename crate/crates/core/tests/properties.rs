mod common;

#[test]
fn cf_modulus_and_conjugacy() {
    common::cf_modulus_conjugacy().unwrap();
}

#[test]
fn density_normalization_and_symmetry() {
    common::density_normalization_symmetry().unwrap();
}

#[test]
fn tail_series_agrees_with_inversion() {
    common::tail_series_vs_inversion().unwrap();
}

#[test]
fn kernels_symmetric_and_psd() {
    common::kernel_symmetry_psd().unwrap();
}

#[test]
fn series_bound_brackets_distribution_function() {
    common::alternating_series_bracketing().unwrap();
}

#[test]
fn quantile_round_trip() {
    common::quantile_round_trip().unwrap();
}

#[test]
fn mle_affine_equivariance() {
    common::mle_affine_equivariance().unwrap();
}

#[test]
fn eise_affine_equivariance() {
    common::eise_affine_equivariance().unwrap();
}

#[test]
fn q_expansion_matches_quadrature() {
    common::two_path_q().unwrap();
}

#[test]
fn d_expansion_matches_quadrature() {
    common::two_path_d().unwrap();
}
