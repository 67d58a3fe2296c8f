//! Quadrature (Nyström) eigenvalues of a transformed kernel and the
//! Fredholm determinant built from them.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelSpec};
use crate::quadrature::{try_integrate_semi_infinite, QuadConfig};

/// Matrix eigenvalues below this fraction of the largest are dropped.
pub const EIGEN_CUTOFF: f64 = 1e-13;

pub const DEFAULT_NODES: usize = 800;

/// Operator eigenvalues `λ̃_1 ≤ λ̃_2 ≤ …` of a discretized kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub lambdas: Vec<f64>,
    pub n: usize,
    pub grid: Vec<f64>,
    pub kernel: KernelSpec,
    /// Matrix eigenvalues discarded as non-positive or below the cutoff.
    pub discarded: usize,
}

/// Midpoint nodes `ξ_i = −1 + (2i − 1)/N`.
pub fn midpoint_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| -1.0 + (2 * i - 1) as f64 / n as f64).collect()
}

/// `K̃_ij = K(ξ_i, ξ_j)` on the midpoint grid.
pub fn discretize(kernel: &Kernel, n: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if n < 16 || n % 2 == 1 {
        return Err(Error::InvalidParameter(format!("node count must be even and at least 16, got {n}")));
    }
    let grid = midpoint_grid(n);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| kernel.transformed(grid[i], grid[j])).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            m[(i, i + k)] = v;
            m[(i + k, i)] = v;
        }
    }
    Ok((m, grid))
}

/// Eigenvalues of the operator from the matrix `K̃` (weight 2/N).
pub fn eigen_spectrum(matrix: DMatrix<f64>, grid: Vec<f64>, kernel: KernelSpec) -> Result<Spectrum> {
    let n = matrix.nrows();
    if matrix.ncols() != n || grid.len() != n {
        return Err(Error::InvalidParameter("matrix and grid sizes differ".into()));
    }
    let scaled = matrix * (2.0 / n as f64);
    let eig = SymmetricEigen::try_new(scaled, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen(format!("symmetric eigensolver did not converge for N={n}")))?;
    let nu = eig.eigenvalues;
    if nu.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    let max = nu.max();
    if !(max > 0.0) {
        return Err(Error::Eigen("kernel has no positive eigenvalue".into()));
    }
    let kept: Vec<f64> = nu.iter().copied().filter(|&v| v > EIGEN_CUTOFF * max).collect();
    let discarded = n - kept.len();
    let mut lambdas: Vec<f64> = kept.iter().map(|v| 1.0 / v).collect();
    lambdas.sort_by(f64::total_cmp);
    Ok(Spectrum {
        lambdas,
        n,
        grid,
        kernel,
        discarded,
    })
}

/// Discretizes `spec` with `n` midpoint nodes and solves for its spectrum.
pub fn compute_spectrum(spec: KernelSpec, n: usize) -> Result<Spectrum> {
    let kernel = Kernel::new(spec)?;
    let (m, grid) = discretize(&kernel, n)?;
    eigen_spectrum(m, grid, spec)
}

/// `Π_{j ≤ m} (1 − λ/λ̃_j)`.
pub fn fredholm_det(lambda: f64, spectrum: &Spectrum, m: usize) -> f64 {
    spectrum.lambdas.iter().take(m).map(|l| 1.0 - lambda / l).product()
}

/// `∫ Γ(t, t) e^{−κ|t|} dt = ∫_{−1}^{1} K(u, u) du`, the mean of the
/// limiting statistic.
pub fn diagonal_integral(kernel: &Kernel) -> Result<f64> {
    let kappa = kernel.spec().kappa;
    let r = try_integrate_semi_infinite(|t| Ok([kernel.gamma(t, t)? * (-kappa * t).exp()]), 1.0 / kappa, &QuadConfig::new(1e-10, 1e-14))?;
    Ok(2.0 * r.value[0])
}

impl Spectrum {
    /// `Σ 1/λ̃_j` over the retained eigenvalues.
    pub fn mean(&self) -> f64 {
        self.lambdas.iter().map(|l| 1.0 / l).sum()
    }

    /// `|Σ 1/λ̃_j − ∫K(u,u)du| / ∫K(u,u)du`.
    pub fn trace_error(&self) -> Result<f64> {
        let exact = diagonal_integral(&Kernel::new(self.kernel)?)?;
        Ok((self.mean() - exact).abs() / exact)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Parse(format!("cannot serialize spectrum: {e}")))?;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}
