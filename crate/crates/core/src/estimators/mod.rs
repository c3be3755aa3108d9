//! Covariance-type surfaces on a grid and their spectral decomposition.
//!
//! Three estimators produce a [`CovarianceSurface`]:
//!
//! * [`sample_covariance`], the classical unbiased covariance;
//! * [`pass_covariance`], the pairwise spatial sign U-statistic;
//! * [`mspc`] (via [`spherical_covariance`]), the comparator built from
//!   sign-normalised deviations about the spatial median.
//!
//! [`eigendecompose`] turns any of them into an [`EigenSystem`] on the
//! operator scale: matrix eigenvalues are multiplied by the grid spacing and
//! eigenvectors are rescaled to unit quadrature norm.

mod median;
mod pass;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{FpcaError, Result};
use crate::fgrid::{FunctionalSample, Grid};

pub use median::{mspc, spatial_median, spherical_covariance, MEDIAN_MAX_ITER, MEDIAN_TOL};
pub use pass::pass_covariance;

/// Absolute symmetry tolerance, scaled by `max(1, max |entry|)`.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CovarianceKind {
    Classical,
    Pass,
    /// Covariance of spatial signs about the spatial median (MSPC).
    Spherical,
}

/// Discretised symmetric surface `C(t_j, t_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSurface {
    pub grid: Grid,
    pub matrix: DMatrix<f64>,
    pub kind: CovarianceKind,
    /// Diagonal cells are excluded from any subsequent fit.
    pub diagonal_removed: bool,
}

impl CovarianceSurface {
    pub fn new(grid: Grid, matrix: DMatrix<f64>, kind: CovarianceKind) -> Result<Self> {
        let n = grid.n_points();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(FpcaError::Dimension {
                expected: n,
                actual: if matrix.nrows() != n {
                    matrix.nrows()
                } else {
                    matrix.ncols()
                },
            });
        }
        Ok(Self {
            grid,
            matrix,
            kind,
            diagonal_removed: false,
        })
    }

    /// `Δ · trace`, the sum of operator eigenvalues.
    pub fn operator_trace(&self) -> f64 {
        self.matrix.trace() * self.grid.spacing()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let m = &self.matrix;
        let mut worst = 0.0f64;
        for j in 0..m.ncols() {
            for i in 0..j {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        worst
    }
}

/// Leading eigenpairs of a surface.
///
/// `eigenvalues` are on the operator scale and sorted nonincreasing;
/// column `l` of `eigenfunctions` has unit quadrature norm and its
/// largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub grid: Grid,
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: DMatrix<f64>,
}

impl EigenSystem {
    pub fn q(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenfunction(&self, l: usize) -> Vec<f64> {
        crate::fgrid::column(&self.eigenfunctions, l)
    }
}

/// Pointwise mean across curves.
pub fn mean_function(sample: &FunctionalSample) -> Vec<f64> {
    let values = sample.values();
    let n = values.nrows() as f64;
    (0..values.ncols())
        .map(|j| values.column(j).iter().sum::<f64>() / n)
        .collect()
}

/// Unbiased sample covariance `(n-1)^{-1} Σ_i (x_i - x̄)(x_i - x̄)ᵀ`.
pub fn sample_covariance(sample: &FunctionalSample) -> Result<CovarianceSurface> {
    let n = sample.n_curves();
    if n < 2 {
        return Err(FpcaError::InsufficientSample { needed: 2, got: n });
    }
    let mean = mean_function(sample);
    let n_points = sample.n_points();
    let values = sample.values();
    // Centered rows kept contiguous for the inner loop.
    let centered: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n_points).map(|j| values[(i, j)] - mean[j]).collect())
        .collect();
    let denom = (n - 1) as f64;
    let mut matrix = DMatrix::zeros(n_points, n_points);
    for j in 0..n_points {
        for k in j..n_points {
            let mut acc = 0.0;
            for row in &centered {
                acc += row[j] * row[k];
            }
            let v = acc / denom;
            matrix[(j, k)] = v;
            matrix[(k, j)] = v;
        }
    }
    CovarianceSurface::new(sample.grid().clone(), matrix, CovarianceKind::Classical)
}

/// Top-`q` eigenpairs of `surface` on the operator scale.
pub fn eigendecompose(surface: &CovarianceSurface, q: usize) -> Result<EigenSystem> {
    let n_points = surface.grid.n_points();
    if q == 0 || q > n_points {
        return Err(FpcaError::InvalidRank { q, max: n_points });
    }
    let scale = surface.matrix.amax().max(1.0);
    let asym = surface.max_asymmetry();
    if asym > SYMMETRY_TOL * scale {
        return Err(FpcaError::NotSymmetric(asym));
    }
    if surface.matrix.iter().any(|v| !v.is_finite()) {
        return Err(FpcaError::Domain("surface has non-finite entries".into()));
    }

    let eig = SymmetricEigen::new(surface.matrix.clone());
    let mut order: Vec<usize> = (0..n_points).collect();
    // Stable sort keeps the solver's order among ties.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let spacing = surface.grid.spacing();
    let rescale = (n_points as f64).sqrt();
    let mut eigenfunctions = DMatrix::zeros(n_points, q);
    let mut eigenvalues = Vec::with_capacity(q);
    for (l, &idx) in order.iter().take(q).enumerate() {
        eigenvalues.push(eig.eigenvalues[idx] * spacing);
        let col = eig.eigenvectors.column(idx);
        let sign = sign_of_largest(col.iter().copied());
        for j in 0..n_points {
            eigenfunctions[(j, l)] = sign * col[j] * rescale;
        }
    }
    Ok(EigenSystem {
        grid: surface.grid.clone(),
        eigenvalues,
        eigenfunctions,
    })
}

fn sign_of_largest(values: impl Iterator<Item = f64>) -> f64 {
    let mut best = 0.0f64;
    for v in values {
        if v.abs() > best.abs() {
            best = v;
        }
    }
    if best < 0.0 {
        -1.0
    } else {
        1.0
    }
}
