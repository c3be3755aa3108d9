//! Noise handling: pre-smoothing of individual curves and penalised-spline
//! smoothing of a covariance surface with its diagonal removed.
//!
//! Both smoothers minimise a residual sum of squares plus `λ` times a sum of
//! squared second differences (of the fitted values for curves, of the
//! spline coefficients along each margin for surfaces). Each factorises its
//! penalty once per grid so the generalized cross-validation search over
//! `λ` costs O(dim) per candidate.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{FpcaError, Result};
use crate::estimators::CovarianceSurface;
use crate::fgrid::{FunctionalSample, Grid};

pub const DEFAULT_BASIS_SIZE: usize = 15;
/// Relative ridge added to a rank-deficient surface design.
const RIDGE: f64 = 1e-9;
const LOG10_PENALTY_RANGE: (f64, f64) = (-8.0, 8.0);
const LOG10_PENALTY_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothingScheme {
    PreSmooth,
    SmoothCf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Penalty {
    /// Chosen by generalized cross-validation.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingSpec {
    pub scheme: SmoothingScheme,
    pub penalty: Penalty,
    pub basis_size: usize,
}

impl SmoothingSpec {
    pub fn pre_smooth() -> Self {
        Self {
            scheme: SmoothingScheme::PreSmooth,
            penalty: Penalty::Auto,
            basis_size: DEFAULT_BASIS_SIZE,
        }
    }

    pub fn smooth_cf() -> Self {
        Self {
            scheme: SmoothingScheme::SmoothCf,
            penalty: Penalty::Auto,
            basis_size: DEFAULT_BASIS_SIZE,
        }
    }

    pub fn validate(&self, n_points: usize) -> Result<()> {
        if let Penalty::Fixed(p) = self.penalty {
            if !(p >= 0.0) {
                return Err(FpcaError::Smoothing(format!("penalty {p} must be >= 0")));
            }
        }
        if self.scheme == SmoothingScheme::SmoothCf
            && (self.basis_size < 4 || self.basis_size > n_points)
        {
            return Err(FpcaError::Smoothing(format!(
                "basis size {} outside 4..={n_points}",
                self.basis_size
            )));
        }
        Ok(())
    }
}

fn log_penalty_grid() -> impl Iterator<Item = f64> {
    let (lo, hi) = LOG10_PENALTY_RANGE;
    let steps = ((hi - lo) / LOG10_PENALTY_STEP).round() as usize;
    (0..=steps).map(move |i| 10f64.powf(lo + i as f64 * LOG10_PENALTY_STEP))
}

/// `(m - 2) × m` second-difference operator.
fn second_differences(m: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m - 2, m);
    for i in 0..m - 2 {
        d[(i, i)] = 1.0;
        d[(i, i + 1)] = -2.0;
        d[(i, i + 2)] = 1.0;
    }
    d
}

/// Spectral factorisation of `DᵀD` shared by every curve on a grid.
#[derive(Debug, Clone)]
pub struct CurveSmoother {
    basis: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl CurveSmoother {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 4 {
            return Err(FpcaError::Smoothing(format!(
                "need at least 4 points, got {n_points}"
            )));
        }
        let d = second_differences(n_points);
        let eig = SymmetricEigen::new(d.transpose() * d);
        let top = eig.eigenvalues.amax();
        // Constants and lines span the null space; pin it to exact zeros.
        let eigenvalues = eig
            .eigenvalues
            .iter()
            .map(|&e| if e < 1e-10 * top { 0.0 } else { e })
            .collect();
        Ok(Self {
            basis: eig.eigenvectors,
            eigenvalues,
        })
    }

    fn shrink(&self, penalty: f64, e: f64) -> f64 {
        if e == 0.0 {
            1.0
        } else if penalty.is_infinite() {
            0.0
        } else {
            1.0 / (1.0 + penalty * e)
        }
    }

    /// Minimiser of `‖y - z‖² + penalty · ‖D z‖²`.
    pub fn smooth(&self, y: &[f64], penalty: f64) -> Vec<f64> {
        if penalty == 0.0 {
            return y.to_vec();
        }
        let coef = self.basis.tr_mul(&DVector::from_column_slice(y));
        let scaled = DVector::from_iterator(
            coef.len(),
            coef.iter()
                .zip(&self.eigenvalues)
                .map(|(c, &e)| c * self.shrink(penalty, e)),
        );
        (&self.basis * scaled).iter().copied().collect()
    }

    /// Penalty minimising the GCV score for `y`.
    pub fn gcv_penalty(&self, y: &[f64]) -> f64 {
        let n = y.len() as f64;
        let coef = self.basis.tr_mul(&DVector::from_column_slice(y));
        let mut best = (f64::INFINITY, 0.0);
        for lambda in log_penalty_grid() {
            let mut rss = 0.0;
            let mut edf = 0.0;
            for (c, &e) in coef.iter().zip(&self.eigenvalues) {
                let s = self.shrink(lambda, e);
                rss += ((1.0 - s) * c).powi(2);
                edf += s;
            }
            let score = n * rss / (n - edf).powi(2);
            if score < best.0 {
                best = (score, lambda);
            }
        }
        best.1
    }
}

/// Replaces every curve by its second-difference-penalised smooth.
pub fn presmooth(sample: &FunctionalSample, spec: &SmoothingSpec) -> Result<FunctionalSample> {
    if spec.scheme != SmoothingScheme::PreSmooth {
        return Err(FpcaError::Smoothing(
            "presmooth needs the pre-smooth scheme".into(),
        ));
    }
    spec.validate(sample.n_points())?;
    let smoother = CurveSmoother::new(sample.n_points())?;
    let rows: Vec<Vec<f64>> = sample
        .rows()
        .iter()
        .map(|y| {
            let penalty = match spec.penalty {
                Penalty::Auto => smoother.gcv_penalty(y),
                Penalty::Fixed(p) => p,
            };
            smoother.smooth(y, penalty)
        })
        .collect();
    FunctionalSample::from_rows(sample.grid().clone(), &rows)
}

/// Flags the diagonal as missing; values are kept but no longer fitted.
pub fn remove_diagonal(surface: &CovarianceSurface) -> CovarianceSurface {
    CovarianceSurface {
        diagonal_removed: true,
        ..surface.clone()
    }
}

/// Uniform cubic B-spline basis with `size` functions on `[0, 1]`, evaluated
/// at `points` (`points.len() × size`).
pub fn bspline_basis(points: &[f64], size: usize) -> DMatrix<f64> {
    assert!(size >= 4, "cubic basis needs at least 4 functions");
    let h = 1.0 / (size - 3) as f64;
    let cardinal = |u: f64| -> f64 {
        if !(0.0..4.0).contains(&u) {
            0.0
        } else if u < 1.0 {
            u * u * u / 6.0
        } else if u < 2.0 {
            (-3.0 * u * u * u + 12.0 * u * u - 12.0 * u + 4.0) / 6.0
        } else if u < 3.0 {
            (3.0 * u * u * u - 24.0 * u * u + 60.0 * u - 44.0) / 6.0
        } else {
            (4.0 - u).powi(3) / 6.0
        }
    };
    DMatrix::from_fn(points.len(), size, |r, i| {
        let left = (i as f64 - 3.0) * h;
        cardinal((points[r] - left) / h)
    })
}

/// Tensor-product P-spline smoother for surfaces on one grid, fitted to
/// the off-diagonal cells.
#[derive(Debug, Clone)]
pub struct SurfaceSmoother {
    grid: Grid,
    basis: DMatrix<f64>,
    /// `L^{-T} U`: maps the decoupled coordinates back to coefficients.
    transform: DMatrix<f64>,
    penalty_spectrum: Vec<f64>,
}

impl SurfaceSmoother {
    pub fn new(grid: &Grid, basis_size: usize) -> Result<Self> {
        let n = grid.n_points();
        if basis_size < 4 || basis_size > n {
            return Err(FpcaError::Smoothing(format!(
                "basis size {basis_size} outside 4..={n}"
            )));
        }
        let k = basis_size;
        let kk = k * k;
        let basis = bspline_basis(grid.points(), k);
        let gram = basis.tr_mul(&basis);

        // Normal matrix over off-diagonal cells: G ⊗ G minus the diagonal
        // cells' rank-one terms.
        let mut normal = gram.kronecker(&gram);
        for a in 0..n {
            let row = basis.row(a).transpose();
            let cell = row.kronecker(&row);
            normal.ger(-1.0, &cell, &cell, 1.0);
        }
        let d = second_differences(k);
        let dtd = d.transpose() * d;
        let eye = DMatrix::<f64>::identity(k, k);
        let penalty = dtd.kronecker(&eye) + eye.kronecker(&dtd);

        // Coarse grids leave the off-diagonal design rank deficient; a ridge
        // far below the data scale lets the penalty pin those directions.
        let chol = match Cholesky::new(normal.clone()) {
            Some(c) => c,
            None => {
                let ridge = RIDGE * normal.diagonal().max();
                Cholesky::new(normal + DMatrix::identity(kk, kk) * ridge).ok_or_else(|| {
                    FpcaError::Smoothing("normal matrix not positive definite".into())
                })?
            }
        };
        let l = chol.l();
        let l_inv = l
            .clone()
            .solve_lower_triangular(&DMatrix::identity(kk, kk))
            .ok_or_else(|| FpcaError::Smoothing("singular Cholesky factor".into()))?;
        let mut reduced = &l_inv * penalty * l_inv.transpose();
        reduced = (&reduced + reduced.transpose()) * 0.5;
        let eig = SymmetricEigen::new(reduced);
        let transform = l_inv.transpose() * eig.eigenvectors;
        let penalty_spectrum = eig.eigenvalues.iter().map(|&s| s.max(0.0)).collect();
        Ok(Self {
            grid: grid.clone(),
            basis,
            transform,
            penalty_spectrum,
        })
    }

    pub fn basis_size(&self) -> usize {
        self.basis.ncols()
    }

    /// Smooths the off-diagonal cells of `matrix`, evaluates on the full
    /// grid and symmetrises. Returns the fitted matrix and the penalty used.
    pub fn fit(&self, matrix: &DMatrix<f64>, penalty: Penalty) -> Result<(DMatrix<f64>, f64)> {
        let n = self.grid.n_points();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(FpcaError::Dimension {
                expected: n,
                actual: matrix.nrows(),
            });
        }
        let k = self.basis_size();
        let projected = self.basis.tr_mul(matrix) * &self.basis;
        let mut rhs = DVector::zeros(k * k);
        for p in 0..k {
            for q in 0..k {
                rhs[p * k + q] = projected[(p, q)];
            }
        }
        let mut y2 = 0.0;
        for a in 0..n {
            let s = matrix[(a, a)];
            let row = self.basis.row(a);
            for p in 0..k {
                for q in 0..k {
                    rhs[p * k + q] -= s * row[p] * row[q];
                }
            }
        }
        for b in 0..n {
            for a in 0..n {
                if a != b {
                    y2 += matrix[(a, b)] * matrix[(a, b)];
                }
            }
        }
        let z = self.transform.tr_mul(&rhs);
        let n_obs = (n * n - n) as f64;
        let lambda = match penalty {
            Penalty::Fixed(p) => p,
            Penalty::Auto => {
                let mut best = (f64::INFINITY, 0.0);
                for lambda in log_penalty_grid() {
                    let mut fit_cross = 0.0;
                    let mut fit_sq = 0.0;
                    let mut edf = 0.0;
                    for (zi, &s) in z.iter().zip(&self.penalty_spectrum) {
                        let w = 1.0 / (1.0 + lambda * s);
                        fit_cross += zi * zi * w;
                        fit_sq += zi * zi * w * w;
                        edf += w;
                    }
                    let rss = (y2 - 2.0 * fit_cross + fit_sq).max(0.0);
                    let score = n_obs * rss / (n_obs - edf).powi(2);
                    if score < best.0 {
                        best = (score, lambda);
                    }
                }
                best.1
            }
        };
        let weighted = DVector::from_iterator(
            z.len(),
            z.iter()
                .zip(&self.penalty_spectrum)
                .map(|(zi, &s)| zi / (1.0 + lambda * s)),
        );
        let coef = &self.transform * weighted;
        let c = DMatrix::from_fn(k, k, |p, q| coef[p * k + q]);
        let fitted = &self.basis * c * self.basis.transpose();
        Ok(((&fitted + fitted.transpose()) * 0.5, lambda))
    }
}

/// Penalised tensor-product spline fit to a diagonal-removed surface.
pub fn smooth_surface(
    surface: &CovarianceSurface,
    spec: &SmoothingSpec,
) -> Result<CovarianceSurface> {
    let smoother = SurfaceSmoother::new(&surface.grid, spec.basis_size)?;
    smooth_surface_with(&smoother, surface, spec)
}

/// [`smooth_surface`] with a prebuilt smoother for the surface's grid.
pub fn smooth_surface_with(
    smoother: &SurfaceSmoother,
    surface: &CovarianceSurface,
    spec: &SmoothingSpec,
) -> Result<CovarianceSurface> {
    if spec.scheme != SmoothingScheme::SmoothCf {
        return Err(FpcaError::Smoothing(
            "smooth_surface needs the smooth-cf scheme".into(),
        ));
    }
    if !surface.diagonal_removed {
        return Err(FpcaError::Smoothing(
            "remove the diagonal before smoothing the surface".into(),
        ));
    }
    spec.validate(surface.grid.n_points())?;
    if smoother.basis_size() != spec.basis_size || smoother.grid != surface.grid {
        return Err(FpcaError::Smoothing(
            "smoother built for another grid or basis".into(),
        ));
    }
    let (matrix, _) = smoother.fit(&surface.matrix, spec.penalty)?;
    Ok(CovarianceSurface {
        grid: surface.grid.clone(),
        matrix,
        kind: surface.kind,
        diagonal_removed: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{eigendecompose, pass_covariance, CovarianceKind};
    use crate::simgen::{fourier_truth, generate, SimulationConfig};

    #[test]
    fn zero_penalty_is_identity() {
        let s = CurveSmoother::new(20).unwrap();
        let y: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64 - 1.3).collect();
        assert_eq!(s.smooth(&y, 0.0), y);
    }

    #[test]
    fn infinite_penalty_is_least_squares_line() {
        let n = 30;
        let s = CurveSmoother::new(n).unwrap();
        let y: Vec<f64> = (0..n)
            .map(|i| (i as f64 * 0.7).sin() + 0.1 * i as f64)
            .collect();
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let (mx, my) = (
            x.iter().sum::<f64>() / n as f64,
            y.iter().sum::<f64>() / n as f64,
        );
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let slope = sxy / sxx;
        for lambda in [f64::INFINITY, 1e12] {
            let z = s.smooth(&y, lambda);
            for (i, zi) in z.iter().enumerate() {
                let line = my + slope * (x[i] - mx);
                assert!((zi - line).abs() < 1e-6, "λ={lambda} i={i}: {zi} vs {line}");
            }
        }
    }

    #[test]
    fn spectral_path_matches_direct_ridge_solve() {
        let n = 25;
        let s = CurveSmoother::new(n).unwrap();
        let y: Vec<f64> = (0..n).map(|i| ((i * 13) % 7) as f64).collect();
        let d = second_differences(n);
        for lambda in [1e-3, 0.7, 40.0] {
            let system = DMatrix::identity(n, n) + d.transpose() * &d * lambda;
            let direct = system.lu().solve(&DVector::from_column_slice(&y)).unwrap();
            let z = s.smooth(&y, lambda);
            for (a, b) in z.iter().zip(direct.iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gcv_keeps_smooth_signals() {
        let grid = Grid::new(101).unwrap();
        let truth = fourier_truth(&grid);
        let s = CurveSmoother::new(101).unwrap();
        for j in 0..4 {
            let y = truth.eigenfunction(j);
            let z = s.smooth(&y, s.gcv_penalty(&y));
            let worst = y
                .iter()
                .zip(&z)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(worst < 0.05, "φ{} max dev {worst}", j + 1);
        }
    }

    #[test]
    fn presmooth_rejects_short_curves_and_wrong_scheme() {
        let grid = Grid::new(3).unwrap();
        let s = FunctionalSample::from_rows(grid, &[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(presmooth(&s, &SmoothingSpec::pre_smooth()).is_err());
        let grid = Grid::new(10).unwrap();
        let s = FunctionalSample::from_rows(grid, &[vec![1.0; 10]]).unwrap();
        assert!(presmooth(&s, &SmoothingSpec::smooth_cf()).is_err());
    }

    #[test]
    fn bspline_partition_of_unity() {
        let grid = Grid::new(101).unwrap();
        let b = bspline_basis(grid.points(), 15);
        for r in 0..101 {
            assert!((b.row(r).sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn remove_diagonal_is_idempotent() {
        let grid = Grid::new(5).unwrap();
        let s = CovarianceSurface::new(grid, DMatrix::identity(5, 5), CovarianceKind::Classical)
            .unwrap();
        let once = remove_diagonal(&s);
        assert!(once.diagonal_removed);
        assert_eq!(once.matrix, s.matrix);
        assert_eq!(remove_diagonal(&once), once);
    }

    #[test]
    fn constant_surface_is_reproduced() {
        let grid = Grid::new(41).unwrap();
        let mut m = DMatrix::from_element(41, 41, 0.7);
        for a in 0..41 {
            m[(a, a)] = 9.0;
        }
        let s = remove_diagonal(&CovarianceSurface::new(grid, m, CovarianceKind::Pass).unwrap());
        let out = smooth_surface(&s, &SmoothingSpec::smooth_cf()).unwrap();
        assert!(out.matrix.iter().all(|v| (v - 0.7).abs() < 1e-6));
        assert_eq!(out.max_asymmetry(), 0.0);
    }

    #[test]
    fn smooth_surface_preconditions() {
        let grid = Grid::new(10).unwrap();
        let s =
            CovarianceSurface::new(grid, DMatrix::identity(10, 10), CovarianceKind::Pass).unwrap();
        assert!(smooth_surface(&s, &SmoothingSpec::smooth_cf()).is_err());
        let removed = remove_diagonal(&s);
        let too_big = SmoothingSpec {
            basis_size: 11,
            ..SmoothingSpec::smooth_cf()
        };
        assert!(smooth_surface(&removed, &too_big).is_err());
    }

    #[test]
    fn smoothing_preserves_noise_free_eigenfunctions() {
        let cfg = SimulationConfig {
            n: 200,
            seed: 31,
            ..Default::default()
        };
        let (sample, truth) = generate(&cfg).unwrap();
        let raw = pass_covariance(&sample).unwrap();
        let smoothed = smooth_surface(&remove_diagonal(&raw), &SmoothingSpec::smooth_cf()).unwrap();
        let grid = sample.grid();
        let err = |surface: &CovarianceSurface| {
            let phi = eigendecompose(surface, 1).unwrap().eigenfunction(0);
            let truth_phi = truth.eigenfunction(0);
            let sign = grid.inner_product(&phi, &truth_phi).unwrap().signum();
            let d: Vec<f64> = phi
                .iter()
                .zip(&truth_phi)
                .map(|(a, b)| sign * a - b)
                .collect();
            grid.inner_product(&d, &d).unwrap()
        };
        let diff = (err(&raw) - err(&smoothed)).abs();
        assert!(diff < 5e-3, "{diff}");
    }
}
