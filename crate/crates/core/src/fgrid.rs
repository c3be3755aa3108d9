//! Regular grids on the unit interval and the quadrature behind every inner
//! product in the crate.
//!
//! Points sit at the right endpoints `t_j = j / N`, `j = 1..=N`, and every
//! point carries the same weight `1 / N`. The induced norm is the norm of the
//! piecewise-constant interpolant, so noisy and noise-free estimators share a
//! single inner product.

use nalgebra::DMatrix;

use crate::error::{FpcaError, Result};

/// Equally spaced grid `t_j = j / N` on `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    spacing: f64,
}

impl Grid {
    /// Builds the `n_points` grid. At least two points are required.
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(FpcaError::InvalidGrid(format!(
                "need at least 2 points, got {n_points}"
            )));
        }
        let n = n_points as f64;
        let points = (1..=n_points).map(|j| j as f64 / n).collect();
        Ok(Self {
            points,
            spacing: 1.0 / n,
        })
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Quadrature weight per point.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_points() {
            return Err(FpcaError::Dimension {
                expected: self.n_points(),
                actual: len,
            });
        }
        Ok(())
    }

    /// `Δ · Σ_j f_j g_j`.
    pub fn inner_product(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        self.check_len(g.len())?;
        Ok(dot(f, g) * self.spacing)
    }

    pub fn l2_norm(&self, f: &[f64]) -> Result<f64> {
        Ok(self.inner_product(f, f)?.sqrt())
    }

    /// Evaluates `f` at every grid point.
    pub fn evaluate(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.points.iter().map(|&t| f(t)).collect()
    }
}

/// Free-function form of [`Grid::new`].
pub fn make_grid(n_points: usize) -> Result<Grid> {
    Grid::new(n_points)
}

pub fn inner_product(f: &[f64], g: &[f64], grid: &Grid) -> Result<f64> {
    grid.inner_product(f, g)
}

pub fn l2_norm(f: &[f64], grid: &Grid) -> Result<f64> {
    grid.l2_norm(f)
}

// Plain left-to-right sum; keeps inner_product(f, g) == inner_product(g, f)
// bit-for-bit.
pub(crate) fn dot(f: &[f64], g: &[f64]) -> f64 {
    f.iter().zip(g).map(|(a, b)| a * b).sum()
}

/// `n` curves observed on one shared grid; row `i` is curve `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample {
    grid: Grid,
    values: DMatrix<f64>,
}

impl FunctionalSample {
    /// Wraps an `n × N` matrix. Every entry must be finite and `n ≥ 1`.
    pub fn new(grid: Grid, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(FpcaError::InsufficientSample { needed: 1, got: 0 });
        }
        grid.check_len(values.ncols())?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % values.nrows(), pos / values.nrows());
            return Err(FpcaError::Domain(format!(
                "non-finite value in curve {row} at grid point {col}"
            )));
        }
        Ok(Self { grid, values })
    }

    /// Builds a sample from curve rows.
    pub fn from_rows(grid: Grid, rows: &[Vec<f64>]) -> Result<Self> {
        let n_points = grid.n_points();
        for row in rows {
            grid.check_len(row.len())?;
        }
        let values = DMatrix::from_fn(rows.len(), n_points, |i, j| rows[i][j]);
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_curves(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.values.ncols()
    }

    /// Copy of curve `i`.
    pub fn curve(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// All curves as owned rows; handy for pair loops over contiguous data.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_curves()).map(|i| self.curve(i)).collect()
    }

    pub(crate) fn into_values(self) -> DMatrix<f64> {
        self.values
    }
}

pub(crate) fn column(m: &DMatrix<f64>, j: usize) -> Vec<f64> {
    m.column(j).iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn spacing_and_points() {
        let g = Grid::new(4).unwrap();
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.points(), &[0.25, 0.5, 0.75, 1.0]);
        let g = Grid::new(101).unwrap();
        assert_eq!(g.n_points(), 101);
        assert!((g.spacing() * 101.0 - 1.0).abs() < 1e-12);
        for w in g.points().windows(2) {
            assert!(((w[1] - w[0]) - g.spacing()).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_grid_rejected() {
        assert!(matches!(Grid::new(1), Err(FpcaError::InvalidGrid(_))));
        assert!(Grid::new(0).is_err());
    }

    #[test]
    fn fourier_inner_products() {
        let g = Grid::new(101).unwrap();
        let ones = vec![1.0; 101];
        assert!((g.inner_product(&ones, &ones).unwrap() - 1.0).abs() < 1e-14);
        let s = g.evaluate(|t| 2f64.sqrt() * (2.0 * PI * t).sin());
        let c = g.evaluate(|t| 2f64.sqrt() * (2.0 * PI * t).cos());
        assert!((g.inner_product(&s, &s).unwrap() - 1.0).abs() < 1e-3);
        assert!(g.inner_product(&s, &c).unwrap().abs() < 1e-3);
        assert!((g.l2_norm(&s).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn norms_of_constants() {
        let g = Grid::new(7).unwrap();
        assert_eq!(g.l2_norm(&[0.0; 7]).unwrap(), 0.0);
        assert!((g.l2_norm(&[2.0; 7]).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn length_mismatch_is_dimension_error() {
        let g = Grid::new(5).unwrap();
        let err = g.inner_product(&[1.0; 5], &[1.0; 4]).unwrap_err();
        assert_eq!(
            err,
            FpcaError::Dimension {
                expected: 5,
                actual: 4
            }
        );
    }

    #[test]
    fn sample_validation() {
        let g = Grid::new(3).unwrap();
        assert!(FunctionalSample::from_rows(g.clone(), &[]).is_err());
        assert!(FunctionalSample::from_rows(g.clone(), &[vec![1.0, 2.0]]).is_err());
        assert!(FunctionalSample::from_rows(g.clone(), &[vec![1.0, f64::NAN, 0.0]]).is_err());
        let s = FunctionalSample::from_rows(g, &[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(s.curve(0), vec![1.0, 2.0, 3.0]);
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(-1e3f64..1e3, n),
                prop::collection::vec(-1e3f64..1e3, n),
            )
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_cauchy_schwarz((f, g) in vec_pair()) {
            let grid = Grid::new(f.len()).unwrap();
            let fg = grid.inner_product(&f, &g).unwrap();
            prop_assert_eq!(fg, grid.inner_product(&g, &f).unwrap());
            let nf = grid.l2_norm(&f).unwrap();
            let ng = grid.l2_norm(&g).unwrap();
            let bound = nf * nf * ng * ng;
            prop_assert!(fg * fg <= bound * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn norm_scales((f, _g) in vec_pair(), c in -50.0f64..50.0) {
            let grid = Grid::new(f.len()).unwrap();
            let scaled: Vec<f64> = f.iter().map(|v| c * v).collect();
            let lhs = grid.l2_norm(&scaled).unwrap();
            let rhs = c.abs() * grid.l2_norm(&f).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300) + 1e-300);
        }
    }
}
