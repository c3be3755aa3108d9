use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{CovarianceKind, CovarianceSurface};
use crate::error::{FpcaError, Result};
use crate::fgrid::FunctionalSample;

/// Pairs whose squared distance falls below this fraction of the largest
/// squared pair distance are dropped from the U-statistic.
pub const DEGENERATE_PAIR_RATIO: f64 = 1e-12;

const PAIR_CHUNK: usize = 2048;

/// Squared quadrature distance of every unordered pair `(i, k)`, `i < k`,
/// in lexicographic order.
pub(crate) fn pair_distances(rows: &[Vec<f64>], spacing: f64) -> Vec<(u32, u32, f64)> {
    let n = rows.len();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let xi = &rows[i];
            (i + 1..n).map(move |k| {
                let d2: f64 = xi
                    .iter()
                    .zip(&rows[k])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (i as u32, k as u32, d2 * spacing)
            })
        })
        .collect()
}

/// Pairwise spatial sign covariance
///
/// `K(s, t) = avg_{i<k} (x_i(s) - x_k(s)) (x_i(t) - x_k(t)) / ‖x_i - x_k‖²`
///
/// over the retained (non-degenerate) pairs. Because each summand has unit
/// operator trace, `Δ · trace(K) = 1`.
pub fn pass_covariance(sample: &FunctionalSample) -> Result<CovarianceSurface> {
    let n = sample.n_curves();
    if n < 2 {
        return Err(FpcaError::InsufficientSample { needed: 2, got: n });
    }
    let rows = sample.rows();
    let n_points = sample.n_points();
    let pairs = pair_distances(&rows, sample.grid().spacing());
    let max_d2 = pairs.iter().map(|p| p.2).fold(0.0f64, f64::max);
    if max_d2 <= 0.0 {
        return Err(FpcaError::DegenerateSample("all curves coincide".into()));
    }
    let cutoff = DEGENERATE_PAIR_RATIO * max_d2;
    let retained: Vec<_> = pairs.into_iter().filter(|p| p.2 > cutoff).collect();

    // One accumulator per chunk, summed in chunk order so the result does
    // not depend on scheduling.
    let partials: Vec<DMatrix<f64>> = retained
        .par_chunks(PAIR_CHUNK)
        .map(|chunk| {
            let mut signs = DMatrix::zeros(chunk.len(), n_points);
            for (r, &(i, k, d2)) in chunk.iter().enumerate() {
                let inv = d2.sqrt().recip();
                let (xi, xk) = (&rows[i as usize], &rows[k as usize]);
                for j in 0..n_points {
                    signs[(r, j)] = (xi[j] - xk[j]) * inv;
                }
            }
            let mut acc = DMatrix::zeros(n_points, n_points);
            acc.gemm_tr(1.0, &signs, &signs, 0.0);
            acc
        })
        .collect();

    let mut matrix = DMatrix::zeros(n_points, n_points);
    for p in &partials {
        matrix += p;
    }
    let count = retained.len() as f64;
    let sym = (&matrix + matrix.transpose()) * (0.5 / count);
    CovarianceSurface::new(sample.grid().clone(), sym, CovarianceKind::Pass)
}
