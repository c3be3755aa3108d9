use nalgebra::DMatrix;

use super::{eigendecompose, mean_function, CovarianceKind, CovarianceSurface, EigenSystem};
use crate::error::{FpcaError, Result};
use crate::fgrid::{dot, FunctionalSample};

pub const MEDIAN_TOL: f64 = 1e-10;
pub const MEDIAN_MAX_ITER: usize = 5000;

/// Spatial (geometric) median under the grid quadrature norm.
///
/// Weiszfeld iteration started at the pointwise mean, with the Vardi-Zhang
/// step when the iterate lands on a data curve. Stops once the step is
/// below `tol · (1 + ‖m‖)`.
pub fn spatial_median(sample: &FunctionalSample, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let rows = sample.rows();
    let spacing = sample.grid().spacing();
    let n_points = sample.n_points();
    let norm = |v: &[f64]| (dot(v, v) * spacing).sqrt();

    let mut m = mean_function(sample);
    let scale = rows
        .iter()
        .map(|r| {
            let d: Vec<f64> = r.iter().zip(&m).map(|(a, b)| a - b).collect();
            norm(&d)
        })
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Ok(m);
    }
    let coincide = 1e-14 * scale;

    let mut last_step = f64::INFINITY;
    for _ in 0..max_iter {
        let mut weighted = vec![0.0; n_points];
        let mut weight_sum = 0.0;
        let mut pull = vec![0.0; n_points];
        let mut at_point = 0usize;
        for r in &rows {
            let d: Vec<f64> = r.iter().zip(&m).map(|(a, b)| a - b).collect();
            let dist = norm(&d);
            if dist <= coincide {
                at_point += 1;
                continue;
            }
            let w = 1.0 / dist;
            weight_sum += w;
            for j in 0..n_points {
                weighted[j] += w * r[j];
                pull[j] += w * d[j];
            }
        }
        if weight_sum == 0.0 {
            // Every curve sits on the iterate.
            return Ok(m);
        }
        let target: Vec<f64> = weighted.iter().map(|v| v / weight_sum).collect();
        let next: Vec<f64> = if at_point == 0 {
            target
        } else {
            let r = norm(&pull);
            let eta = at_point as f64;
            if r <= eta {
                return Ok(m);
            }
            let keep = eta / r;
            target
                .iter()
                .zip(&m)
                .map(|(t, cur)| (1.0 - keep) * t + keep * cur)
                .collect()
        };
        let step: Vec<f64> = next.iter().zip(&m).map(|(a, b)| a - b).collect();
        last_step = norm(&step);
        m = next;
        if last_step <= tol * (1.0 + norm(&m)) {
            return Ok(m);
        }
    }
    Err(FpcaError::NoConvergence {
        iterations: max_iter,
        last_step,
        last_iterate: m,
    })
}

/// Covariance of the spatial signs `(x_i - m) / ‖x_i - m‖` about `center`.
/// Curves sitting on the center are dropped.
pub fn spherical_covariance(
    sample: &FunctionalSample,
    center: &[f64],
) -> Result<CovarianceSurface> {
    let spacing = sample.grid().spacing();
    let n_points = sample.n_points();
    let devs: Vec<(Vec<f64>, f64)> = sample
        .rows()
        .into_iter()
        .map(|r| {
            let d: Vec<f64> = r.iter().zip(center).map(|(a, b)| a - b).collect();
            let nrm2 = dot(&d, &d) * spacing;
            (d, nrm2)
        })
        .collect();
    let max2 = devs.iter().map(|d| d.1).fold(0.0f64, f64::max);
    let kept: Vec<_> = devs
        .into_iter()
        .filter(|d| max2 > 0.0 && d.1 > 1e-12 * max2)
        .collect();
    if kept.is_empty() {
        return Err(FpcaError::DegenerateSample(
            "every curve equals the spatial median".into(),
        ));
    }
    let mut signs = DMatrix::zeros(kept.len(), n_points);
    for (r, (d, nrm2)) in kept.iter().enumerate() {
        let inv = nrm2.sqrt().recip();
        for j in 0..n_points {
            signs[(r, j)] = d[j] * inv;
        }
    }
    let mut acc = DMatrix::zeros(n_points, n_points);
    acc.gemm_tr(1.0 / kept.len() as f64, &signs, &signs, 0.0);
    let sym = (&acc + acc.transpose()) * 0.5;
    CovarianceSurface::new(sample.grid().clone(), sym, CovarianceKind::Spherical)
}

/// Median spherical principal components: eigenpairs of the spatial-sign
/// covariance about the spatial median.
pub fn mspc(sample: &FunctionalSample, q: usize) -> Result<EigenSystem> {
    let n = sample.n_curves();
    if n < 2 {
        return Err(FpcaError::InsufficientSample { needed: 2, got: n });
    }
    let center = spatial_median(sample, MEDIAN_TOL, MEDIAN_MAX_ITER)?;
    eigendecompose(&spherical_covariance(sample, &center)?, q)
}
