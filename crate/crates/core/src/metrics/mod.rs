//! Error metrics against the simulation truth and the replication harness.

mod bench;

pub use bench::{run_benchmark, BenchRow, BenchTable, Outcome};

use serde::Serialize;

use crate::error::{FpcaError, Result};
use crate::fgrid::Grid;
use crate::pipeline::MethodSpec;
use crate::simgen::SimulationConfig;

/// Largest tolerated deviation from unit norm for stored eigenfunctions.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Flips `estimate` so it has a non-negative inner product with `truth`.
pub fn align_sign(estimate: &[f64], truth: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    let ip = grid.inner_product(estimate, truth)?;
    if ip < 0.0 {
        Ok(estimate.iter().map(|v| -v).collect())
    } else {
        Ok(estimate.to_vec())
    }
}

/// Per-replicate first eigenfunctions and ratio vectors of one method on
/// one setting. Failed replicates are not stored.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicationResult {
    pub method: MethodSpec,
    pub config: SimulationConfig,
    /// Replicates attempted, including failures.
    pub replications: usize,
    pub eigenfunctions: Vec<Vec<f64>>,
    /// One entry per stored eigenfunction; `None` for methods without ratios.
    pub ratios: Vec<Option<Vec<f64>>>,
    /// Indices of failed replicates.
    pub failed: Vec<usize>,
}

impl ReplicationResult {
    pub fn new(method: MethodSpec, config: SimulationConfig, replications: usize) -> Result<Self> {
        if replications == 0 {
            return Err(FpcaError::Config("replications must be at least 1".into()));
        }
        Ok(Self {
            method,
            config,
            replications,
            eigenfunctions: Vec::new(),
            ratios: Vec::new(),
            failed: Vec::new(),
        })
    }

    /// Stores a successful replicate; the eigenfunction must be unit norm.
    pub fn push(
        &mut self,
        grid: &Grid,
        eigenfunction: Vec<f64>,
        ratios: Option<Vec<f64>>,
    ) -> Result<()> {
        let norm = grid.l2_norm(&eigenfunction)?;
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(FpcaError::Domain(format!(
                "eigenfunction norm {norm} is not 1"
            )));
        }
        self.eigenfunctions.push(eigenfunction);
        self.ratios.push(ratios);
        Ok(())
    }

    pub fn record_failure(&mut self, replicate: usize) {
        self.failed.push(replicate);
    }

    pub fn successes(&self) -> usize {
        self.eigenfunctions.len()
    }

    /// PVE₁ of every replicate that produced a ratio vector.
    pub fn pve1_values(&self) -> Vec<f64> {
        self.ratios
            .iter()
            .flatten()
            .map(|r| 1.0 / r.iter().sum::<f64>())
            .collect()
    }

    /// Ratio vectors of every replicate that produced one.
    pub fn ratio_vectors(&self) -> Vec<Vec<f64>> {
        self.ratios.iter().flatten().cloned().collect()
    }
}

/// `(mse, bias)` of sign-aligned estimates: the mean squared L2 distance
/// to `truth`, and the L2 norm of the mean aligned estimate minus `truth`.
pub fn eigenfunction_mse(estimates: &[Vec<f64>], truth: &[f64], grid: &Grid) -> Result<(f64, f64)> {
    if estimates.is_empty() {
        return Err(FpcaError::InsufficientSample { needed: 1, got: 0 });
    }
    let n = truth.len();
    let mut mean = vec![0.0; n];
    let mut mse = 0.0;
    for est in estimates {
        let aligned = align_sign(est, truth, grid)?;
        let diff: Vec<f64> = aligned.iter().zip(truth).map(|(a, b)| a - b).collect();
        mse += grid.inner_product(&diff, &diff)?;
        for (m, a) in mean.iter_mut().zip(&aligned) {
            *m += a;
        }
    }
    let r = estimates.len() as f64;
    let diff: Vec<f64> = mean.iter().zip(truth).map(|(m, t)| m / r - t).collect();
    Ok((mse / r, grid.l2_norm(&diff)?))
}

/// Mean squared error of `PVE₁ = 1 / Σ ratios` against the truth
/// `λ_1 / Σ λ`.
pub fn pve_error(ratio_estimates: &[Vec<f64>], truth_eigenvalues: &[f64]) -> Result<f64> {
    if ratio_estimates.is_empty() {
        return Err(FpcaError::InsufficientSample { needed: 1, got: 0 });
    }
    let total: f64 = truth_eigenvalues.iter().sum();
    if truth_eigenvalues.is_empty() || !(total > 0.0) {
        return Err(FpcaError::Domain(
            "truth eigenvalues must sum to a positive value".into(),
        ));
    }
    let target = truth_eigenvalues[0] / total;
    let sq: f64 = ratio_estimates
        .iter()
        .map(|r| (1.0 / r.iter().sum::<f64>() - target).powi(2))
        .sum();
    Ok(sq / ratio_estimates.len() as f64)
}

/// Median of a finite sample (mean of the two middle values when even).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}
