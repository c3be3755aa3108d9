use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{eigenfunction_mse, median, pve_error, ReplicationResult};
use crate::error::{FpcaError, Result};
use crate::fgrid::Grid;
use crate::pipeline::{FitContext, FitOptions, MethodSpec, Smoothing};
use crate::simgen::{generate_replicate, SimulationConfig};
use crate::smoothing::SurfaceSmoother;

/// What one method produced on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Success {
        eigenfunction: Vec<f64>,
        ratios: Option<Vec<f64>>,
    },
    /// Estimation error or a ratio solver that did not converge.
    Failure(String),
}

/// One `(setting, method)` cell.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub config: SimulationConfig,
    pub method: MethodSpec,
    pub replications: usize,
    pub successes: usize,
    pub failures: usize,
    pub mse: Option<f64>,
    pub bias: Option<f64>,
    pub pve_mse: Option<f64>,
    pub median_pve1: Option<f64>,
    /// No replicate succeeded.
    pub failed: bool,
    #[serde(skip)]
    pub detail: ReplicationResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchTable {
    pub seed: u64,
    pub replications: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    pub fn row(&self, config: &SimulationConfig, method: MethodSpec) -> Option<&BenchRow> {
        self.rows.iter().find(|r| {
            r.method == method
                && r.config.score_law == config.score_law
                && r.config.outlier_scheme == config.outlier_scheme
                && r.config.n == config.n
                && r.config.noise_sd == config.noise_sd
        })
    }

    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.failed)
    }
}

fn run_replicate(
    config: &SimulationConfig,
    replicate: usize,
    methods: &[MethodSpec],
    opts: FitOptions,
    smoother: Option<&SurfaceSmoother>,
) -> Vec<Outcome> {
    let sample = match generate_replicate(config, replicate as u64) {
        Ok((s, _)) => s,
        Err(e) => return vec![Outcome::Failure(e.to_string()); methods.len()],
    };
    let mut ctx = FitContext::new(&sample, opts);
    if let Some(sm) = smoother {
        ctx = ctx.with_smoother(sm);
    }
    methods
        .iter()
        .map(|&m| match ctx.fit(m) {
            Err(e) => Outcome::Failure(e.to_string()),
            Ok(fit) => match fit.ratios {
                Some(r) if !r.converged => Outcome::Failure(format!(
                    "ratio solver stopped after {} iterations",
                    r.iterations
                )),
                ratios => Outcome::Success {
                    eigenfunction: fit.eigensystem.eigenfunction(0),
                    ratios: ratios.map(|r| r.ratios),
                },
            },
        })
        .collect()
}

/// Runs every method on `replications` samples of every setting.
///
/// All settings share `seed` (the per-setting `seed` field is overwritten),
/// so methods and settings are compared on common random numbers.
/// Replicates run in parallel; results are gathered in replicate order, so
/// the table does not depend on the thread count.
pub fn run_benchmark(
    configs: &[SimulationConfig],
    methods: &[MethodSpec],
    replications: usize,
    seed: u64,
    opts: FitOptions,
) -> Result<BenchTable> {
    if configs.is_empty() {
        return Err(FpcaError::Config("no settings to benchmark".into()));
    }
    if methods.is_empty() {
        return Err(FpcaError::Config("no methods to benchmark".into()));
    }
    if replications == 0 {
        return Err(FpcaError::Config("replications must be at least 1".into()));
    }
    let needs_smoother = methods.iter().any(|m| m.smoothing == Smoothing::SmoothCf);
    let mut smoothers: HashMap<usize, SurfaceSmoother> = HashMap::new();
    let mut rows = Vec::with_capacity(configs.len() * methods.len());

    for base in configs {
        let config = SimulationConfig {
            seed,
            ..base.clone()
        };
        config.validate()?;
        let grid = Grid::new(config.n_points)?;
        if needs_smoother && !smoothers.contains_key(&config.n_points) {
            smoothers.insert(
                config.n_points,
                SurfaceSmoother::new(&grid, opts.basis_size)?,
            );
        }
        let smoother = smoothers.get(&config.n_points);

        let outcomes: Vec<Vec<Outcome>> = (0..replications)
            .into_par_iter()
            .map(|rep| run_replicate(&config, rep, methods, opts, smoother))
            .collect();

        let truth = crate::simgen::fourier_truth(&grid);
        let phi1 = truth.eigenfunction(0);
        for (mi, &method) in methods.iter().enumerate() {
            let mut detail = ReplicationResult::new(method, config.clone(), replications)?;
            for (rep, per_method) in outcomes.iter().enumerate() {
                match &per_method[mi] {
                    Outcome::Success {
                        eigenfunction,
                        ratios,
                    } => detail.push(&grid, eigenfunction.clone(), ratios.clone())?,
                    Outcome::Failure(_) => detail.record_failure(rep),
                }
            }
            rows.push(summarize(detail, &grid, &phi1, &truth.eigenvalues)?);
        }
    }
    Ok(BenchTable {
        seed,
        replications,
        rows,
    })
}

fn summarize(
    detail: ReplicationResult,
    grid: &Grid,
    phi1: &[f64],
    truth_eigenvalues: &[f64],
) -> Result<BenchRow> {
    let successes = detail.successes();
    let (mse, bias) = if successes > 0 {
        let (m, b) = eigenfunction_mse(&detail.eigenfunctions, phi1, grid)?;
        (Some(m), Some(b))
    } else {
        (None, None)
    };
    let ratios = detail.ratio_vectors();
    let pve_mse = if ratios.is_empty() {
        None
    } else {
        Some(pve_error(&ratios, truth_eigenvalues)?)
    };
    let median_pve1 = median(&detail.pve1_values());
    Ok(BenchRow {
        config: detail.config.clone(),
        method: detail.method,
        replications: detail.replications,
        successes,
        failures: detail.failed.len(),
        mse,
        bias,
        pve_mse,
        median_pve1,
        failed: successes == 0,
        detail,
    })
}
