//! Benchmark run files (TOML). Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use passfpca::simgen::{
    OutlierScheme, ScoreLaw, SimulationConfig, DEFAULT_N_POINTS, DEFAULT_OUTLIER_FRACTION,
};
use passfpca::{FitOptions, MethodSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub seed: u64,
    pub replications: usize,
    /// Method strings, `estimator[/smoothing[/ratio]]`.
    pub methods: Vec<String>,
    #[serde(default)]
    pub fit: FitOptions,
    /// Cartesian product of settings.
    #[serde(default)]
    pub sweep: Option<Sweep>,
    /// Settings listed one by one, run after the sweep.
    #[serde(default)]
    pub settings: Vec<SimulationConfig>,
    #[serde(default)]
    pub output: OutputPaths,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub score_laws: Vec<ScoreLaw>,
    #[serde(default = "default_schemes")]
    pub outlier_schemes: Vec<OutlierScheme>,
    #[serde(default = "default_noise")]
    pub noise_sds: Vec<f64>,
    #[serde(default = "default_sizes")]
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_points")]
    pub n_points: usize,
    #[serde(default = "default_fraction")]
    pub outlier_fraction: f64,
}

fn default_schemes() -> Vec<OutlierScheme> {
    vec![OutlierScheme::None]
}
fn default_noise() -> Vec<f64> {
    vec![0.0]
}
fn default_sizes() -> Vec<usize> {
    vec![200]
}
fn default_points() -> usize {
    DEFAULT_N_POINTS
}
fn default_fraction() -> f64 {
    DEFAULT_OUTLIER_FRACTION
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    /// Results table CSV.
    pub results: Option<PathBuf>,
    /// Summary JSON.
    pub summary: Option<PathBuf>,
    /// Per-replicate CSV.
    pub replicates: Option<PathBuf>,
}

impl BenchConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1);
            CliError::parse(path, line, e.message().to_string())
        })
    }

    pub fn methods(&self) -> Result<Vec<MethodSpec>, CliError> {
        if self.methods.is_empty() {
            return Err(CliError::Usage("method list is empty".into()));
        }
        self.methods
            .iter()
            .map(|m| m.parse::<MethodSpec>().map_err(CliError::from))
            .collect()
    }

    /// Sweep settings in (noise, outliers, size, law) order, then the
    /// listed ones.
    pub fn settings(&self) -> Result<Vec<SimulationConfig>, CliError> {
        let mut out = Vec::new();
        if let Some(s) = &self.sweep {
            for &noise_sd in &s.noise_sds {
                for &outlier_scheme in &s.outlier_schemes {
                    for &n in &s.sample_sizes {
                        for &score_law in &s.score_laws {
                            out.push(SimulationConfig {
                                n,
                                n_points: s.n_points,
                                score_law,
                                outlier_scheme,
                                outlier_fraction: s.outlier_fraction,
                                noise_sd,
                                seed: self.seed,
                            });
                        }
                    }
                }
            }
        }
        out.extend(self.settings.iter().cloned());
        if out.is_empty() {
            return Err(CliError::Usage(
                "no settings: give a [sweep] or [[settings]]".into(),
            ));
        }
        for s in &out {
            s.validate()?;
        }
        if self.replications == 0 {
            return Err(CliError::Usage("replications must be at least 1".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_expands_in_order() {
        let cfg: BenchConfig = toml::from_str(
            r#"
            seed = 3
            replications = 2
            methods = ["pass"]
            [sweep]
            score_laws = ["gaussian", "frechet"]
            outlier_schemes = ["none", "ol1"]
            "#,
        )
        .unwrap();
        let s = cfg.settings().unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s[1].score_law, ScoreLaw::Frechet);
        assert_eq!(s[2].outlier_scheme, OutlierScheme::Ol1);
        assert!(s.iter().all(|c| c.n == 200 && c.seed == 3));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = r#"
            seed = 3
            replications = 2
            methods = ["pass"]
            [fit]
            q = 4
            trim = 0.1
        "#;
        assert!(toml::from_str::<BenchConfig>(bad).is_err());
    }
}
