//! Synthetic functional data from a four-term Karhunen-Loève expansion.
//!
//! Curves are `x_i(t) = μ(t) + Σ_j ξ_ij φ_j(t)` with `μ(t) = 2t(1-t)`, the
//! Fourier basis `√2 sin(2πt), √2 cos(2πt), √2 sin(4πt), √2 cos(4πt)` and
//! score variances `(2, 1, 1/2, 1/4)`. Five score laws, two contamination
//! schemes and additive Gaussian noise are available.
//!
//! Every replicate draws from three independent ChaCha streams (scores,
//! contamination, noise) keyed by `(seed, replicate)`, so toggling one
//! ingredient never reshuffles another and parallel replicates stay
//! reproducible.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Frechet, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{FpcaError, Result};
use crate::fgrid::{FunctionalSample, Grid};

pub const TRUE_EIGENVALUES: [f64; 4] = [2.0, 1.0, 0.5, 0.25];
pub const DEFAULT_N_POINTS: usize = 101;
pub const DEFAULT_OUTLIER_FRACTION: f64 = 0.05;
/// Constant added to contaminated curves under OL1.
pub const OL1_SHIFT: f64 = 5.0;
/// Degrees of freedom of the multivariate-t law.
pub const MULTI_T_DF: f64 = 5.0;

/// Log-scale standard deviation of the log-normal law. Standardisation
/// removes the location and scale, so this is its only free parameter.
pub const LOGNORMAL_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreLaw {
    Gaussian,
    Frechet,
    Lognormal,
    Chisquare,
    MultivariateT,
}

impl ScoreLaw {
    pub const ALL: [ScoreLaw; 5] = [
        ScoreLaw::Gaussian,
        ScoreLaw::Frechet,
        ScoreLaw::Lognormal,
        ScoreLaw::Chisquare,
        ScoreLaw::MultivariateT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreLaw::Gaussian => "gaussian",
            ScoreLaw::Frechet => "frechet",
            ScoreLaw::Lognormal => "lognormal",
            ScoreLaw::Chisquare => "chisquare",
            ScoreLaw::MultivariateT => "multivariate-t",
        }
    }

    /// Mean and standard deviation of the raw draw `Z` used to standardise
    /// the independent-coordinate laws. `None` for the laws that are drawn
    /// already standardised.
    pub fn standardization(self) -> Option<(f64, f64)> {
        match self {
            ScoreLaw::Frechet => {
                // location 0, scale 2, shape 3
                let g1 = gamma(2.0 / 3.0);
                let g2 = gamma(1.0 / 3.0);
                Some((2.0 * g1, (4.0 * (g2 - g1 * g1)).sqrt()))
            }
            ScoreLaw::Lognormal => {
                let s2 = LOGNORMAL_SIGMA * LOGNORMAL_SIGMA;
                let var = (s2.exp() - 1.0) * s2.exp();
                Some(((0.5 * s2).exp(), var.sqrt()))
            }
            ScoreLaw::Chisquare => Some((1.0, 2f64.sqrt())),
            ScoreLaw::Gaussian | ScoreLaw::MultivariateT => None,
        }
    }
}

impl std::str::FromStr for ScoreLaw {
    type Err = FpcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(ScoreLaw::Gaussian),
            "frechet" => Ok(ScoreLaw::Frechet),
            "lognormal" | "log-normal" => Ok(ScoreLaw::Lognormal),
            "chisquare" | "chi-square" => Ok(ScoreLaw::Chisquare),
            "multivariate-t" | "mult-t" | "multivariate_t" => Ok(ScoreLaw::MultivariateT),
            other => Err(FpcaError::Config(format!("unknown score law `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutlierScheme {
    None,
    /// Constant shift of the mean function.
    Ol1,
    /// Shifted first score with the first eigenfunction replaced by `t`.
    Ol2,
}

impl OutlierScheme {
    pub fn name(self) -> &'static str {
        match self {
            OutlierScheme::None => "none",
            OutlierScheme::Ol1 => "ol1",
            OutlierScheme::Ol2 => "ol2",
        }
    }
}

impl std::str::FromStr for OutlierScheme {
    type Err = FpcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "ol0" => Ok(OutlierScheme::None),
            "ol1" => Ok(OutlierScheme::Ol1),
            "ol2" => Ok(OutlierScheme::Ol2),
            other => Err(FpcaError::Config(format!(
                "unknown outlier scheme `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub n: usize,
    pub n_points: usize,
    pub score_law: ScoreLaw,
    pub outlier_scheme: OutlierScheme,
    pub outlier_fraction: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 200,
            n_points: DEFAULT_N_POINTS,
            score_law: ScoreLaw::Gaussian,
            outlier_scheme: OutlierScheme::None,
            outlier_fraction: DEFAULT_OUTLIER_FRACTION,
            noise_sd: 0.0,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(FpcaError::Config("n must be positive".into()));
        }
        if self.n_points < 2 {
            return Err(FpcaError::Config("n_points must be at least 2".into()));
        }
        if !(0.0..0.5).contains(&self.outlier_fraction) {
            return Err(FpcaError::Config(format!(
                "outlier_fraction {} outside [0, 0.5)",
                self.outlier_fraction
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(FpcaError::Config(format!(
                "noise_sd {} invalid",
                self.noise_sd
            )));
        }
        Ok(())
    }

    /// Number of contaminated curves, `⌈fraction · n⌉`.
    pub fn n_outliers(&self) -> usize {
        match self.outlier_scheme {
            OutlierScheme::None => 0,
            _ => ceil_count(self.outlier_fraction, self.n),
        }
    }
}

pub(crate) fn ceil_count(fraction: f64, total: usize) -> usize {
    // Guard against 0.05 * 100 = 5.000000000000001.
    let raw = fraction * total as f64;
    let rounded = raw.round();
    let c = if (raw - rounded).abs() < 1e-9 {
        rounded
    } else {
        raw.ceil()
    };
    (c as usize).min(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub grid: Grid,
    pub mean: Vec<f64>,
    /// `N × 4`, column `j` is `φ_{j+1}` on the grid.
    pub eigenfunctions: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub outlier_mask: Vec<bool>,
}

impl GroundTruth {
    pub fn eigenfunction(&self, j: usize) -> Vec<f64> {
        crate::fgrid::column(&self.eigenfunctions, j)
    }

    /// Share of variance carried by the first component, `λ1 / Σλ`.
    pub fn pve1(&self) -> f64 {
        self.eigenvalues[0] / self.eigenvalues.iter().sum::<f64>()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|v| v / self.eigenvalues[0])
            .collect()
    }
}

/// Mean, Fourier eigenfunctions and eigenvalues evaluated on `grid`.
pub fn fourier_truth(grid: &Grid) -> GroundTruth {
    let s2 = 2f64.sqrt();
    let basis: [fn(f64) -> f64; 4] = [
        |t| (2.0 * PI * t).sin(),
        |t| (2.0 * PI * t).cos(),
        |t| (4.0 * PI * t).sin(),
        |t| (4.0 * PI * t).cos(),
    ];
    let pts = grid.points();
    let eigenfunctions = DMatrix::from_fn(pts.len(), 4, |i, j| s2 * basis[j](pts[i]));
    GroundTruth {
        grid: grid.clone(),
        mean: grid.evaluate(|t| 2.0 * t * (1.0 - t)),
        eigenfunctions,
        eigenvalues: TRUE_EIGENVALUES.to_vec(),
        outlier_mask: Vec::new(),
    }
}

/// `n × 4` score matrix `ξ_ij` with `E ξ = 0` and `Var ξ_j = λ_j`.
pub fn draw_scores<R: Rng + ?Sized>(law: ScoreLaw, n: usize, rng: &mut R) -> DMatrix<f64> {
    let sd: Vec<f64> = TRUE_EIGENVALUES.iter().map(|l| l.sqrt()).collect();
    let mut scores = DMatrix::zeros(n, 4);
    match law {
        ScoreLaw::Gaussian => {
            for i in 0..n {
                for j in 0..4 {
                    let z: f64 = rng.sample(StandardNormal);
                    scores[(i, j)] = sd[j] * z;
                }
            }
        }
        ScoreLaw::Frechet | ScoreLaw::Lognormal | ScoreLaw::Chisquare => {
            let (mu, sigma) = law.standardization().expect("standardised law");
            let frechet = Frechet::new(0.0, 2.0, 3.0).expect("valid Fréchet");
            let lognormal = LogNormal::new(0.0, LOGNORMAL_SIGMA).expect("valid log-normal");
            let chisq = ChiSquared::new(1.0).expect("valid chi-square");
            for i in 0..n {
                for j in 0..4 {
                    let z = match law {
                        ScoreLaw::Frechet => frechet.sample(rng),
                        ScoreLaw::Lognormal => lognormal.sample(rng),
                        _ => chisq.sample(rng),
                    };
                    scores[(i, j)] = sd[j] * (z - mu) / sigma;
                }
            }
        }
        ScoreLaw::MultivariateT => {
            // Scale matrix (ν-2)/ν · diag(λ) gives covariance diag(λ).
            let nu = MULTI_T_DF;
            let chisq = ChiSquared::new(nu).expect("valid chi-square");
            let shrink = ((nu - 2.0) / nu).sqrt();
            for i in 0..n {
                let w: f64 = chisq.sample(rng);
                let mix = (nu / w).sqrt();
                for j in 0..4 {
                    let z: f64 = rng.sample(StandardNormal);
                    scores[(i, j)] = sd[j] * shrink * z * mix;
                }
            }
        }
    }
    scores
}

/// Independent RNG stream `k` of a replicate.
pub fn replicate_rng(seed: u64, replicate: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate.wrapping_mul(3).wrapping_add(k));
    rng
}

const SCORE_STREAM: u64 = 0;
const OUTLIER_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

fn synthesize(truth: &GroundTruth, scores: &DMatrix<f64>) -> DMatrix<f64> {
    let n_points = truth.grid.n_points();
    let mut values = DMatrix::from_fn(scores.nrows(), n_points, |_, j| truth.mean[j]);
    values += scores * truth.eigenfunctions.transpose();
    values
}

/// Contaminates `⌈fraction · n⌉` curves chosen without replacement.
///
/// OL1 adds [`OL1_SHIFT`]; OL2 rebuilds the curve from its own `scores` row
/// with `ξ1 + 3√λ1` multiplying `f(t) = t` in place of `φ1`.
pub fn inject_outliers<R: Rng + ?Sized>(
    sample: &FunctionalSample,
    truth: &GroundTruth,
    scores: &DMatrix<f64>,
    scheme: OutlierScheme,
    fraction: f64,
    rng: &mut R,
) -> Result<(FunctionalSample, Vec<bool>)> {
    let n = sample.n_curves();
    if scores.nrows() != n {
        return Err(FpcaError::Dimension {
            expected: n,
            actual: scores.nrows(),
        });
    }
    let mut mask = vec![false; n];
    let count = match scheme {
        OutlierScheme::None => 0,
        _ => ceil_count(fraction, n),
    };
    if count == 0 {
        return Ok((sample.clone(), mask));
    }
    let mut values = sample.values().clone();
    let pts = truth.grid.points();
    let phi1 = truth.eigenfunction(0);
    let boost = 3.0 * truth.eigenvalues[0].sqrt();
    let mut chosen = sample_indices(rng, n, count).into_vec();
    chosen.sort_unstable();
    for i in chosen {
        mask[i] = true;
        for j in 0..pts.len() {
            match scheme {
                OutlierScheme::Ol1 => values[(i, j)] += OL1_SHIFT,
                OutlierScheme::Ol2 => {
                    let xi1 = scores[(i, 0)];
                    values[(i, j)] += (xi1 + boost) * pts[j] - xi1 * phi1[j];
                }
                OutlierScheme::None => unreachable!(),
            }
        }
    }
    Ok((FunctionalSample::new(sample.grid().clone(), values)?, mask))
}

/// Replicate 0 of `config`.
pub fn generate(config: &SimulationConfig) -> Result<(FunctionalSample, GroundTruth)> {
    generate_replicate(config, 0)
}

/// Curves for replicate `replicate`: synthesis, then contamination, then
/// pointwise noise.
pub fn generate_replicate(
    config: &SimulationConfig,
    replicate: u64,
) -> Result<(FunctionalSample, GroundTruth)> {
    config.validate()?;
    let grid = Grid::new(config.n_points)?;
    let mut truth = fourier_truth(&grid);
    let mut score_rng = replicate_rng(config.seed, replicate, SCORE_STREAM);
    let scores = draw_scores(config.score_law, config.n, &mut score_rng);
    let clean = FunctionalSample::new(grid.clone(), synthesize(&truth, &scores))?;

    let mut outlier_rng = replicate_rng(config.seed, replicate, OUTLIER_STREAM);
    let (contaminated, mask) = inject_outliers(
        &clean,
        &truth,
        &scores,
        config.outlier_scheme,
        config.outlier_fraction,
        &mut outlier_rng,
    )?;
    truth.outlier_mask = mask;

    if config.noise_sd == 0.0 {
        return Ok((contaminated, truth));
    }
    let mut noise_rng = replicate_rng(config.seed, replicate, NOISE_STREAM);
    let mut values = contaminated.into_values();
    for v in values.iter_mut() {
        let z: f64 = noise_rng.sample(StandardNormal);
        *v += config.noise_sd * z;
    }
    Ok((FunctionalSample::new(grid, values)?, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn column_moments(m: &DMatrix<f64>, j: usize) -> (f64, f64) {
        let n = m.nrows() as f64;
        let mean = m.column(j).sum() / n;
        let var = m.column(j).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn truth_on_default_grid() {
        let grid = Grid::new(101).unwrap();
        let truth = fourier_truth(&grid);
        let mid = Grid::new(2).unwrap();
        assert_eq!(fourier_truth(&mid).mean[0], 0.5);
        for a in 0..4 {
            for b in 0..4 {
                let ip = grid
                    .inner_product(&truth.eigenfunction(a), &truth.eigenfunction(b))
                    .unwrap();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-3);
            }
        }
        assert!((truth.pve1() - 2.0 / 3.75).abs() < 1e-15);
    }

    #[test]
    fn moments_of_score_laws() {
        // Variance is not checked for the Fréchet law (infinite fourth
        // moment) or the log-normal (excess kurtosis above 100): the sample
        // variance at 1e5 draws is dominated by a few extremes. Their shapes
        // are checked through quantiles instead.
        for law in ScoreLaw::ALL {
            let mut rng = replicate_rng(99, 0, 0);
            let scores = draw_scores(law, 100_000, &mut rng);
            for j in 0..4 {
                let (mean, var) = column_moments(&scores, j);
                assert!(mean.abs() < 0.03, "{law:?} col {j} mean {mean}");
                if matches!(law, ScoreLaw::Frechet | ScoreLaw::Lognormal) {
                    continue;
                }
                let rel = var / TRUE_EIGENVALUES[j] - 1.0;
                assert!(rel.abs() < 0.05, "{law:?} col {j} var rel err {rel}");
            }
        }
    }

    #[test]
    fn frechet_quantiles() {
        // P(Z ≤ z) = exp(-(z / 2)^-3) for the raw draw.
        let (mu, sigma) = ScoreLaw::Frechet.standardization().unwrap();
        let mut rng = replicate_rng(6, 0, 0);
        let scores = draw_scores(ScoreLaw::Frechet, 100_000, &mut rng);
        let s: Vec<f64> = scores.column(2).iter().map(|v| v / 0.5f64.sqrt()).collect();
        for z in [1.0, 2.0, 4.0, 8.0] {
            let p = (-(z / 2.0f64).powi(-3)).exp();
            let cut = (z - mu) / sigma;
            let frac = s.iter().filter(|&&v| v <= cut).count() as f64 / s.len() as f64;
            assert!((frac - p).abs() < 0.01, "z={z}: {frac} vs {p}");
        }
    }

    #[test]
    fn chisquare_skewness() {
        let mut rng = replicate_rng(7, 0, 0);
        let scores = draw_scores(ScoreLaw::Chisquare, 100_000, &mut rng);
        let s: Vec<f64> = scores.column(0).iter().map(|v| v / 2f64.sqrt()).collect();
        let n = s.len() as f64;
        let m = s.iter().sum::<f64>() / n;
        let m2 = s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let m3 = s.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
        let skew = m3 / m2.powf(1.5);
        assert!((skew / 8f64.sqrt() - 1.0).abs() < 0.1, "{skew}");
    }

    #[test]
    fn frechet_constants_match_monte_carlo() {
        let (mu, sigma) = ScoreLaw::Frechet.standardization().unwrap();
        let dist = Frechet::new(0.0, 2.0, 3.0).unwrap();
        let mut rng = replicate_rng(1234, 0, 0);
        let n = 10_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z: f64 = dist.sample(&mut rng);
            s1 += z;
            s2 += z * z;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - mu).abs() < 1e-2, "{mean} vs {mu}");
        assert!(
            (var - sigma * sigma).abs() < 1e-2 * sigma * sigma,
            "{var} vs {}",
            sigma * sigma
        );
    }

    #[test]
    fn lognormal_quantiles() {
        // Standardised draws must satisfy P(S ≤ (e^q - √e)/sd) = Φ(q).
        let (mu, sigma) = ScoreLaw::Lognormal.standardization().unwrap();
        let mut rng = replicate_rng(5, 0, 0);
        let scores = draw_scores(ScoreLaw::Lognormal, 100_000, &mut rng);
        let s: Vec<f64> = scores.column(1).iter().copied().collect();
        for (q, p) in [
            (0.0, 0.5),
            (1.0, 0.841_344_746),
            (-1.0, 0.158_655_254),
            (2.0, 0.977_249_868),
        ] {
            let cut = (f64::exp(q) - mu) / sigma;
            let frac = s.iter().filter(|&&v| v <= cut).count() as f64 / s.len() as f64;
            assert!((frac - p).abs() < 0.01, "q={q}: {frac} vs {p}");
        }
        assert!((mu - E.sqrt()).abs() < 1e-12);
        assert!((sigma - ((E - 1.0) * E).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn determinism_and_outlier_counts() {
        let cfg = SimulationConfig {
            n: 100,
            outlier_scheme: OutlierScheme::Ol1,
            seed: 3,
            ..Default::default()
        };
        let (a, ta) = generate(&cfg).unwrap();
        let (b, _) = generate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta.outlier_mask.iter().filter(|&&m| m).count(), 5);
        let (c, _) = generate_replicate(&cfg, 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ol1_shift_is_constant_five() {
        let base = SimulationConfig {
            n: 40,
            seed: 8,
            ..Default::default()
        };
        let (clean, _) = generate(&base).unwrap();
        let (dirty, truth) = generate(&SimulationConfig {
            outlier_scheme: OutlierScheme::Ol1,
            ..base.clone()
        })
        .unwrap();
        for i in 0..40 {
            let d: Vec<f64> = dirty
                .curve(i)
                .iter()
                .zip(clean.curve(i))
                .map(|(a, b)| a - b)
                .collect();
            if truth.outlier_mask[i] {
                assert!(d.iter().all(|v| (v - 5.0).abs() < 1e-12));
            } else {
                assert!(d.iter().all(|&v| v == 0.0));
            }
        }
        let zero = SimulationConfig {
            outlier_scheme: OutlierScheme::Ol1,
            outlier_fraction: 0.0,
            ..base
        };
        assert_eq!(generate(&zero).unwrap().0, clean);
    }

    #[test]
    fn ol2_replaces_first_component() {
        let base = SimulationConfig {
            n: 30,
            seed: 21,
            ..Default::default()
        };
        let grid = Grid::new(101).unwrap();
        let truth = fourier_truth(&grid);
        let scores = draw_scores(ScoreLaw::Gaussian, 30, &mut replicate_rng(base.seed, 0, 0));
        let (clean, _) = generate(&base).unwrap();
        let (dirty, t2) = generate(&SimulationConfig {
            outlier_scheme: OutlierScheme::Ol2,
            ..base
        })
        .unwrap();
        assert_eq!(t2.outlier_mask.iter().filter(|&&m| m).count(), 2);
        let phi1 = truth.eigenfunction(0);
        for i in (0..30).filter(|&i| t2.outlier_mask[i]) {
            let xi1 = scores[(i, 0)];
            for (j, &t) in grid.points().iter().enumerate() {
                let want = (xi1 + 3.0 * 2f64.sqrt()) * t - xi1 * phi1[j];
                let got = dirty.values()[(i, j)] - clean.values()[(i, j)];
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_does_not_move_contamination() {
        let cfg = SimulationConfig {
            n: 60,
            outlier_scheme: OutlierScheme::Ol1,
            seed: 4,
            ..Default::default()
        };
        let (_, quiet) = generate(&cfg).unwrap();
        let (_, noisy) = generate(&SimulationConfig {
            noise_sd: 1.0,
            ..cfg
        })
        .unwrap();
        assert_eq!(quiet.outlier_mask, noisy.outlier_mask);
    }

    #[test]
    fn noise_is_independent_of_signal() {
        let cfg = SimulationConfig {
            n: 1000,
            noise_sd: 1.0,
            seed: 17,
            ..Default::default()
        };
        let (noisy, _) = generate(&cfg).unwrap();
        let (clean, _) = generate(&SimulationConfig {
            noise_sd: 0.0,
            ..cfg
        })
        .unwrap();
        let eps: Vec<f64> = noisy
            .values()
            .iter()
            .zip(clean.values().iter())
            .map(|(a, b)| a - b)
            .collect();
        let sig: Vec<f64> = clean.values().iter().copied().collect();
        let n = eps.len() as f64;
        let (me, ms) = (eps.iter().sum::<f64>() / n, sig.iter().sum::<f64>() / n);
        let cov: f64 = eps
            .iter()
            .zip(&sig)
            .map(|(a, b)| (a - me) * (b - ms))
            .sum::<f64>()
            / n;
        let ve = eps.iter().map(|a| (a - me).powi(2)).sum::<f64>() / n;
        let vs = sig.iter().map(|b| (b - ms).powi(2)).sum::<f64>() / n;
        let corr = cov / (ve * vs).sqrt();
        assert!(corr.abs() < 0.02, "{corr}");
        assert!((ve.sqrt() - 1.0).abs() < 0.05);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = SimulationConfig {
            outlier_fraction: 0.5,
            ..Default::default()
        };
        assert!(generate(&bad).is_err());
        let bad = SimulationConfig {
            noise_sd: -1.0,
            ..Default::default()
        };
        assert!(generate(&bad).is_err());
    }

    #[test]
    fn ceil_count_handles_representation_error() {
        assert_eq!(ceil_count(0.05, 100), 5);
        assert_eq!(ceil_count(0.05, 200), 10);
        assert_eq!(ceil_count(0.05, 30), 2);
        assert_eq!(ceil_count(0.0, 30), 0);
    }
}
