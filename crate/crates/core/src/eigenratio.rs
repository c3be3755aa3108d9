//! Relative eigenvalue sizes `λ_j(Γ) / λ_1(Γ)` from the PASS spectrum.
//!
//! The PASS eigenvalues satisfy
//!
//! ```text
//! λ_j(K) = E[ λ_j(Γ) U_j² / Σ_i λ_i(Γ) U_i² ]
//! ```
//!
//! which pins the `λ_j(Γ)` only up to a common scale. Fixing `λ_1(Γ) = 1`
//! and truncating at `Q` components gives the fixed-point map
//!
//! ```text
//! λ_k ← (λ_k(K) / λ_1(K)) · f_1(λ) / f_k(λ),   f_k(λ) = E[ U_k² / (U_1² + Σ_{l≥2} λ_l U_l²) ]
//! ```
//!
//! [`eigenratio_mc`] estimates `f_k` by averaging over standardised pairwise
//! projections ([`PairScores`]); [`eigenratio_elliptical`] evaluates it with
//! the Gaussian one-dimensional integral ([`elliptical_expectation`]).

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{FpcaError, Result};
use crate::estimators::EigenSystem;
use crate::fgrid::FunctionalSample;
use crate::quadrature::{integrate_adaptive, integrate_fixed};
use crate::simgen::ceil_count;

pub const DEFAULT_TRIM_FRACTION: f64 = 0.02;
pub const MAX_TRIM_FRACTION: f64 = 0.1;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;
/// Upper bound reported for `1 / x_k` when `x_k` is (numerically) zero.
pub const MARGIN_CAP: f64 = 1e12;

/// Standardised projections `V_{ij,l}` of every pairwise difference onto
/// the leading eigenfunctions.
///
/// For each component the `⌈trim · P⌉` pairs with the largest absolute
/// projection are trimmed, and `s_l` is the mean squared projection of the
/// remaining pairs. The fixed-point averages run over pairs retained in
/// every component.
#[derive(Debug, Clone)]
pub struct PairScores {
    /// `P × q`, already divided by `√s_l`.
    pub scores: DMatrix<f64>,
    pub standardizers: Vec<f64>,
    pub trim_fraction: f64,
    /// Per component, whether each pair survived trimming.
    pub retained: Vec<Vec<bool>>,
    /// Pairs retained in every component.
    pub joint: Vec<usize>,
}

impl PairScores {
    pub fn q(&self) -> usize {
        self.scores.ncols()
    }

    pub fn n_pairs(&self) -> usize {
        self.scores.nrows()
    }

    /// Trims and standardises raw pair projections (`P × q`).
    pub fn from_projections(projections: DMatrix<f64>, trim_fraction: f64) -> Result<Self> {
        if !(0.0..=MAX_TRIM_FRACTION).contains(&trim_fraction) {
            return Err(FpcaError::Config(format!(
                "trim fraction {trim_fraction} outside [0, {MAX_TRIM_FRACTION}]"
            )));
        }
        let (n_pairs, q) = projections.shape();
        if n_pairs == 0 || q == 0 {
            return Err(FpcaError::InsufficientSample {
                needed: 1,
                got: n_pairs,
            });
        }
        // Never trim every pair away.
        let n_trim = ceil_count(trim_fraction, n_pairs).min(n_pairs - 1);
        let mut scores = projections;
        let mut standardizers = Vec::with_capacity(q);
        let mut retained = Vec::with_capacity(q);
        for l in 0..q {
            let mut order: Vec<usize> = (0..n_pairs).collect();
            let col = scores.column(l);
            order.sort_by(|&a, &b| col[b].abs().total_cmp(&col[a].abs()).then(a.cmp(&b)));
            let mut keep = vec![true; n_pairs];
            for &idx in order.iter().take(n_trim) {
                keep[idx] = false;
            }
            let kept = n_pairs - n_trim;
            let s: f64 = (0..n_pairs)
                .filter(|&p| keep[p])
                .map(|p| col[p] * col[p])
                .sum::<f64>()
                / kept as f64;
            if !(s > 0.0 && s.is_finite()) {
                return Err(FpcaError::DegenerateComponent(l));
            }
            let inv = s.sqrt().recip();
            scores.column_mut(l).iter_mut().for_each(|v| *v *= inv);
            standardizers.push(s);
            retained.push(keep);
        }
        let joint = (0..n_pairs)
            .filter(|&p| retained.iter().all(|k| k[p]))
            .collect();
        Ok(Self {
            scores,
            standardizers,
            trim_fraction,
            retained,
            joint,
        })
    }

    /// `f_k(λ)` for every `k`, averaged over the jointly retained pairs.
    /// `ratios[0]` is ignored (taken as 1).
    pub fn expectations(&self, ratios: &[f64]) -> Vec<f64> {
        let q = self.q();
        let mut acc = vec![0.0; q];
        let mut sq = vec![0.0; q];
        for &p in &self.joint {
            for l in 0..q {
                let v = self.scores[(p, l)];
                sq[l] = v * v;
            }
            let denom = sq[0] + (1..q).map(|l| ratios[l] * sq[l]).sum::<f64>();
            if denom <= 0.0 {
                continue;
            }
            for l in 0..q {
                acc[l] += sq[l] / denom;
            }
        }
        let m = self.joint.len() as f64;
        acc.iter().map(|a| a / m).collect()
    }
}

/// Projects every pairwise difference `x_i - x_j` (`i < j`) onto the first
/// `q` eigenfunctions, then trims and standardises.
pub fn pair_scores(
    sample: &FunctionalSample,
    eigensystem: &EigenSystem,
    q: usize,
    trim_fraction: f64,
) -> Result<PairScores> {
    let n = sample.n_curves();
    if n < 2 {
        return Err(FpcaError::InsufficientSample { needed: 2, got: n });
    }
    if q == 0 || q > eigensystem.q() {
        return Err(FpcaError::InvalidRank {
            q,
            max: eigensystem.q(),
        });
    }
    let phi = eigensystem.eigenfunctions.columns(0, q);
    // Curve projections; differences of projections are projections of
    // differences.
    let proj = sample.values() * phi * sample.grid().spacing();
    let n_pairs = n * (n - 1) / 2;
    let mut pairs = DMatrix::zeros(n_pairs, q);
    let mut row = 0;
    for i in 0..n {
        for j in i + 1..n {
            for l in 0..q {
                pairs[(row, l)] = proj[(i, l)] - proj[(j, l)];
            }
            row += 1;
        }
    }
    PairScores::from_projections(pairs, trim_fraction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioMethod {
    MonteCarlo,
    Elliptical,
    /// Plain ratios of a covariance spectrum, no fixed point.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenratioEstimate {
    /// `λ_j(Γ) / λ_1(Γ)`; the first entry is exactly 1.
    pub ratios: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_delta: f64,
    pub method: RatioMethod,
}

impl EigenratioEstimate {
    /// Share of variance explained by the first component, `1 / Σ ratios`.
    pub fn pve1(&self) -> f64 {
        1.0 / self.ratios.iter().sum::<f64>()
    }
}

/// Solver settings shared by both fixed-point routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

fn check_spectrum(pass_eigenvalues: &[f64], init: &[f64]) -> Result<()> {
    if pass_eigenvalues.is_empty() {
        return Err(FpcaError::Domain("empty PASS spectrum".into()));
    }
    if init.len() != pass_eigenvalues.len() {
        return Err(FpcaError::Dimension {
            expected: pass_eigenvalues.len(),
            actual: init.len(),
        });
    }
    if pass_eigenvalues
        .iter()
        .any(|&v| !(v > 0.0 && v.is_finite()))
    {
        return Err(FpcaError::Domain(
            "PASS eigenvalues must be positive".into(),
        ));
    }
    if init.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(FpcaError::Domain("initial ratios must be positive".into()));
    }
    Ok(())
}

/// Iterates `λ_k ← (μ_k / μ_1) f_1(λ) / f_k(λ)` from `init` until the
/// max-norm step is at most `tol`. Running out of iterations is reported
/// through `converged = false`, never as an error.
fn fixed_point(
    pass_eigenvalues: &[f64],
    init: &[f64],
    opts: FixedPointOptions,
    method: RatioMethod,
    mut expectations: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<EigenratioEstimate> {
    check_spectrum(pass_eigenvalues, init)?;
    let q = pass_eigenvalues.len();
    let base = pass_eigenvalues[0];
    let relative: Vec<f64> = pass_eigenvalues.iter().map(|v| v / base).collect();
    let mut current: Vec<f64> = init.iter().map(|v| v / init[0]).collect();
    current[0] = 1.0;

    let mut delta = f64::INFINITY;
    for iteration in 1..=opts.max_iter {
        let f = expectations(&current)?;
        let mut next = vec![1.0; q];
        for k in 1..q {
            next[k] = relative[k] * f[0] / f[k];
        }
        if next.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Ok(EigenratioEstimate {
                ratios: current,
                iterations: iteration,
                converged: false,
                final_delta: f64::INFINITY,
                method,
            });
        }
        delta = next
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        current = next;
        if delta <= opts.tol {
            return Ok(EigenratioEstimate {
                ratios: current,
                iterations: iteration,
                converged: true,
                final_delta: delta,
                method,
            });
        }
    }
    Ok(EigenratioEstimate {
        ratios: current,
        iterations: opts.max_iter,
        converged: false,
        final_delta: delta,
        method,
    })
}

/// Monte Carlo eigenratio solver over pair scores.
pub fn eigenratio_mc(
    pair_scores: &PairScores,
    pass_eigenvalues: &[f64],
    init: &[f64],
    opts: FixedPointOptions,
) -> Result<EigenratioEstimate> {
    if pass_eigenvalues.len() != pair_scores.q() {
        return Err(FpcaError::Dimension {
            expected: pair_scores.q(),
            actual: pass_eigenvalues.len(),
        });
    }
    fixed_point(pass_eigenvalues, init, opts, RatioMethod::MonteCarlo, |r| {
        Ok(pair_scores.expectations(r))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    #[default]
    Adaptive,
    /// 256 panels of 8-point Gauss-Legendre (2048 nodes).
    Fixed2048,
}

/// `E[U_j² / Σ_k r_k U_k²]` for i.i.d. standard Gaussian `U` (0-based `j`),
///
/// ```text
/// ½ ∫_0^∞ (1 + r_j v)^{-1} Π_k (1 + r_k v)^{-1/2} dv
/// ```
///
/// evaluated after substituting `v = t / (1 - t)`. The product runs over
/// every coordinate including the first.
pub fn elliptical_expectation(ratios: &[f64], j: usize) -> Result<f64> {
    elliptical_expectation_with(ratios, j, Quadrature::Adaptive)
}

pub fn elliptical_expectation_with(ratios: &[f64], j: usize, rule: Quadrature) -> Result<f64> {
    if j >= ratios.len() {
        return Err(FpcaError::Dimension {
            expected: ratios.len(),
            actual: j + 1,
        });
    }
    if ratios.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(FpcaError::Domain("ratios must be positive".into()));
    }
    let rj = ratios[j];
    let integrand = |t: f64| {
        let one_minus = 1.0 - t;
        let v = t / one_minus;
        let mut log_prod = -(rj * v).ln_1p();
        for &r in ratios {
            log_prod -= 0.5 * (r * v).ln_1p();
        }
        0.5 * log_prod.exp() / (one_minus * one_minus)
    };
    let value = match rule {
        Quadrature::Adaptive => integrate_adaptive(integrand, 0.0, 1.0, 1e-12, 1e-10, 2000).0,
        Quadrature::Fixed2048 => integrate_fixed(integrand, 0.0, 1.0, 256, 8),
    };
    Ok(value)
}

/// Fixed-point solver with the Gaussian integral in place of pair
/// averages.
pub fn eigenratio_elliptical(
    pass_eigenvalues: &[f64],
    init: &[f64],
    opts: FixedPointOptions,
) -> Result<EigenratioEstimate> {
    fixed_point(pass_eigenvalues, init, opts, RatioMethod::Elliptical, |r| {
        (0..r.len()).map(|j| elliptical_expectation(r, j)).collect()
    })
}

/// Sample version of the local contraction condition for the fixed-point
/// map at `x_star = (λ_2, …, λ_Q) / λ_1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceDiagnostic {
    /// Row sums of `|J_kl| / x_k` for the fixed-point map, one per ratio.
    pub lhs: Vec<f64>,
    /// `1 / x_k`, capped at [`MARGIN_CAP`].
    pub bound: Vec<f64>,
    /// `bound - lhs`; all positive means the map contracts near `x_star`.
    pub margins: Vec<f64>,
}

impl ConvergenceDiagnostic {
    pub fn holds(&self) -> bool {
        self.margins.iter().all(|&m| m > 0.0)
    }
}

pub fn convergence_condition(
    pair_scores: &PairScores,
    x_star: &[f64],
) -> Result<ConvergenceDiagnostic> {
    let q = pair_scores.q();
    if x_star.len() + 1 != q {
        return Err(FpcaError::Dimension {
            expected: q - 1,
            actual: x_star.len(),
        });
    }
    if x_star.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(FpcaError::Domain("x_star must be nonnegative".into()));
    }
    let m = q - 1;
    // first[l] = E[U1² U²_{l+1} / D²], cross[k][l] = E[U²_{k+1} U²_{l+1} / D²],
    // lin[k] = E[U²_{k} / D] with k = 0 the first coordinate.
    let mut first = vec![0.0; m];
    let mut cross = vec![vec![0.0; m]; m];
    let mut lin = vec![0.0; q];
    let mut sq = vec![0.0; q];
    for &p in &pair_scores.joint {
        for l in 0..q {
            let v = pair_scores.scores[(p, l)];
            sq[l] = v * v;
        }
        let d = sq[0] + (0..m).map(|i| x_star[i] * sq[i + 1]).sum::<f64>();
        if d <= 0.0 {
            continue;
        }
        let d2 = d * d;
        for l in 0..q {
            lin[l] += sq[l] / d;
        }
        for l in 0..m {
            first[l] += sq[0] * sq[l + 1] / d2;
            for k in 0..m {
                cross[k][l] += sq[k + 1] * sq[l + 1] / d2;
            }
        }
    }
    let count = pair_scores.joint.len() as f64;
    if count == 0.0 || lin.iter().any(|&v| v <= 0.0) {
        return Err(FpcaError::DegenerateComponent(
            lin.iter().position(|&v| v <= 0.0).unwrap_or(0),
        ));
    }
    let mut lhs = Vec::with_capacity(m);
    let mut bound = Vec::with_capacity(m);
    for k in 0..m {
        let s: f64 = (0..m)
            .map(|l| (-first[l] / lin[0] + cross[k][l] / lin[k + 1]).abs())
            .sum();
        lhs.push(s);
        bound.push(if x_star[k] > 0.0 {
            (1.0 / x_star[k]).min(MARGIN_CAP)
        } else {
            MARGIN_CAP
        });
    }
    let margins = bound.iter().zip(&lhs).map(|(b, l)| b - l).collect();
    Ok(ConvergenceDiagnostic {
        lhs,
        bound,
        margins,
    })
}

/// Cumulative share `Σ_{i≤Q} λ_i / Σ_i λ_i`.
pub fn cpve(eigenvalues: &[f64], big_q: usize) -> Result<f64> {
    if big_q == 0 || big_q > eigenvalues.len() {
        return Err(FpcaError::InvalidRank {
            q: big_q,
            max: eigenvalues.len(),
        });
    }
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return Err(FpcaError::Domain("eigenvalues sum to zero".into()));
    }
    Ok(eigenvalues[..big_q].iter().sum::<f64>() / total)
}

/// Smallest `Q` whose leading PASS eigenvalues reach `threshold`.
///
/// PASS eigenvalues are already shares of the total (the full spectrum sums
/// to one), so the cumulative sum is compared against `threshold` directly
/// and a truncated spectrum may fall short.
pub fn rank_select(pass_eigenvalues: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(FpcaError::Domain(format!(
            "threshold {threshold} outside (0, 1)"
        )));
    }
    let mut acc = 0.0;
    for (i, v) in pass_eigenvalues.iter().enumerate() {
        acc += v;
        if acc >= threshold {
            return Ok(i + 1);
        }
    }
    Err(FpcaError::UnreachableThreshold {
        threshold,
        reached: acc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_projections(n_pairs: usize, sd: &[f64], seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n_pairs, sd.len(), |_, l| {
            let z: f64 = rng.sample(StandardNormal);
            z * sd[l]
        })
    }

    #[test]
    fn single_pair_standardises_to_one() {
        let ps =
            PairScores::from_projections(DMatrix::from_row_slice(1, 3, &[0.3, -2.0, 5.0]), 0.0)
                .unwrap();
        for l in 0..3 {
            assert!((ps.scores[(0, l)].powi(2) - 1.0).abs() < 1e-12);
        }
        // A 2% trim of one pair keeps it.
        let ps = PairScores::from_projections(DMatrix::from_row_slice(1, 2, &[0.3, -2.0]), 0.02)
            .unwrap();
        assert_eq!(ps.joint, vec![0]);
    }

    #[test]
    fn trimming_counts_and_unit_mean_square() {
        let raw = gaussian_projections(19_900, &[1.4, 1.0, 0.7, 0.5], 2);
        for trim in [0.0, 0.05] {
            let ps = PairScores::from_projections(raw.clone(), trim).unwrap();
            let removed = (0.05f64 * 19_900.0).ceil() as usize;
            for l in 0..4 {
                let dropped = ps.retained[l].iter().filter(|k| !**k).count();
                assert_eq!(dropped, if trim > 0.0 { removed } else { 0 });
                let kept: Vec<f64> = (0..19_900)
                    .filter(|&p| ps.retained[l][p])
                    .map(|p| ps.scores[(p, l)].powi(2))
                    .collect();
                let mean = kept.iter().sum::<f64>() / kept.len() as f64;
                assert!((mean - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_component_is_degenerate() {
        let mut raw = gaussian_projections(50, &[1.0, 1.0], 3);
        raw.column_mut(1).fill(0.0);
        assert!(matches!(
            PairScores::from_projections(raw, 0.0),
            Err(FpcaError::DegenerateComponent(1))
        ));
    }

    #[test]
    fn equal_spectrum_symmetric_scores_fixed_point() {
        let raw = DMatrix::from_fn(40, 3, |p, _| (p as f64 + 1.0).sin());
        let ps = PairScores::from_projections(raw, 0.0).unwrap();
        let est = eigenratio_mc(&ps, &[0.3; 3], &[1.0; 3], FixedPointOptions::default()).unwrap();
        assert!(est.converged);
        assert_eq!(est.iterations, 1);
        assert!(est.ratios.iter().all(|&r| (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn scale_invariance_in_pass_eigenvalues() {
        let raw = gaussian_projections(5000, &[1.4, 1.0, 0.7], 5);
        let ps = PairScores::from_projections(raw, 0.02).unwrap();
        let mu = [0.5, 0.3, 0.2];
        let a = eigenratio_mc(&ps, &mu, &[1.0; 3], FixedPointOptions::default()).unwrap();
        let scaled: Vec<f64> = mu.iter().map(|v| v * 7.3).collect();
        let b = eigenratio_mc(&ps, &scaled, &[1.0; 3], FixedPointOptions::default()).unwrap();
        for (x, y) in a.ratios.iter().zip(&b.ratios) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let raw = gaussian_projections(500, &[1.0, 1.0, 1.0], 9);
        let ps = PairScores::from_projections(raw, 0.0).unwrap();
        let opts = FixedPointOptions {
            tol: 1e-300,
            max_iter: 2,
        };
        let est = eigenratio_mc(&ps, &[0.6, 0.3, 0.1], &[1.0; 3], opts).unwrap();
        assert!(!est.converged);
        assert_eq!(est.iterations, 2);
        assert_eq!(est.ratios[0], 1.0);
    }

    #[test]
    fn elliptical_closed_forms() {
        assert!((elliptical_expectation(&[1.0, 1.0], 0).unwrap() - 0.5).abs() < 1e-10);
        // Two coordinates: E[U1² / (U1² + x U2²)] = 1 / (1 + √x).
        for x in [1e-10, 1e-4, 0.01, 0.5, 0.9, 3.0] {
            let v = elliptical_expectation(&[1.0, x], 0).unwrap();
            let want = 1.0 / (1.0 + x.sqrt());
            assert!((v - want).abs() < 1e-8, "x={x}: {v} vs {want}");
            let f = elliptical_expectation_with(&[1.0, x], 0, Quadrature::Fixed2048).unwrap();
            if x >= 0.01 {
                assert!((f - want).abs() < 1e-8, "fixed x={x}: {f}");
            }
        }
        assert!(elliptical_expectation(&[1.0, 0.0], 0).is_err());
        assert!(elliptical_expectation(&[1.0, 0.5], 2).is_err());
    }

    #[test]
    fn elliptical_weights_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let q = rng.random_range(2..7);
            let mut r: Vec<f64> = (0..q).map(|_| rng.random_range(0.01..1.0)).collect();
            r[0] = 1.0;
            let total: f64 = (0..q)
                .map(|j| r[j] * elliptical_expectation(&r, j).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-6, "{total}");
        }
    }

    #[test]
    fn equal_spectrum_gives_unit_ratios() {
        let est = eigenratio_elliptical(
            &[0.25; 4],
            &[1.0, 0.5, 0.2, 0.1],
            FixedPointOptions::default(),
        )
        .unwrap();
        assert!(est.converged);
        for r in &est.ratios {
            assert!((r - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn fixed_point_residence() {
        let mu = [0.45, 0.3, 0.17, 0.08];
        let opts = FixedPointOptions::default();
        let est = eigenratio_elliptical(&mu, &[1.0; 4], opts).unwrap();
        assert!(est.converged);
        let f: Vec<f64> = (0..4)
            .map(|j| elliptical_expectation(&est.ratios, j).unwrap())
            .collect();
        for k in 1..4 {
            let again = mu[k] / mu[0] * f[0] / f[k];
            assert!((again - est.ratios[k]).abs() <= opts.tol);
        }
        for w in est.ratios.windows(2) {
            assert!(w[0] >= w[1] - opts.tol);
        }
    }

    #[test]
    fn cpve_cases() {
        let l = [2.0, 1.0, 0.5, 0.25];
        assert!((cpve(&l, 1).unwrap() - 2.0 / 3.75).abs() < 1e-15);
        assert!((cpve(&l, 4).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cpve(&[1.0, 0.0, 0.0], 1).unwrap(), 1.0);
        assert!(cpve(&[0.0, 0.0], 1).is_err());
        assert!(cpve(&l, 5).is_err());
    }

    #[test]
    fn rank_select_cases() {
        assert_eq!(rank_select(&[0.5, 0.3, 0.15, 0.05], 0.9).unwrap(), 3);
        assert!(matches!(
            rank_select(&[0.5, 0.3], 0.99),
            Err(FpcaError::UnreachableThreshold { .. })
        ));
        assert!(rank_select(&[0.5], 1.0).is_err());
    }

    #[test]
    fn diagnostic_symmetric_components_share_margins() {
        let raw = gaussian_projections(200_000, &[1.0, 0.7, 0.7], 14);
        let ps = PairScores::from_projections(raw, 0.0).unwrap();
        let d = convergence_condition(&ps, &[0.5, 0.5]).unwrap();
        assert!((d.margins[0] - d.margins[1]).abs() < 2e-2, "{d:?}");
        assert!(d.holds());
    }

    #[test]
    fn diagnostic_extremes() {
        let raw = gaussian_projections(20_000, &[1.0, 1.0, 1.0], 12);
        let ps = PairScores::from_projections(raw, 0.0).unwrap();
        let d = convergence_condition(&ps, &[0.0, 0.0]).unwrap();
        assert_eq!(d.bound, vec![MARGIN_CAP, MARGIN_CAP]);
        assert!(d.holds());

        // Q = 2, x = 1: U2² / D ~ Beta(1/2, 1/2), so the left side is
        // |-(1/8)/(1/2) + (3/8)/(1/2)| = 1/2.
        let raw = gaussian_projections(200_000, &[1.0, 1.0], 13);
        let ps = PairScores::from_projections(raw, 0.0).unwrap();
        let d = convergence_condition(&ps, &[1.0]).unwrap();
        assert_eq!(d.margins.len(), 1);
        assert!((d.lhs[0] - 0.5).abs() < 5e-3, "{d:?}");
        assert!((d.margins[0] - 0.5).abs() < 5e-3);
    }
}
