//! End-to-end fitting: estimator × smoothing scheme × eigenratio solver.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::eigenratio::{
    eigenratio_elliptical, eigenratio_mc, pair_scores, EigenratioEstimate, FixedPointOptions,
    RatioMethod, DEFAULT_MAX_ITER, DEFAULT_TOL, DEFAULT_TRIM_FRACTION,
};
use crate::error::{FpcaError, Result};
use crate::estimators::{
    eigendecompose, pass_covariance, sample_covariance, spatial_median, spherical_covariance,
    CovarianceSurface, EigenSystem, MEDIAN_MAX_ITER, MEDIAN_TOL,
};
use crate::fgrid::FunctionalSample;
use crate::smoothing::{
    presmooth, remove_diagonal, smooth_surface_with, Penalty, SmoothingScheme, SmoothingSpec,
    SurfaceSmoother, DEFAULT_BASIS_SIZE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Pass,
    Classical,
    Mspc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothing {
    None,
    PreSmooth,
    SmoothCf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioSolver {
    /// Pair-average fixed point on PASS eigenvalues.
    Mc,
    /// Gaussian-integral fixed point on PASS eigenvalues.
    Elliptical,
    /// Ratios of the estimator's own eigenvalues.
    Direct,
    None,
}

/// One benchmarked or fitted method, written `estimator[/smoothing[/ratio]]`
/// (e.g. `pass`, `classical/smooth-cf`, `pass/none/elliptical`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MethodSpec {
    pub estimator: Estimator,
    pub smoothing: Smoothing,
    pub ratio: RatioSolver,
}

impl MethodSpec {
    pub fn new(estimator: Estimator, smoothing: Smoothing, ratio: RatioSolver) -> Result<Self> {
        let spec = Self {
            estimator,
            smoothing,
            ratio,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn default_ratio(estimator: Estimator) -> RatioSolver {
        match estimator {
            Estimator::Pass => RatioSolver::Mc,
            Estimator::Classical => RatioSolver::Direct,
            Estimator::Mspc => RatioSolver::None,
        }
    }

    fn validate(&self) -> Result<()> {
        use Estimator::*;
        use RatioSolver::*;
        match (self.estimator, self.ratio) {
            (Pass, Mc | Elliptical | None) | (Classical, Direct | None) | (Mspc, None) => {}
            (e, r) => {
                return Err(FpcaError::Config(format!(
                    "ratio solver {} does not apply to {}",
                    r.name(),
                    e.name()
                )))
            }
        }
        if self.estimator == Mspc && self.smoothing == Smoothing::SmoothCf {
            return Err(FpcaError::Config("mspc supports only pre-smoothing".into()));
        }
        Ok(())
    }
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Pass => "pass",
            Estimator::Classical => "classical",
            Estimator::Mspc => "mspc",
        }
    }
}

impl Smoothing {
    pub fn name(self) -> &'static str {
        match self {
            Smoothing::None => "none",
            Smoothing::PreSmooth => "pre-smooth",
            Smoothing::SmoothCf => "smooth-cf",
        }
    }
}

impl RatioSolver {
    pub fn name(self) -> &'static str {
        match self {
            RatioSolver::Mc => "mc",
            RatioSolver::Elliptical => "elliptical",
            RatioSolver::Direct => "direct",
            RatioSolver::None => "none",
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}",
            self.estimator.name(),
            self.smoothing.name(),
            self.ratio.name()
        )
    }
}

impl FromStr for Estimator {
    type Err = FpcaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pass" => Ok(Estimator::Pass),
            "classical" | "cov" => Ok(Estimator::Classical),
            "mspc" => Ok(Estimator::Mspc),
            _ => Err(FpcaError::Config(format!("unknown estimator `{s}`"))),
        }
    }
}

impl FromStr for Smoothing {
    type Err = FpcaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Smoothing::None),
            "pre-smooth" | "presmooth" => Ok(Smoothing::PreSmooth),
            "smooth-cf" => Ok(Smoothing::SmoothCf),
            _ => Err(FpcaError::Config(format!("unknown smoothing scheme `{s}`"))),
        }
    }
}

impl FromStr for RatioSolver {
    type Err = FpcaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" | "monte-carlo" => Ok(RatioSolver::Mc),
            "elliptical" => Ok(RatioSolver::Elliptical),
            "direct" => Ok(RatioSolver::Direct),
            "none" => Ok(RatioSolver::None),
            _ => Err(FpcaError::Config(format!("unknown ratio solver `{s}`"))),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = FpcaError;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split('/').collect();
        if parts.is_empty() || parts.len() > 3 || parts[0].is_empty() {
            return Err(FpcaError::Config(format!("malformed method `{s}`")));
        }
        let estimator: Estimator = parts[0].parse()?;
        let smoothing = match parts.get(1) {
            Some(p) => p.parse()?,
            None => Smoothing::None,
        };
        let ratio = match parts.get(2) {
            Some(p) => p.parse()?,
            None => MethodSpec::default_ratio(estimator),
        };
        MethodSpec::new(estimator, smoothing, ratio)
    }
}

impl Serialize for MethodSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MethodSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Tuning shared by all methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Number of components retained.
    pub q: usize,
    pub trim_fraction: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub basis_size: usize,
    pub penalty: Penalty,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            q: 4,
            trim_fraction: DEFAULT_TRIM_FRACTION,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            basis_size: DEFAULT_BASIS_SIZE,
            penalty: Penalty::Auto,
        }
    }
}

impl FitOptions {
    fn smoothing_spec(&self, scheme: SmoothingScheme) -> SmoothingSpec {
        SmoothingSpec {
            scheme,
            penalty: self.penalty,
            basis_size: self.basis_size,
        }
    }

    fn fixed_point(&self) -> FixedPointOptions {
        FixedPointOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub method: MethodSpec,
    pub eigensystem: EigenSystem,
    pub ratios: Option<EigenratioEstimate>,
    /// Initial ratios handed to the fixed-point solver.
    pub init: Option<Vec<f64>>,
}

impl FitResult {
    /// First-component share of variance from the ratio vector, if any.
    pub fn pve1(&self) -> Option<f64> {
        self.ratios.as_ref().map(|r| r.pve1())
    }
}

/// Memoises the expensive intermediate products for one sample so several
/// methods can share them.
pub struct FitContext<'a> {
    raw: &'a FunctionalSample,
    opts: FitOptions,
    smoother: Option<&'a SurfaceSmoother>,
    presmoothed: Option<FunctionalSample>,
    surfaces: HashMap<(Estimator, Smoothing), CovarianceSurface>,
}

impl<'a> FitContext<'a> {
    pub fn new(raw: &'a FunctionalSample, opts: FitOptions) -> Self {
        Self {
            raw,
            opts,
            smoother: None,
            presmoothed: None,
            surfaces: HashMap::new(),
        }
    }

    /// Reuses a prebuilt surface smoother (must match grid and basis size).
    pub fn with_smoother(mut self, smoother: &'a SurfaceSmoother) -> Self {
        self.smoother = Some(smoother);
        self
    }

    fn curves(&mut self, smoothing: Smoothing) -> Result<&FunctionalSample> {
        if smoothing != Smoothing::PreSmooth {
            return Ok(self.raw);
        }
        if self.presmoothed.is_none() {
            let spec = self.opts.smoothing_spec(SmoothingScheme::PreSmooth);
            self.presmoothed = Some(presmooth(self.raw, &spec)?);
        }
        Ok(self.presmoothed.as_ref().expect("just set"))
    }

    fn surface(&mut self, estimator: Estimator, smoothing: Smoothing) -> Result<CovarianceSurface> {
        if let Some(s) = self.surfaces.get(&(estimator, smoothing)) {
            return Ok(s.clone());
        }
        let curves = self.curves(smoothing)?.clone();
        let raw = match estimator {
            Estimator::Pass => pass_covariance(&curves)?,
            Estimator::Classical => sample_covariance(&curves)?,
            Estimator::Mspc => {
                let center = spatial_median(&curves, MEDIAN_TOL, MEDIAN_MAX_ITER)?;
                spherical_covariance(&curves, &center)?
            }
        };
        let surface = if smoothing == Smoothing::SmoothCf {
            let spec = self.opts.smoothing_spec(SmoothingScheme::SmoothCf);
            let removed = remove_diagonal(&raw);
            match self.smoother {
                Some(sm) => smooth_surface_with(sm, &removed, &spec)?,
                None => {
                    let sm = SurfaceSmoother::new(&removed.grid, spec.basis_size)?;
                    smooth_surface_with(&sm, &removed, &spec)?
                }
            }
        } else {
            raw
        };
        self.surfaces
            .insert((estimator, smoothing), surface.clone());
        Ok(surface)
    }

    /// Ratios of the classical eigenvalues, or all ones when they are not
    /// usable.
    fn classical_init(&mut self, smoothing: Smoothing, q: usize) -> Vec<f64> {
        let fallback = vec![1.0; q];
        let smoothing = if smoothing == Smoothing::SmoothCf {
            Smoothing::None
        } else {
            smoothing
        };
        let Ok(surface) = self.surface(Estimator::Classical, smoothing) else {
            return fallback;
        };
        let Ok(eig) = eigendecompose(&surface, q) else {
            return fallback;
        };
        if eig.q() < q {
            return fallback;
        }
        let first = eig.eigenvalues[0];
        let init: Vec<f64> = eig.eigenvalues.iter().map(|v| v / first).collect();
        if init.iter().all(|v| v.is_finite() && *v > 0.0) {
            init
        } else {
            fallback
        }
    }

    pub fn fit(&mut self, method: MethodSpec) -> Result<FitResult> {
        method.validate()?;
        let q = self.opts.q;
        let surface = self.surface(method.estimator, method.smoothing)?;
        let eigensystem = truncate_to_rank(eigendecompose(&surface, q)?)?;
        let q = eigensystem.q();
        let (ratios, init) = match method.ratio {
            RatioSolver::None => (None, None),
            RatioSolver::Direct => {
                let first = eigensystem.eigenvalues[0];
                let ratios = eigensystem.eigenvalues.iter().map(|v| v / first).collect();
                let est = EigenratioEstimate {
                    ratios,
                    iterations: 0,
                    converged: true,
                    final_delta: 0.0,
                    method: RatioMethod::Direct,
                };
                (Some(est), None)
            }
            RatioSolver::Mc | RatioSolver::Elliptical => {
                let init = self.classical_init(method.smoothing, q);
                let est = if method.ratio == RatioSolver::Mc {
                    let trim = self.opts.trim_fraction;
                    let curves = self.curves(method.smoothing)?;
                    let ps = pair_scores(curves, &eigensystem, q, trim)?;
                    eigenratio_mc(
                        &ps,
                        &eigensystem.eigenvalues,
                        &init,
                        self.opts.fixed_point(),
                    )?
                } else {
                    eigenratio_elliptical(&eigensystem.eigenvalues, &init, self.opts.fixed_point())?
                };
                (Some(est), Some(init))
            }
        };
        Ok(FitResult {
            method,
            eigensystem,
            ratios,
            init,
        })
    }
}

/// Eigenvalues at or below this fraction of the leading one are treated as
/// zero, and their components are dropped from a fit.
pub const RANK_TOL: f64 = 1e-10;

/// Keeps the leading components whose eigenvalues are numerically positive,
/// so rank-deficient samples (e.g. two curves) yield a shorter spectrum
/// instead of zero ratios.
fn truncate_to_rank(mut eig: EigenSystem) -> Result<EigenSystem> {
    let first = eig.eigenvalues.first().copied().unwrap_or(0.0);
    if !(first > 0.0) {
        return Err(FpcaError::DegenerateSample(
            "leading eigenvalue is not positive".into(),
        ));
    }
    let rank = eig
        .eigenvalues
        .iter()
        .take_while(|&&v| v > RANK_TOL * first)
        .count();
    if rank < eig.q() {
        eig.eigenvalues.truncate(rank);
        eig.eigenfunctions = eig.eigenfunctions.columns(0, rank).into_owned();
    }
    Ok(eig)
}

/// Fits a single method to `sample`.
pub fn fit(sample: &FunctionalSample, method: MethodSpec, opts: FitOptions) -> Result<FitResult> {
    FitContext::new(sample, opts).fit(method)
}
