//! Robust functional principal component analysis built on the pairwise
//! spatial sign (PASS) covariance.
//!
//! Curves live on the equispaced grid `t_j = j / N` ([`fgrid`]). The
//! [`estimators`] module provides the classical, PASS and median-spherical
//! covariance surfaces; [`eigenratio`] recovers relative eigenvalue sizes
//! from the PASS spectrum; [`smoothing`] handles measurement noise;
//! [`simgen`] and [`metrics`] drive the simulation benchmarks, and
//! [`pipeline`] ties the pieces together.

pub mod eigenratio;
pub mod error;
pub mod estimators;
pub mod fgrid;
pub mod metrics;
pub mod pipeline;
pub mod quadrature;
pub mod simgen;
pub mod smoothing;

pub use error::{FpcaError, Result};
pub use fgrid::{FunctionalSample, Grid};
pub use pipeline::{fit, FitContext, FitOptions, FitResult, MethodSpec};
