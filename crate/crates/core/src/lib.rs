//! Pseudo-variance quasi-maximum likelihood estimation (PVQMLE) for
//! observation-driven time series with a parametric conditional mean.
//!
//! The crate is `no_std` and only needs `alloc`. Everything in here is a pure
//! function of its inputs: filters, the Gaussian pseudo-variance
//! quasi-likelihood with analytic score and Hessian, a BFGS optimizer, the
//! restricted and unrestricted estimators plus comparison estimators, sandwich
//! inference with the Wald restriction test, and seedable simulators for INAR
//! and beta autoregressive processes.
//!
//! File formats, the Monte Carlo harness and the command line live in the
//! `pvqmle` companion crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod dgp;
pub mod error;
pub mod estimate;
pub mod filters;
pub mod inference;
pub mod linalg;
pub mod math;
pub mod objective;
pub mod optim;
pub mod restriction;
pub mod series;
pub mod transform;

pub use dgp::{DgpSpec, Innovation, Process, ThinningSpec};
pub use error::{Error, Result};
pub use estimate::{EstimatorTag, FitOptions, FitResult, WlseWeights};
pub use filters::{DerivLevel, FilterFamily, FilteredPaths};
pub use inference::{CovarianceResult, WaldResult};
pub use linalg::Matrix;
pub use objective::{EvalLevel, ObjectiveEval};
pub use restriction::{RestrictionKind, RestrictionSpec};
pub use series::{ParamVector, SampleSpace, TimeSeries};

/// Lower bound enforced on every pseudo-variance value.
pub const NU_FLOOR: f64 = 1e-8;
