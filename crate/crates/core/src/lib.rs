//! Numerical toolkit for stochastic sewing: controls and w-dyadic partitions,
//! the sewing engine with convergence diagnostics, fractional Brownian motion
//! with exact conditional structure, periodic Littlewood-Paley analysis,
//! additive functionals of fBm, martingale-type checks on coin trees and the
//! Kolmogorov modulus.
//!
//! Numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases fix
//! the common double-precision case.

pub mod control;
pub mod error;
mod fft;
pub mod fbm;
pub mod functionals;
pub mod kolmogorov;
pub mod mtype;
pub mod rng;
pub mod scalar;
pub mod sewing;
pub mod spectral;
pub mod stats;

pub use control::{Control, ControlKind, DyadicTree, Partition};
pub use error::{Error, Result};
pub use fbm::{FbmParams, FbmPath, FbmSampler};
pub use functionals::{ExponentBudget, FunctionalGerm, ProfileKind, ProfileSpec, TimeProfile};
pub use kolmogorov::{modulus_statistic, tail_study, ModulusReport};
pub use mtype::{TreeMartingale, TreeSequence};
pub use scalar::Scalar;
pub use sewing::{sew, Germ, Levels, SewResult, Value};
pub use spectral::{BesovIndices, GridFunction, GridSpec};

pub type Control64 = Control<f64>;
pub type Partition64 = Partition<f64>;
pub type FbmParams64 = FbmParams<f64>;
pub type FbmPath64 = FbmPath<f64>;
pub type FbmSampler64 = FbmSampler<f64>;
pub type GridSpec64 = GridSpec<f64>;
pub type GridFunction64 = GridFunction<f64>;
pub type TimeProfile64 = TimeProfile<f64>;
