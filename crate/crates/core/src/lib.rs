//! Simulation laboratory for supercritical Bernoulli bond percolation on Z^d.
//!
//! The building blocks are layered bottom-up: [`lattice`] (boxes, edge
//! configurations, mesoscopic cells), [`clusters`] (labeling and the
//! infinite-cluster proxy), [`chemdist`] (chemical and modified distances),
//! [`renorm`] (distance with red edges and Efron–Stein resampling),
//! [`subadd`] (norm estimation, supporting functionals, skeletons) and
//! [`experiments`] (replicated Monte Carlo studies with verdicts).
//!
//! Real-valued code is generic over [`Scalar`]; the aliases below fix it to `f64`.

pub mod chemdist;
pub mod clusters;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod renorm;
pub mod scalar;
pub mod stats;
pub mod subadd;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Scheme = lattice::RenormScheme<f64>;
pub type Norm = subadd::NormEstimate<f64>;
pub type Functional = subadd::SupportFunctional<f64>;
pub type Weighted = renorm::WeightedLength<f64>;
pub type RenormRoute = renorm::RenormPath<f64>;
pub type EfronStein = renorm::EfronSteinEstimate<f64>;
pub type LinearFit = stats::LinearFit<f64>;
pub type RateFit = stats::RateFit<f64>;

pub type Scheme32 = lattice::RenormScheme<f32>;
pub type Norm32 = subadd::NormEstimate<f32>;
