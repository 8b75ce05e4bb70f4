//! Monte Carlo integration with determinantal point processes built from
//! multivariate orthogonal polynomial ensembles on `[-1, 1]^d`.

pub mod error;
pub mod estimator;
pub mod experiments;
pub mod kernel;
pub mod multiindex;
pub mod oracle;
pub mod orthopoly;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod variance;

pub use error::{Error, Result};
pub use estimator::{estimate, importance_estimate, Estimate, FnIntegrand, Integrand};
pub use kernel::{CDKernel, ProductMeasure};
pub use multiindex::{MultiIndex, MultiIndexBasis};
pub use orthopoly::{JacobiParams, RecurrenceTable};
pub use sampler::{sample, BoundStrategy, Sampler, SamplerConfig, WeightedSample};
