//! Bayes and kernel plug-in classification of spike trains modeled as
//! inhomogeneous Poisson processes.
//!
//! - [`intensity`]: rate functions, their integrals and divergences.
//! - [`simulate`]: exact thinning sampler and labeled training sets.
//! - [`bayes`]: the optimal rule, its threshold and variance theory, risk
//!   bounds and Monte Carlo risk.
//! - [`kernel`]: kernel intensity and shape estimates, bias/variance
//!   oracles and cross-validated bandwidths.
//! - [`plugin`]: the empirical plug-in rule and paired risk estimation.
//! - [`experiments`]: configuration, figure tables and validation.
//!
//! Every random draw comes from a stream addressed by a derived seed and an
//! index ([`rng`]), so results do not depend on the number of worker threads.

pub mod bayes;
pub mod error;
pub mod experiments;
pub mod intensity;
pub mod kernel;
pub mod plugin;
pub mod quad;
pub mod rng;
pub mod simulate;

pub use bayes::{BayesRule, RiskReport, TheoreticalRiskReport};
pub use error::{Error, Result};
pub use intensity::{IntensityBounds, IntensityModel, IntensitySpec, ShapeDecomposition};
pub use kernel::{KernelFamily, KernelShapeEstimate, KernelSpec};
pub use plugin::PluginClassifier;
pub use simulate::{Label, LabeledSample, SpikeTrain, TrainingSet};
