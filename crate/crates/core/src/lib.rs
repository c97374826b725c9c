//! Calibration of a reduced-form air-quality model against point monitors
//! with Bayesian quantile regression and generalized Pareto tails, plus
//! posterior-predictive simulation of emission-control scenarios.

pub mod error;
pub mod evt;
pub mod inference;
pub mod io;
pub mod normal;
pub mod predict;
pub mod rfm;
pub mod rng;
pub mod scoring;
pub mod spatial;
pub mod synth;

pub use error::{Error, Result};
pub use evt::{ConditionalDistribution, ConditionalModelParams, GpdParams, ModelSpec, QuantileBasis, TailParams};
pub use rfm::{Cell, ConcentrationField, PerturbationVector, SensitivityField};
