//! Tail and body mathematics of the conditional monitor distribution.

pub mod basis;
pub mod conditional;
pub mod gpd;

pub use basis::{basis_value, QuantileBasis};
pub use conditional::{
    conditional_cdf, conditional_density, conditional_quantile, covariate_row, expit,
    threshold_from_link, threshold_level, ConditionalDistribution, ConditionalModelParams,
    resolve, ModelSpec, TailParams, STANDARDIZE_CENTER, STANDARDIZE_SCALE, THRESHOLD_FLOOR,
};
pub use gpd::{gpd_cdf, gpd_density, gpd_ln_density, gpd_quantile, GpdParams};
