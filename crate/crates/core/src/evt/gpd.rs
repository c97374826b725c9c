//! Generalized Pareto distribution with lower bound `mu`.
//!
//! All three functions are written in terms of `h(z) = log1p(ξ z) / ξ` and its
//! inverse `expm1(ξ L) / ξ`. Below [`SMALL_SHAPE`] the exponential limit is
//! used with its first-order correction in ξ, so the functions are continuous
//! in ξ across the switch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// |ξ| below this uses the exponential-limit expansion.
pub const SMALL_SHAPE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdParams {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
}

impl GpdParams {
    pub fn new(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::input(format!("GPD scale must be positive, got {sigma}")));
        }
        if !mu.is_finite() || !xi.is_finite() {
            return Err(Error::input("GPD location and shape must be finite"));
        }
        Ok(Self { mu, sigma, xi })
    }

    /// Finite upper endpoint when ξ < 0.
    pub fn upper_endpoint(&self) -> Option<f64> {
        (self.xi < 0.0).then(|| self.mu - self.sigma / self.xi)
    }
}

/// `h(z) = log(1 + ξ z) / ξ`; `None` outside the support (1 + ξ z ≤ 0).
#[inline]
fn cumulative_hazard(z: f64, xi: f64) -> Option<f64> {
    if xi.abs() < SMALL_SHAPE {
        Some(z - 0.5 * xi * z * z)
    } else {
        let w = xi * z;
        if w <= -1.0 {
            None
        } else {
            Some(w.ln_1p() / xi)
        }
    }
}

/// Inverse of `cumulative_hazard`: `expm1(ξ L) / ξ`.
#[inline]
fn inverse_hazard(l: f64, xi: f64) -> f64 {
    if xi.abs() < SMALL_SHAPE {
        l * (1.0 + 0.5 * xi * l)
    } else {
        (xi * l).exp_m1() / xi
    }
}

/// Quantile at probability `p`. `p = 1` is accepted only for ξ < 0, giving
/// the finite upper endpoint.
pub fn gpd_quantile(p: f64, params: &GpdParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::input(format!("probability {p} outside [0, 1]")));
    }
    if p == 1.0 {
        return params
            .upper_endpoint()
            .ok_or_else(|| Error::input("p = 1 has no finite quantile for xi >= 0"));
    }
    Ok(gpd_quantile_unchecked(p, params))
}

#[inline]
pub(crate) fn gpd_quantile_unchecked(p: f64, params: &GpdParams) -> f64 {
    let l = -(-p).ln_1p();
    params.mu + params.sigma * inverse_hazard(l, params.xi)
}

pub fn gpd_cdf(y: f64, params: &GpdParams) -> f64 {
    if y <= params.mu {
        return 0.0;
    }
    let z = (y - params.mu) / params.sigma;
    match cumulative_hazard(z, params.xi) {
        Some(h) => -(-h).exp_m1(),
        None => 1.0,
    }
}

/// Log density; `-inf` outside the support.
pub fn gpd_ln_density(y: f64, params: &GpdParams) -> f64 {
    if y < params.mu {
        return f64::NEG_INFINITY;
    }
    let z = (y - params.mu) / params.sigma;
    let w = params.xi * z;
    if w <= -1.0 {
        return f64::NEG_INFINITY;
    }
    match cumulative_hazard(z, params.xi) {
        Some(h) => -params.sigma.ln() - h - w.ln_1p(),
        None => f64::NEG_INFINITY,
    }
}

pub fn gpd_density(y: f64, params: &GpdParams) -> f64 {
    gpd_ln_density(y, params).exp()
}
