//! Second stage: normal-score residuals and the AR(1) copula range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt::{resolve, ModelSpec};
use crate::normal;
use crate::rfm::SensitivityField;

use super::data::{LinkedDataset, MonitorDataset};
use super::likelihood::record_concentrations;
use super::state::PosteriorState;

/// Range used in place of φ when the lag-one correlation is not positive.
pub const INDEPENDENCE_PHI: f64 = 1e-6;

/// Temporal range (days) of the latent AR(1) process: lag-h correlation
/// `exp(−h/φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaParams {
    pub phi: f64,
}

impl CopulaParams {
    pub fn new(phi: f64) -> Result<Self> {
        if !(phi > 0.0) || phi.is_nan() {
            return Err(Error::input(format!("copula range must be positive, got {phi}")));
        }
        Ok(Self { phi })
    }

    /// Lag-one correlation `exp(−1/φ)`.
    pub fn lag1(&self) -> f64 {
        (-1.0 / self.phi).exp()
    }

    /// φ = −1/log r, `None` unless 0 < r < 1.
    pub fn from_lag1(r: f64) -> Option<Self> {
        if r > 0.0 && r < 1.0 {
            Some(Self { phi: -1.0 / r.ln() })
        } else {
            None
        }
    }
}

/// One observation transformed to the normal scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub day: i64,
    pub site: usize,
    pub conc: f64,
    pub y: f64,
    /// Model CDF at the observation.
    pub u: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaFit {
    pub params: CopulaParams,
    /// Sample correlation of same-site residuals on consecutive days.
    pub lag1: f64,
    pub n_pairs: usize,
    /// Set when the lag-one correlation was not positive and φ fell back to
    /// [`INDEPENDENCE_PHI`].
    pub independence_fallback: bool,
    pub residuals: Vec<Residual>,
}

/// Unit-Fréchet transform `−1/log Φ(z)`.
pub fn frechet_transform(z: f64) -> f64 {
    let ln_cdf = if z > 0.0 {
        (-normal::sf(z)).ln_1p()
    } else {
        normal::cdf(z).ln()
    };
    -1.0 / ln_cdf
}

/// Residuals in record order.
pub fn residuals(spec: &ModelSpec, state: &PosteriorState, linked: &LinkedDataset, field: &SensitivityField) -> Result<Vec<Residual>> {
    state.validate(spec, field.n_inputs(), linked.n_sites())?;
    let conc = record_concentrations(linked, field, &state.alpha);
    let days = field.days();
    Ok(linked
        .records()
        .iter()
        .zip(&conc)
        .map(|(r, &c)| {
            let u = resolve(spec, &state.site_coefs[r.site], &state.tail, c).cdf(r.y);
            Residual {
                day: days[r.t],
                site: r.site,
                conc: c,
                y: r.y,
                u,
                z: normal::quantile(u),
            }
        })
        .collect())
}

/// Same-site residual pairs `(z(t−1), z(t))` on consecutive days.
pub fn lag1_pairs(residuals: &[Residual]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..residuals.len()).collect();
    order.sort_by_key(|&i| (residuals[i].site, residuals[i].day));
    order
        .windows(2)
        .filter(|w| {
            let (a, b) = (&residuals[w[0]], &residuals[w[1]]);
            a.site == b.site && b.day == a.day + 1
        })
        .map(|w| (w[0], w[1]))
        .collect()
}

fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Estimate φ from the lag-one correlation of normal-score residuals at the
/// given (posterior-mean) state. Residuals are treated as independent
/// across sites.
pub fn fit_copula(
    spec: &ModelSpec,
    state: &PosteriorState,
    data: &MonitorDataset,
    field: &SensitivityField,
) -> Result<CopulaFit> {
    let linked = data.link(field)?;
    let residuals = residuals(spec, state, &linked, field)?;
    let pairs: Vec<(f64, f64)> = lag1_pairs(&residuals)
        .into_iter()
        .map(|(a, b)| (residuals[a].z, residuals[b].z))
        .collect();
    let lag1 = if pairs.len() >= 2 { pearson(&pairs) } else { f64::NAN };
    let (params, independence_fallback) = match CopulaParams::from_lag1(lag1) {
        Some(p) => (p, false),
        None if lag1 >= 1.0 => (CopulaParams { phi: f64::MAX }, false),
        None => (CopulaParams { phi: INDEPENDENCE_PHI }, true),
    };
    Ok(CopulaFit {
        params,
        lag1,
        n_pairs: pairs.len(),
        independence_fallback,
        residuals,
    })
}
