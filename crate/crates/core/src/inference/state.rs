use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt::{ConditionalModelParams, ModelSpec, TailParams};
use crate::spatial::GpHyper;

/// GP mean and variance of one coefficient process `a_j^(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessHyper {
    pub mean: f64,
    pub variance: f64,
}

/// One draw of every model parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorState {
    pub alpha: Vec<f64>,
    /// Per-site coefficient vectors in [`ConditionalModelParams::site`] layout.
    pub site_coefs: Vec<Vec<f64>>,
    pub tail: TailParams,
    /// Indexed `k * (M + 1) + j` for process `k`, polynomial term `j`.
    pub hypers: Vec<ProcessHyper>,
    /// Shared spatial range (km).
    pub range: f64,
}

impl PosteriorState {
    pub fn validate(&self, spec: &ModelSpec, n_inputs: usize, n_sites: usize) -> Result<()> {
        if self.alpha.len() != n_inputs {
            return Err(Error::input(format!(
                "state has {} perturbations, field has {n_inputs} inputs",
                self.alpha.len()
            )));
        }
        if self.alpha.iter().any(|a| !(*a > -1.0)) {
            return Err(Error::input("perturbations must exceed -1"));
        }
        if self.site_coefs.len() != n_sites {
            return Err(Error::input(format!(
                "state has {} sites, data has {n_sites}",
                self.site_coefs.len()
            )));
        }
        if self.site_coefs.iter().any(|c| c.len() != spec.site_len()) {
            return Err(Error::input("site coefficient vector of the wrong length"));
        }
        if self.hypers.len() != spec.site_len() {
            return Err(Error::input("one GP hyperparameter pair per coefficient process"));
        }
        if self.hypers.iter().any(|h| !(h.variance > 0.0)) || !(self.range > 0.0) {
            return Err(Error::input("GP variances and range must be positive"));
        }
        self.tail.validate(spec)
    }

    pub fn coef(&self, spec: &ModelSpec, site: usize, k: usize, j: usize) -> f64 {
        self.site_coefs[site][k * spec.coef_len() + j]
    }

    /// Values of process `(k, j)` across all sites.
    pub fn process_values(&self, spec: &ModelSpec, k: usize, j: usize) -> Vec<f64> {
        let idx = k * spec.coef_len() + j;
        self.site_coefs.iter().map(|c| c[idx]).collect()
    }

    pub fn gp_hyper(&self, spec: &ModelSpec, k: usize, j: usize) -> GpHyper {
        let h = self.hypers[k * spec.coef_len() + j];
        GpHyper {
            mean: h.mean,
            variance: h.variance,
            range: self.range,
        }
    }

    pub fn site_params(&self, spec: &ModelSpec, site: usize) -> ConditionalModelParams {
        ConditionalModelParams {
            spec: spec.clone(),
            site: self.site_coefs[site].clone(),
            tail: self.tail.clone(),
        }
    }

    /// Componentwise average of a nonempty set of draws.
    pub fn mean(draws: &[PosteriorState]) -> Result<PosteriorState> {
        let first = draws
            .first()
            .ok_or_else(|| Error::input("cannot average an empty set of draws"))?;
        let n = draws.len() as f64;
        let avg = |f: &dyn Fn(&PosteriorState) -> f64| draws.iter().map(f).sum::<f64>() / n;
        let avg_vec = |len: usize, f: &dyn Fn(&PosteriorState, usize) -> f64| {
            (0..len).map(|i| avg(&|s| f(s, i))).collect::<Vec<f64>>()
        };
        Ok(PosteriorState {
            alpha: avg_vec(first.alpha.len(), &|s, i| s.alpha[i]),
            site_coefs: (0..first.site_coefs.len())
                .map(|site| avg_vec(first.site_coefs[site].len(), &|s, i| s.site_coefs[site][i]))
                .collect(),
            tail: TailParams {
                xi: avg_vec(first.tail.xi.len(), &|s, i| s.tail.xi[i]),
                link: avg_vec(first.tail.link.len(), &|s, i| s.tail.link[i]),
                l_thr: avg(&|s| s.tail.l_thr),
                u_thr: avg(&|s| s.tail.u_thr),
            },
            hypers: (0..first.hypers.len())
                .map(|i| ProcessHyper {
                    mean: avg(&|s| s.hypers[i].mean),
                    variance: avg(&|s| s.hypers[i].variance),
                })
                .collect(),
            range: avg(&|s| s.range),
        })
    }
}

/// Prior settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterPriors {
    /// Standard deviation of the zero-mean normal prior on each α_j,
    /// truncated to α_j > −1.
    pub alpha_sd: f64,
    /// Normal prior s.d. of the GPD shape coefficients `a^(ξ)`.
    pub xi_sd: f64,
    /// Normal prior s.d. of the threshold-link coefficients `a^(d)`.
    pub link_sd: f64,
    pub hyper: crate::spatial::HyperPriors,
}

impl Default for ParameterPriors {
    fn default() -> Self {
        Self {
            alpha_sd: 0.5,
            xi_sd: 1.0,
            link_sd: 5.0,
            hyper: crate::spatial::HyperPriors::default(),
        }
    }
}
