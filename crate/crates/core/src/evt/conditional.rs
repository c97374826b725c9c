//! Conditional distribution of a monitor value given reduced-form model
//! output: a split-normal body described by its quantile function, spliced at
//! a covariate-dependent quantile level onto a generalized Pareto tail.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::basis::QuantileBasis;
use super::gpd::{self, GpdParams};
use crate::error::{Error, Result};
use crate::normal;

pub const STANDARDIZE_CENTER: f64 = 50.0;
pub const STANDARDIZE_SCALE: f64 = 15.0;

/// Lower limit of the threshold-level bounds.
pub const THRESHOLD_FLOOR: f64 = 0.8;

/// `(1, C̄, …, C̄^M)` with `C̄ = (C − 50) / 15`.
pub fn covariate_row(c: f64, order: usize) -> Vec<f64> {
    let mut row = vec![1.0; order + 1];
    fill_covariates(c, &mut row);
    row
}

#[inline]
pub(crate) fn fill_covariates(c: f64, row: &mut [f64]) {
    let cbar = (c - STANDARDIZE_CENTER) / STANDARDIZE_SCALE;
    let mut p = 1.0;
    for x in row.iter_mut() {
        *x = p;
        p *= cbar;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable e^d / (1 + e^d).
#[inline]
pub fn expit(d: f64) -> f64 {
    if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    }
}

/// `l·expit(d) + u·(1 − expit(d))`; tends to `l` as `d → +∞`.
#[inline]
pub fn threshold_from_link(d: f64, l_thr: f64, u_thr: f64) -> f64 {
    let w = expit(d);
    l_thr * w + u_thr * (1.0 - w)
}

/// Structural choices: basis size `L`, polynomial order `M`, and whether the
/// upper tail is generalized Pareto (otherwise the threshold is fixed at 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub basis: QuantileBasis,
    pub order: usize,
    pub use_gpd: bool,
}

impl ModelSpec {
    pub fn new(basis_count: usize, order: usize, use_gpd: bool) -> Result<Self> {
        if order < 1 {
            return Err(Error::input("polynomial order must be at least 1"));
        }
        Ok(Self {
            basis: QuantileBasis::new(basis_count)?,
            order,
            use_gpd,
        })
    }

    /// Coefficients per polynomial, `M + 1`.
    pub fn coef_len(&self) -> usize {
        self.order + 1
    }

    /// Spatially varying processes: β, θ_1..θ_L, σ.
    pub fn n_processes(&self) -> usize {
        self.basis.len() + 2
    }

    /// Length of one site's flattened coefficient vector.
    pub fn site_len(&self) -> usize {
        self.n_processes() * self.coef_len()
    }

    pub fn sigma_process(&self) -> usize {
        self.basis.len() + 1
    }

    pub fn process_name(&self, k: usize) -> String {
        match k {
            0 => "beta".to_string(),
            k if k == self.sigma_process() => "sigma".to_string(),
            k => format!("theta{k}"),
        }
    }

    /// Short label such as `L1M2_GPD`.
    pub fn label(&self) -> String {
        format!(
            "L{}M{}_{}",
            self.basis.len(),
            self.order,
            if self.use_gpd { "GPD" } else { "NoGPD" }
        )
    }
}

/// Parameters shared by all sites: GPD shape and threshold-link
/// coefficients, and the threshold bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    pub xi: Vec<f64>,
    pub link: Vec<f64>,
    pub l_thr: f64,
    pub u_thr: f64,
}

impl TailParams {
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.xi.len() != spec.coef_len() || self.link.len() != spec.coef_len() {
            return Err(Error::input("tail coefficient vectors must have length M + 1"));
        }
        if !(THRESHOLD_FLOOR..=1.0).contains(&self.l_thr)
            || !(self.l_thr..=1.0).contains(&self.u_thr)
        {
            return Err(Error::input(format!(
                "threshold bounds ({}, {}) must satisfy 0.8 <= l <= u <= 1",
                self.l_thr, self.u_thr
            )));
        }
        Ok(())
    }
}

/// Every coefficient defining the conditional distribution at one site.
///
/// `site` is laid out process-major: `[a^(β), a^(θ_1), …, a^(θ_L), a^(σ)]`,
/// each of length `M + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalModelParams {
    pub spec: ModelSpec,
    pub site: Vec<f64>,
    pub tail: TailParams,
}

impl ConditionalModelParams {
    pub fn new(spec: ModelSpec, site: Vec<f64>, tail: TailParams) -> Result<Self> {
        if site.len() != spec.site_len() {
            return Err(Error::input(format!(
                "site coefficient vector has length {}, expected {}",
                site.len(),
                spec.site_len()
            )));
        }
        tail.validate(&spec)?;
        Ok(Self { spec, site, tail })
    }

    pub fn resolve(&self, c: f64) -> ConditionalDistribution<'_> {
        resolve(&self.spec, &self.site, &self.tail, c)
    }
}

/// Threshold quantile level `T(C)`; 1 when the model has no GPD tail.
pub fn threshold_level(c: f64, params: &ConditionalModelParams) -> f64 {
    if !params.spec.use_gpd {
        return 1.0;
    }
    let x = covariate_row(c, params.spec.order);
    threshold_from_link(dot(&x, &params.tail.link), params.tail.l_thr, params.tail.u_thr)
}

/// Evaluate all covariate-dependent parameters at concentration `c`.
pub fn resolve<'a>(
    spec: &'a ModelSpec,
    site: &[f64],
    tail: &TailParams,
    c: f64,
) -> ConditionalDistribution<'a> {
    let n = spec.coef_len();
    let mut x: SmallVec<[f64; 8]> = SmallVec::from_elem(1.0, n);
    fill_covariates(c, &mut x);
    let beta = dot(&x, &site[..n]);
    let thetas = (1..=spec.basis.len())
        .map(|k| dot(&x, &site[k * n..(k + 1) * n]).exp())
        .collect();
    let (threshold, tail_shape) = if spec.use_gpd {
        let s = spec.sigma_process();
        let sigma = dot(&x, &site[s * n..(s + 1) * n]).exp();
        let xi = dot(&x, &tail.xi);
        let t = threshold_from_link(dot(&x, &tail.link), tail.l_thr, tail.u_thr);
        (t, Some((sigma, xi)))
    } else {
        (1.0, None)
    };
    ConditionalDistribution::build(&spec.basis, beta, thetas, threshold, tail_shape)
}

/// The distribution of a monitor value at one resolved covariate value.
#[derive(Debug, Clone)]
pub struct ConditionalDistribution<'a> {
    basis: &'a QuantileBasis,
    beta: f64,
    thetas: SmallVec<[f64; 8]>,
    /// Body quantiles at the knots, `q_0(κ_i)`, `±∞` at the ends.
    knot_q: SmallVec<[f64; 9]>,
    threshold: f64,
    tail: Option<GpdParams>,
}

impl<'a> ConditionalDistribution<'a> {
    /// Build from already-transformed values. `tail_shape` is `(σ, ξ)`; pass
    /// `None` (or a threshold of 1) for a model without a GPD tail.
    pub fn new(
        basis: &'a QuantileBasis,
        beta: f64,
        thetas: &[f64],
        threshold: f64,
        tail_shape: Option<(f64, f64)>,
    ) -> Result<Self> {
        if thetas.len() != basis.len() {
            return Err(Error::input("need one theta per basis function"));
        }
        if thetas.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::input("basis weights theta must be positive"));
        }
        if !(0.0..=1.0).contains(&threshold) || threshold == 0.0 {
            return Err(Error::input(format!("threshold level {threshold} outside (0, 1]")));
        }
        if let Some((sigma, xi)) = tail_shape {
            GpdParams::new(0.0, sigma, xi)?;
        }
        Ok(Self::build(basis, beta, thetas.iter().copied().collect(), threshold, tail_shape))
    }

    fn build(
        basis: &'a QuantileBasis,
        beta: f64,
        thetas: SmallVec<[f64; 8]>,
        threshold: f64,
        tail_shape: Option<(f64, f64)>,
    ) -> Self {
        let count = basis.len();
        let mut knot_q: SmallVec<[f64; 9]> = SmallVec::from_elem(beta, count + 1);
        if count == 1 {
            knot_q[0] = f64::NEG_INFINITY;
            knot_q[1] = f64::INFINITY;
        } else {
            let z = basis.knot_z();
            let half = count / 2;
            for i in half + 1..=count {
                knot_q[i] = knot_q[i - 1] + thetas[i - 1] * (z[i] - z[i - 1]);
            }
            for i in (0..half).rev() {
                knot_q[i] = knot_q[i + 1] - thetas[i] * (z[i + 1] - z[i]);
            }
        }
        let mut dist = Self {
            basis,
            beta,
            thetas,
            knot_q,
            threshold,
            tail: None,
        };
        if let Some((sigma, xi)) = tail_shape {
            if threshold < 1.0 {
                let mu = dist.body_quantile(threshold);
                dist.tail = Some(GpdParams { mu, sigma, xi });
            }
        }
        if dist.tail.is_none() {
            dist.threshold = 1.0;
        }
        dist
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// Threshold quantile level `T(C)`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Threshold on the data scale, `μ(C) = q_0(T(C))`; `+∞` without a tail.
    pub fn mu(&self) -> f64 {
        self.tail.map_or(f64::INFINITY, |t| t.mu)
    }

    pub fn tail(&self) -> Option<&GpdParams> {
        self.tail.as_ref()
    }

    pub fn knot_quantiles(&self) -> &[f64] {
        &self.knot_q
    }

    /// Segment slope and intercept: on segment `m`, `q_0(τ) = a_m + θ_m Φ⁻¹(τ)`.
    #[inline]
    fn segment_line(&self, m: usize) -> (f64, f64) {
        let theta = self.thetas[m];
        if self.basis.is_gaussian() {
            return (self.beta, theta);
        }
        let z = self.basis.knot_z();
        let anchor = if m < self.basis.len() / 2 { m + 1 } else { m };
        (self.knot_q[anchor] - theta * z[anchor], theta)
    }

    /// `q_0(τ) = β + Σ_l B_l(τ) θ_l`, evaluated on the active segment.
    pub fn body_quantile(&self, tau: f64) -> f64 {
        let tau = tau.clamp(normal::TAU_CLAMP, 1.0 - normal::TAU_CLAMP);
        let m = if self.basis.is_gaussian() {
            0
        } else {
            self.basis.segment_of(tau)
        };
        let (a, theta) = self.segment_line(m);
        a + theta * normal::quantile(tau)
    }

    /// Segment index of a value lying below the threshold.
    #[inline]
    fn body_segment(&self, y: f64) -> usize {
        self.knot_q[1..self.basis.len()]
            .iter()
            .take_while(|q| **q <= y)
            .count()
    }

    pub fn quantile(&self, tau: f64) -> Result<f64> {
        if tau == 1.0 {
            return match &self.tail {
                Some(t) if t.xi < 0.0 => Ok(t.mu - t.sigma / t.xi),
                _ => Err(Error::input("tau = 1 only has a finite quantile with a bounded tail")),
            };
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::input(format!("quantile level {tau} outside (0, 1)")));
        }
        Ok(self.quantile_unchecked(tau))
    }

    #[inline]
    pub(crate) fn quantile_unchecked(&self, tau: f64) -> f64 {
        match &self.tail {
            Some(tail) if tau > self.threshold => {
                let p = (tau - self.threshold) / (1.0 - self.threshold);
                gpd::gpd_quantile_unchecked(p.min(1.0 - 1e-16), tail)
            }
            _ => self.body_quantile(tau),
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if let Some(tail) = &self.tail {
            if y >= tail.mu {
                return self.threshold + (1.0 - self.threshold) * gpd::gpd_cdf(y, tail);
            }
        }
        if y.is_nan() {
            return f64::NAN;
        }
        let m = if self.basis.is_gaussian() { 0 } else { self.body_segment(y) };
        let (a, theta) = self.segment_line(m);
        normal::cdf((y - a) / theta).min(self.threshold)
    }

    pub fn ln_density(&self, y: f64) -> f64 {
        if let Some(tail) = &self.tail {
            if y >= tail.mu {
                return (1.0 - self.threshold).ln() + gpd::gpd_ln_density(y, tail);
            }
        }
        let m = if self.basis.is_gaussian() { 0 } else { self.body_segment(y) };
        let (a, theta) = self.segment_line(m);
        normal::ln_pdf((y - a) / theta) - theta.ln()
    }

    pub fn density(&self, y: f64) -> f64 {
        self.ln_density(y).exp()
    }
}

pub fn conditional_quantile(tau: f64, c: f64, params: &ConditionalModelParams) -> Result<f64> {
    params.resolve(c).quantile(tau)
}

pub fn conditional_density(y: f64, c: f64, params: &ConditionalModelParams) -> f64 {
    params.resolve(c).density(y)
}

pub fn conditional_cdf(y: f64, c: f64, params: &ConditionalModelParams) -> f64 {
    params.resolve(c).cdf(y)
}
