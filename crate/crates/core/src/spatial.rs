//! Gaussian-process priors for spatially varying coefficients: exponential
//! correlation, multivariate-normal log densities and kriging.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar location in kilometres.
pub type Coord = [f64; 2];

/// Relative diagonal jitter: `1e-8 · τ` is added to covariance diagonals.
pub const JITTER: f64 = 1e-8;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn distance(a: &Coord, b: &Coord) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// GP mean, variance and (shared) range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub mean: f64,
    pub variance: f64,
    pub range: f64,
}

impl GpHyper {
    pub fn new(mean: f64, variance: f64, range: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::input(format!("GP variance must be positive, got {variance}")));
        }
        check_range(range)?;
        Ok(Self {
            mean,
            variance,
            range,
        })
    }
}

fn check_range(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::input(format!("spatial range must be positive, got {rho}")))
    }
}

/// Hyperpriors: `mean ~ N(0, c1²)`, `variance ~ Gamma(c2, c3)` (shape, rate),
/// `log range ~ N(log_range_mean, log_range_var)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPriors {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub log_range_mean: f64,
    pub log_range_var: f64,
}

impl Default for HyperPriors {
    fn default() -> Self {
        Self {
            c1: 100.0,
            c2: 0.1,
            c3: 0.1,
            log_range_mean: 0.0,
            log_range_var: 10.0,
        }
    }
}

impl HyperPriors {
    pub fn ln_mean_prior(&self, mean: f64) -> f64 {
        normal_ln_pdf(mean, 0.0, self.c1 * self.c1)
    }

    pub fn ln_variance_prior(&self, variance: f64) -> f64 {
        if variance <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.c2 * self.c3.ln() - libm::lgamma(self.c2) + (self.c2 - 1.0) * variance.ln()
            - self.c3 * variance
    }

    /// Prior density of `log ρ` (on the log scale).
    pub fn ln_log_range_prior(&self, log_range: f64) -> f64 {
        normal_ln_pdf(log_range, self.log_range_mean, self.log_range_var)
    }
}

pub(crate) fn normal_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + (x - mean) * (x - mean) / var)
}

/// Matrix of `exp(−‖a_i − b_j‖ / ρ)`.
pub fn exp_correlation(sites_a: &[Coord], sites_b: &[Coord], rho: f64) -> Result<DMatrix<f64>> {
    check_range(rho)?;
    Ok(DMatrix::from_fn(sites_a.len(), sites_b.len(), |i, j| {
        (-distance(&sites_a[i], &sites_b[j]) / rho).exp()
    }))
}

/// Cholesky factor of `R(ρ) + JITTER·I` over a fixed set of sites.
#[derive(Debug, Clone)]
pub struct CorrelationFactor {
    sites: Vec<Coord>,
    rho: f64,
    chol: Cholesky<f64, Dyn>,
    ln_det: f64,
}

impl CorrelationFactor {
    pub fn new(sites: &[Coord], rho: f64) -> Result<Self> {
        let mut r = exp_correlation(sites, sites, rho)?;
        for i in 0..sites.len() {
            r[(i, i)] += JITTER;
        }
        let chol = Cholesky::new(r).ok_or_else(|| {
            Error::numerical(format!(
                "Cholesky of the correlation matrix failed (range {rho}, {} sites)",
                sites.len()
            ))
        })?;
        let ln_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            sites: sites.to_vec(),
            rho,
            chol,
            ln_det,
        })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn range(&self) -> f64 {
        self.rho
    }

    pub fn sites(&self) -> &[Coord] {
        &self.sites
    }

    /// log det of the jittered correlation matrix.
    pub fn ln_det(&self) -> f64 {
        self.ln_det
    }

    /// `(R + jI)⁻¹`.
    pub fn precision(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    /// `rᵀ (R + jI)⁻¹ r` for residual `r`.
    pub fn quad_form(&self, r: &[f64]) -> f64 {
        let mut v = DVector::from_column_slice(r);
        // L⁻¹ r, then its squared norm.
        self.chol.l_dirty().solve_lower_triangular_mut(&mut v);
        v.norm_squared()
    }

    /// Multivariate normal log density with mean `mean·1` and covariance
    /// `variance · (R + jI)`.
    pub fn log_density(&self, values: &[f64], mean: f64, variance: f64) -> f64 {
        let n = values.len() as f64;
        let r: Vec<f64> = values.iter().map(|v| v - mean).collect();
        -0.5 * (n * LN_2PI + n * variance.ln() + self.ln_det + self.quad_form(&r) / variance)
    }

    /// Kriging weights and the conditional variance factor for a new site.
    pub fn krige(&self, target: &Coord) -> KrigingWeights {
        let r = DVector::from_iterator(
            self.sites.len(),
            self.sites.iter().map(|s| (-distance(s, target) / self.rho).exp()),
        );
        let w = self.chol.solve(&r);
        let var_factor = (1.0 - r.dot(&w)).max(0.0);
        KrigingWeights {
            weights: w.as_slice().to_vec(),
            var_factor,
        }
    }
}

/// Linear predictor of one unobserved site from the observed sites.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigingWeights {
    pub weights: Vec<f64>,
    /// Conditional variance divided by the process variance.
    pub var_factor: f64,
}

impl KrigingWeights {
    /// Conditional mean and variance given observed values.
    pub fn moments(&self, observed: &[f64], hyper: &GpHyper) -> (f64, f64) {
        let mean = hyper.mean
            + self
                .weights
                .iter()
                .zip(observed)
                .map(|(w, v)| w * (v - hyper.mean))
                .sum::<f64>();
        (mean, hyper.variance * self.var_factor)
    }
}

pub fn gp_log_density(values: &[f64], hyper: &GpHyper, sites: &[Coord]) -> Result<f64> {
    if values.len() != sites.len() {
        return Err(Error::input("one value per site required"));
    }
    let f = CorrelationFactor::new(sites, hyper.range)?;
    Ok(f.log_density(values, hyper.mean, hyper.variance))
}

/// Conditional mean vector and covariance matrix at `new_sites`.
pub fn gp_conditional(
    observed: &[f64],
    hyper: &GpHyper,
    sites: &[Coord],
    new_sites: &[Coord],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if observed.len() != sites.len() {
        return Err(Error::input("one observed value per site required"));
    }
    let f = CorrelationFactor::new(sites, hyper.range)?;
    let r21 = exp_correlation(new_sites, sites, hyper.range)?;
    let r22 = exp_correlation(new_sites, new_sites, hyper.range)?;
    let resid = DVector::from_iterator(observed.len(), observed.iter().map(|v| v - hyper.mean));
    let mean = r21.clone() * f.solve(&resid);
    let mean = mean.map(|m| m + hyper.mean);
    let solved = f.chol.solve(&r21.transpose());
    let cov = (r22 - r21 * solved) * hyper.variance;
    Ok((mean, cov))
}

/// Joint draw of the process at `new_sites` given the observed values.
pub fn gp_predict(
    observed: &[f64],
    hyper: &GpHyper,
    sites: &[Coord],
    new_sites: &[Coord],
    rng: &mut crate::rng::Rng,
) -> Result<Vec<f64>> {
    let (mean, mut cov) = gp_conditional(observed, hyper, sites, new_sites)?;
    for i in 0..new_sites.len() {
        cov[(i, i)] += JITTER * hyper.variance;
    }
    let chol = Cholesky::new(cov)
        .ok_or_else(|| Error::numerical("Cholesky of the conditional covariance failed"))?;
    let z = DVector::from_iterator(
        new_sites.len(),
        (0..new_sites.len()).map(|_| rng.sample::<f64, _>(StandardNormal)),
    );
    Ok((mean + chol.l() * z).as_slice().to_vec())
}
