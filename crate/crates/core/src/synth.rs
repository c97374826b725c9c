//! Synthetic sensitivity fields and monitor data from a known truth.

use rand::Rng as _;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt::{ConditionalModelParams, ModelSpec, TailParams};
use crate::inference::{CopulaParams, MonitorDataset, MonitorRecord, PosteriorState, ProcessHyper, Site};
use crate::predict::simulate_site_year;
use crate::rfm::{cross_pair_count, evaluate_rfm_field, Cell, PerturbationVector, SensitivityField};
use crate::rng::{substream, Rng};
use crate::spatial::Coord;

/// First day of the season as a day of year (1 July).
pub const FIRST_DAY: i64 = 182;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub nx: usize,
    pub ny: usize,
    pub cell_km: f64,
    pub n_sites: usize,
    pub n_days: usize,
    pub n_inputs: usize,
    pub spec: ModelSpec,
    pub alpha: Vec<f64>,
    /// GP mean and variance per coefficient process, `k * (M + 1) + j`.
    pub hypers: Vec<ProcessHyper>,
    pub range: f64,
    pub tail: TailParams,
    pub phi: f64,
}

/// Coefficient hyperparameters giving a plausible ozone response: median
/// near 52 ppb at 50 ppb model output, rising 14 ppb per 15 ppb of output,
/// site medians varying with s.d. 5 ppb, spread about 6 ppb, GPD scale about 4 ppb.
pub fn default_hypers(spec: &ModelSpec) -> Vec<ProcessHyper> {
    let n = spec.coef_len();
    let mut out = Vec::with_capacity(spec.site_len());
    for k in 0..spec.n_processes() {
        for j in 0..n {
            let (mean, variance) = if k == 0 {
                match j {
                    0 => (52.0, 25.0),
                    1 => (14.0, 1.0),
                    2 => (-0.5, 0.04),
                    _ => (0.0, 0.01),
                }
            } else {
                let level = if k == spec.sigma_process() { 4.0f64.ln() } else { 6.0f64.ln() };
                match j {
                    0 => (level, 0.01),
                    1 => (0.05, 0.0025),
                    _ => (0.0, 0.0004),
                }
            };
            out.push(ProcessHyper { mean, variance });
        }
    }
    out
}

impl SyntheticConfig {
    /// 20 × 20 grid of 12 km cells, 50 sites, 92 days, six inputs, and the
    /// L = 1, M = 2 model with a GPD tail of shape `xi`.
    pub fn desk(xi: f64) -> Self {
        let spec = ModelSpec::new(1, 2, true).expect("valid model");
        let mut cfg = Self {
            nx: 20,
            ny: 20,
            cell_km: 12.0,
            n_sites: 50,
            n_days: 92,
            n_inputs: 6,
            hypers: default_hypers(&spec),
            spec,
            alpha: vec![-0.2, 0.15, 0.1, -0.1, 0.05, 0.2],
            range: 60.0,
            tail: TailParams { xi: vec![], link: vec![], l_thr: 0.85, u_thr: 0.95 },
            phi: 1.5,
        };
        cfg.tail = default_tail(&cfg.spec, xi);
        cfg
    }

    /// Replace the model, resetting hyperparameters and tail to defaults.
    pub fn with_spec(mut self, spec: ModelSpec) -> Self {
        let xi = self.tail.xi.first().copied().unwrap_or(0.1);
        self.hypers = default_hypers(&spec);
        self.tail = default_tail(&spec, xi);
        self.spec = spec;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || !(self.cell_km > 0.0) {
            return Err(Error::input("grid must have positive size"));
        }
        if self.n_sites == 0 || self.n_days == 0 || self.n_inputs == 0 {
            return Err(Error::input("need at least one site, day and input"));
        }
        if self.alpha.len() != self.n_inputs {
            return Err(Error::input(format!(
                "truth has {} perturbations for {} inputs",
                self.alpha.len(),
                self.n_inputs
            )));
        }
        if self.hypers.len() != self.spec.site_len() {
            return Err(Error::input("one hyperparameter pair per coefficient process"));
        }
        PerturbationVector::new(self.alpha.clone())?;
        CopulaParams::new(self.phi)?;
        self.tail.validate(&self.spec)
    }
}

fn default_tail(spec: &ModelSpec, xi: f64) -> TailParams {
    let n = spec.coef_len();
    let mut link = vec![0.0; n];
    if n > 1 {
        link[1] = 0.5;
    }
    let mut xis = vec![0.0; n];
    xis[0] = xi;
    TailParams { xi: xis, link, l_thr: 0.85, u_thr: 0.95 }
}

/// The generating parameters, emitted next to the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub config: SyntheticConfig,
    pub seed: u64,
    pub state: PosteriorState,
}

/// Smooth random surface: a sum of random cosine features with length
/// scale `ell`, scaled to roughly unit variance.
struct Surface {
    w: Vec<(f64, f64, f64)>,
}

impl Surface {
    const FEATURES: usize = 12;

    fn new(ell: f64, rng: &mut Rng) -> Self {
        let n = Normal::new(0.0, 1.0 / ell).expect("positive scale");
        let w = (0..Self::FEATURES)
            .map(|_| (rng.sample(n), rng.sample(n), rng.random::<f64>() * std::f64::consts::TAU))
            .collect();
        Self { w }
    }

    fn at(&self, p: &Coord) -> f64 {
        let s: f64 = self.w.iter().map(|(a, b, c)| (a * p[0] + b * p[1] + c).cos()).sum();
        s * (2.0 / Self::FEATURES as f64).sqrt()
    }
}

fn ar1(n: usize, r: f64, rng: &mut Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut z = 0.0;
    for t in 0..n {
        let e: f64 = rng.sample(StandardNormal);
        z = if t == 0 { e } else { r * z + (1.0 - r * r).sqrt() * e };
        out.push(z);
    }
    out
}

/// Base output around 55 ppb with smooth spatial structure and a common
/// day-to-day signal; first-order sensitivities of roughly 2–20 ppb with distinct
/// spatial patterns and daily modulation per input; small negative
/// second-order terms.
fn synth_field(cfg: &SyntheticConfig, seed: u64) -> Result<SensitivityField> {
    let mut rng = substream(seed, "field", &[]);
    let d = cfg.n_inputs;
    let cells: Vec<Cell> = (0..cfg.ny)
        .flat_map(|iy| (0..cfg.nx).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| Cell {
            id: (iy * cfg.nx + ix) as i64,
            x_km: (ix as f64 + 0.5) * cfg.cell_km,
            y_km: (iy as f64 + 0.5) * cfg.cell_km,
        })
        .collect();
    let base_space = Surface::new(80.0, &mut rng);
    let base_day = ar1(cfg.n_days, 0.6, &mut rng);
    let base_mix = Surface::new(120.0, &mut rng);
    let patterns: Vec<Surface> = (0..d).map(|_| Surface::new(60.0, &mut rng)).collect();
    let daily: Vec<Vec<f64>> = (0..d).map(|_| ar1(cfg.n_days, 0.5, &mut rng)).collect();
    let stride = SensitivityField::stride_for(d);
    let mut coeffs = Vec::with_capacity(cfg.n_days * cells.len() * stride);
    let mut s1 = vec![0.0; d];
    for t in 0..cfg.n_days {
        for cell in &cells {
            let p = [cell.x_km, cell.y_km];
            let c0 = 55.0 + 6.0 * base_space.at(&p) + base_day[t] * (9.0 + 2.0 * base_mix.at(&p));
            coeffs.push(c0.max(20.0));
            for j in 0..d {
                let amp = 8.0 + 3.0 * patterns[j].at(&p);
                s1[j] = (amp * (0.8 * daily[j][t]).exp().min(2.5)).clamp(1.0, 25.0);
            }
            coeffs.extend_from_slice(&s1);
            coeffs.extend(s1.iter().map(|v| -0.15 * v));
            for l in 0..d {
                for j in l + 1..d {
                    coeffs.push(0.03 * (s1[l] * s1[j]).sqrt());
                }
            }
        }
    }
    debug_assert_eq!(coeffs.len(), cfg.n_days * cells.len() * (1 + 2 * d + cross_pair_count(d)));
    let days = (0..cfg.n_days as i64).map(|t| FIRST_DAY + t).collect();
    let names = (1..=d).map(|j| format!("s{j}")).collect();
    SensitivityField::from_packed(cells, days, names, coeffs)
}

/// Generate a sensitivity field, monitor data and the truth that produced
/// them. Everything is a deterministic function of `(config, seed)`.
pub fn generate_synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<(SensitivityField, MonitorDataset, SyntheticTruth)> {
    cfg.validate()?;
    let field = synth_field(cfg, seed)?;
    let spec = &cfg.spec;

    let mut site_rng = substream(seed, "sites", &[]);
    let (w, h) = (cfg.nx as f64 * cfg.cell_km, cfg.ny as f64 * cfg.cell_km);
    let sites: Vec<Site> = (0..cfg.n_sites)
        .map(|i| {
            let x = site_rng.random::<f64>() * w;
            let y = site_rng.random::<f64>() * h;
            let ix = ((x / cfg.cell_km) as usize).min(cfg.nx - 1);
            let iy = ((y / cfg.cell_km) as usize).min(cfg.ny - 1);
            Site { id: format!("S{:03}", i + 1), x_km: x, y_km: y, cell_id: (iy * cfg.nx + ix) as i64 }
        })
        .collect();
    let coords: Vec<Coord> = sites.iter().map(Site::coord).collect();

    let chol = factor_lower(&coords, cfg.range)?;
    let mut coef_rng = substream(seed, "coefficients", &[]);
    let mut site_coefs = vec![vec![0.0; spec.site_len()]; cfg.n_sites];
    for (p, h) in cfg.hypers.iter().enumerate() {
        let z: Vec<f64> = (0..cfg.n_sites).map(|_| coef_rng.sample(StandardNormal)).collect();
        for s in 0..cfg.n_sites {
            let lz: f64 = (0..=s).map(|i| chol[(s, i)] * z[i]).sum();
            site_coefs[s][p] = h.mean + h.variance.sqrt() * lz;
        }
    }

    let state = PosteriorState {
        alpha: cfg.alpha.clone(),
        site_coefs,
        tail: cfg.tail.clone(),
        hypers: cfg.hypers.clone(),
        range: cfg.range,
    };
    let conc = evaluate_rfm_field(&field, &PerturbationVector::new(cfg.alpha.clone())?)?;
    let copula = CopulaParams::new(cfg.phi)?;
    let mut records = Vec::with_capacity(cfg.n_sites * cfg.n_days);
    for (s, site) in sites.iter().enumerate() {
        let cell = field.cell_index(site.cell_id).expect("site cell is on the grid");
        let params = ConditionalModelParams::new(spec.clone(), state.site_coefs[s].clone(), state.tail.clone())?;
        let mut rng = substream(seed, "observations", &[s as u64]);
        let y = simulate_site_year(&conc.cell_series(cell), &params, &copula, &mut rng);
        for (t, v) in y.into_iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::numerical(format!(
                    "synthetic value {v} at site {} day {}; adjust the truth",
                    site.id, field.days()[t]
                )));
            }
            records.push(MonitorRecord { day: field.days()[t], site: s, y: v });
        }
    }
    let data = MonitorDataset::new(sites, records)?;
    let truth = SyntheticTruth { config: cfg.clone(), seed, state };
    Ok((field, data, truth))
}

/// Lower Cholesky factor of `R(ρ) + jitter·I`.
fn factor_lower(coords: &[Coord], rho: f64) -> Result<nalgebra::DMatrix<f64>> {
    let mut r = crate::spatial::exp_correlation(coords, coords, rho)?;
    for i in 0..coords.len() {
        r[(i, i)] += crate::spatial::JITTER;
    }
    nalgebra::Cholesky::new(r)
        .map(|c| c.l())
        .ok_or_else(|| Error::numerical("Cholesky of the site correlation failed"))
}
