//! Stage-one Metropolis-within-Gibbs sampler.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt::{expit, ModelSpec, TailParams, THRESHOLD_FLOOR};
use crate::rfm::SensitivityField;
use crate::rng::{substream, Rng};
use crate::spatial::{Coord, CorrelationFactor};

use super::data::{LinkedDataset, MonitorDataset};
use super::init::initial_state;
use super::likelihood::{fill_concentrations, site_log_likelihood, total_from_sites};
use super::mh::{mh_step, MhOutcome, ProposalTuner};
use super::state::{ParameterPriors, PosteriorState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub target_acceptance: f64,
    pub seed: u64,
    /// Proposals per adaptation batch.
    pub adapt_window: usize,
    pub priors: ParameterPriors,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 25_000,
            burn_in: 10_000,
            target_acceptance: 0.4,
            seed: 0,
            adapt_window: 50,
            priors: ParameterPriors::default(),
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::input(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::input("target acceptance must lie in (0, 1)"));
        }
        if self.adapt_window == 0 {
            return Err(Error::input("adaptation window must be positive"));
        }
        if ![self.priors.alpha_sd, self.priors.xi_sd, self.priors.link_sd].iter().all(|s| *s > 0.0) {
            return Err(Error::input("prior standard deviations must be positive"));
        }
        Ok(())
    }
}

/// Post-burn-in acceptance of one named block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAcceptance {
    pub block: String,
    pub accepted: u64,
    pub proposed: u64,
    /// Final proposal s.d., averaged over sites for site-level blocks.
    pub proposal_sd: f64,
}

impl BlockAcceptance {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Per-iteration values of representative parameters, burn-in included.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub log_likelihood: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub xi0: Vec<f64>,
    pub range: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub spec: ModelSpec,
    pub draws: Vec<PosteriorState>,
    pub acceptance: Vec<BlockAcceptance>,
    pub trace: Trace,
    pub initial: PosteriorState,
}

impl ChainOutput {
    pub fn posterior_mean(&self) -> Result<PosteriorState> {
        PosteriorState::mean(&self.draws)
    }
}

/// N(0, sd²) truncated to α > −1, up to a constant.
fn alpha_log_prior(a: f64, sd: f64) -> f64 {
    if a > -1.0 {
        -0.5 * a * a / (sd * sd)
    } else {
        f64::NEG_INFINITY
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `(l, u)` from their unconstrained coordinates.
fn thresholds(eta_l: f64, eta_u: f64) -> (f64, f64) {
    let l = THRESHOLD_FLOOR + (1.0 - THRESHOLD_FLOOR) * expit(eta_l);
    (l, l + (1.0 - l) * expit(eta_u))
}

/// Uniform priors on l and u | l, expressed on the unconstrained scale.
fn threshold_log_jacobian(eta_l: f64, eta_u: f64) -> f64 {
    let (el, eu) = (expit(eta_l), expit(eta_u));
    (el * (1.0 - el)).ln() + (eu * (1.0 - eu)).ln()
}

struct Tuners {
    alpha: Vec<ProposalTuner>,
    xi: Vec<ProposalTuner>,
    link: Vec<ProposalTuner>,
    site: Vec<ProposalTuner>,
    hyper_mean: Vec<ProposalTuner>,
    hyper_var: Vec<ProposalTuner>,
    range: ProposalTuner,
    l_thr: ProposalTuner,
    u_thr: ProposalTuner,
}

impl Tuners {
    fn all_mut(&mut self) -> impl Iterator<Item = &mut ProposalTuner> {
        self.alpha
            .iter_mut()
            .chain(&mut self.xi)
            .chain(&mut self.link)
            .chain(&mut self.site)
            .chain(&mut self.hyper_mean)
            .chain(&mut self.hyper_var)
            .chain([&mut self.range, &mut self.l_thr, &mut self.u_thr])
    }
}

struct Sampler<'a> {
    spec: &'a ModelSpec,
    priors: ParameterPriors,
    linked: &'a LinkedDataset,
    field: &'a SensitivityField,
    coords: Vec<Coord>,
    /// Processes that enter the likelihood; σ is dropped without a GPD tail.
    active: Vec<usize>,
    state: PosteriorState,
    conc: Vec<f64>,
    conc_scratch: Vec<f64>,
    site_ll: Vec<f64>,
    site_ll_scratch: Vec<f64>,
    total_ll: f64,
    factor: CorrelationFactor,
    precision: DMatrix<f64>,
    eta_l: f64,
    eta_u: f64,
    tuners: Tuners,
}

fn quad(q: &DMatrix<f64>, r: &[f64]) -> f64 {
    let n = r.len();
    let mut total = 0.0;
    for j in 0..n {
        let mut col = 0.0;
        for i in 0..n {
            col += q[(i, j)] * r[i];
        }
        total += col * r[j];
    }
    total
}

impl<'a> Sampler<'a> {
    fn update_alpha(&mut self, rng: &mut Rng) {
        for j in 0..self.state.alpha.len() {
            let cur = self.state.alpha[j];
            let sd_prior = self.priors.alpha_sd;
            let lp = self.total_ll + alpha_log_prior(cur, sd_prior);
            let mut alpha = self.state.alpha.clone();
            let mut cand_ll = f64::NEG_INFINITY;
            let sd = self.tuners.alpha[j].sd();
            let (spec, linked, field, state) = (self.spec, self.linked, self.field, &self.state);
            let (conc, site_ll) = (&mut self.conc_scratch, &mut self.site_ll_scratch);
            let out = mh_step(cur, lp, sd, rng, |a| {
                let p = alpha_log_prior(a, sd_prior);
                if p == f64::NEG_INFINITY {
                    return p;
                }
                alpha[j] = a;
                fill_concentrations(linked, field, &alpha, conc);
                cand_ll = total_from_sites(spec, state, linked, conc, site_ll);
                cand_ll + p
            });
            self.tuners.alpha[j].record(out.accepted);
            if out.accepted {
                self.state.alpha[j] = out.value;
                std::mem::swap(&mut self.conc, &mut self.conc_scratch);
                std::mem::swap(&mut self.site_ll, &mut self.site_ll_scratch);
                self.total_ll = cand_ll;
            }
        }
    }

    /// MH on one tail quantity with the concentrations held fixed.
    fn update_tail<F, P>(&mut self, rng: &mut Rng, cur: f64, sd: f64, set: F, prior: P) -> MhOutcome
    where
        F: Fn(&mut TailParams, f64),
        P: Fn(f64) -> f64,
    {
        let lp = self.total_ll + prior(cur);
        let mut cand_ll = f64::NEG_INFINITY;
        let mut cand_state = self.state.clone();
        let (spec, linked) = (self.spec, self.linked);
        let (conc, site_ll) = (&self.conc, &mut self.site_ll_scratch);
        let out = mh_step(cur, lp, sd, rng, |v| {
            let p = prior(v);
            if !(p > f64::NEG_INFINITY) {
                return f64::NEG_INFINITY;
            }
            set(&mut cand_state.tail, v);
            cand_ll = total_from_sites(spec, &cand_state, linked, conc, site_ll);
            cand_ll + p
        });
        if out.accepted {
            set(&mut self.state.tail, out.value);
            std::mem::swap(&mut self.site_ll, &mut self.site_ll_scratch);
            self.total_ll = cand_ll;
        }
        out
    }

    fn update_globals(&mut self, rng: &mut Rng) {
        if !self.spec.use_gpd {
            return;
        }
        let (xi_sd, link_sd) = (self.priors.xi_sd, self.priors.link_sd);
        for j in 0..self.spec.coef_len() {
            let sd = self.tuners.xi[j].sd();
            let out = self.update_tail(rng, self.state.tail.xi[j], sd, |t, v| t.xi[j] = v, |v| -0.5 * (v / xi_sd).powi(2));
            self.tuners.xi[j].record(out.accepted);
            let sd = self.tuners.link[j].sd();
            let out = self.update_tail(rng, self.state.tail.link[j], sd, |t, v| t.link[j] = v, |v| -0.5 * (v / link_sd).powi(2));
            self.tuners.link[j].record(out.accepted);
        }
    }

    fn update_thresholds(&mut self, rng: &mut Rng) {
        if !self.spec.use_gpd {
            return;
        }
        let eta_u = self.eta_u;
        let sd = self.tuners.l_thr.sd();
        let out = self.update_tail(
            rng,
            self.eta_l,
            sd,
            |t, v| (t.l_thr, t.u_thr) = thresholds(v, eta_u),
            |v| finite_or_reject(threshold_log_jacobian(v, eta_u)),
        );
        self.tuners.l_thr.record(out.accepted);
        self.eta_l = out.value;

        let eta_l = self.eta_l;
        let sd = self.tuners.u_thr.sd();
        let out = self.update_tail(
            rng,
            self.eta_u,
            sd,
            |t, v| (t.l_thr, t.u_thr) = thresholds(eta_l, v),
            |v| finite_or_reject(threshold_log_jacobian(eta_l, v)),
        );
        self.tuners.u_thr.record(out.accepted);
        self.eta_u = out.value;
    }

    fn update_sites(&mut self, rng: &mut Rng) {
        let n = self.spec.coef_len();
        let n_sites = self.state.site_coefs.len();
        let mut scratch = vec![0.0; self.spec.site_len()];
        for s in 0..n_sites {
            for &k in &self.active {
                for j in 0..n {
                    let p = k * n + j;
                    let hyper = self.state.hypers[p];
                    // Σ_{t≠s} Q_st r_t for the GP prior delta.
                    let mut cross = 0.0;
                    for t in 0..n_sites {
                        if t != s {
                            cross += self.precision[(s, t)] * (self.state.site_coefs[t][p] - hyper.mean);
                        }
                    }
                    let q_ss = self.precision[(s, s)];
                    let r_cur = self.state.site_coefs[s][p] - hyper.mean;
                    let prior_delta = |v: f64| {
                        let r = v - hyper.mean;
                        -(q_ss * (r * r - r_cur * r_cur) + 2.0 * (r - r_cur) * cross) / (2.0 * hyper.variance)
                    };
                    let cur_ll = self.site_ll[s];
                    let cur = self.state.site_coefs[s][p];
                    scratch.copy_from_slice(&self.state.site_coefs[s]);
                    let mut cand_ll = f64::NEG_INFINITY;
                    let (spec, linked, conc, tail) = (self.spec, self.linked, &self.conc, &self.state.tail);
                    let tuner = &mut self.tuners.site[s * self.spec.site_len() + p];
                    let out = mh_step(cur, cur_ll, tuner.sd(), rng, |v| {
                        scratch[p] = v;
                        cand_ll = site_log_likelihood(spec, &scratch, tail, linked, s, conc);
                        cand_ll + prior_delta(v)
                    });
                    tuner.record(out.accepted);
                    if out.accepted {
                        self.state.site_coefs[s][p] = out.value;
                        self.site_ll[s] = cand_ll;
                    }
                }
            }
        }
        self.total_ll = self.site_ll.iter().sum();
    }

    fn update_hypers(&mut self, rng: &mut Rng) {
        let n = self.spec.coef_len();
        let hp = self.priors.hyper;
        let n_sites = self.state.site_coefs.len() as f64;
        for &k in &self.active.clone() {
            for j in 0..n {
                let p = k * n + j;
                let vals = self.state.process_values(self.spec, k, j);
                let q = &self.precision;
                let h = self.state.hypers[p];

                let lp_mean = |m: f64| {
                    let r: Vec<f64> = vals.iter().map(|v| v - m).collect();
                    -quad(q, &r) / (2.0 * h.variance) + hp.ln_mean_prior(m)
                };
                let tuner = &mut self.tuners.hyper_mean[p];
                let out = mh_step(h.mean, lp_mean(h.mean), tuner.sd(), rng, lp_mean);
                tuner.record(out.accepted);
                self.state.hypers[p].mean = out.value;

                let m = self.state.hypers[p].mean;
                let r: Vec<f64> = vals.iter().map(|v| v - m).collect();
                let qf = quad(q, &r);
                let lp_var = |lt: f64| {
                    let tau = lt.exp();
                    -0.5 * n_sites * lt - qf / (2.0 * tau) + hp.ln_variance_prior(tau) + lt
                };
                let lt = h.variance.ln();
                let tuner = &mut self.tuners.hyper_var[p];
                let out = mh_step(lt, lp_var(lt), tuner.sd(), rng, lp_var);
                tuner.record(out.accepted);
                if out.accepted {
                    self.state.hypers[p].variance = out.value.exp();
                }
            }
        }
    }

    fn range_target(&self, factor: &CorrelationFactor) -> f64 {
        let n = self.spec.coef_len();
        let mut total = 0.0;
        for &k in &self.active {
            for j in 0..n {
                let h = self.state.hypers[k * n + j];
                total += factor.log_density(&self.state.process_values(self.spec, k, j), h.mean, h.variance);
            }
        }
        total
    }

    fn update_range(&mut self, rng: &mut Rng) {
        let hp = self.priors.hyper;
        let lr = self.state.range.ln();
        let lp = self.range_target(&self.factor) + hp.ln_log_range_prior(lr);
        let mut cand = None;
        let sd = self.tuners.range.sd();
        let out = mh_step(lr, lp, sd, rng, |v| {
            match CorrelationFactor::new(&self.coords, v.exp()) {
                Ok(f) => {
                    let t = self.range_target(&f) + hp.ln_log_range_prior(v);
                    cand = Some(f);
                    t
                }
                Err(_) => f64::NEG_INFINITY,
            }
        });
        self.tuners.range.record(out.accepted);
        if out.accepted {
            let f = cand.expect("accepted candidate has a factor");
            self.state.range = f.range();
            self.precision = f.precision();
            self.factor = f;
        }
    }
}

fn finite_or_reject(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::NEG_INFINITY
    }
}

fn logit_from_state(t: &TailParams) -> (f64, f64) {
    let el = (t.l_thr - THRESHOLD_FLOOR) / (1.0 - THRESHOLD_FLOOR);
    let eu = (t.u_thr - t.l_thr) / (1.0 - t.l_thr);
    (logit(el), logit(eu))
}

fn initial_sd(spec: &ModelSpec, p: usize) -> f64 {
    if p == 0 {
        1.0
    } else if p < spec.coef_len() {
        0.5
    } else {
        0.1
    }
}

/// Run the stage-one sampler and keep the post-burn-in draws.
pub fn run_chain(
    spec: &ModelSpec,
    config: &McmcConfig,
    data: &MonitorDataset,
    field: &SensitivityField,
) -> Result<ChainOutput> {
    config.validate()?;
    let linked = data.link(field)?;
    run_chain_linked(spec, config, &linked, field)
}

pub fn run_chain_linked(
    spec: &ModelSpec,
    config: &McmcConfig,
    linked: &LinkedDataset,
    field: &SensitivityField,
) -> Result<ChainOutput> {
    config.validate()?;
    let d = field.n_inputs();
    let n_sites = linked.n_sites();
    if n_sites == 0 || linked.records().is_empty() {
        return Err(Error::input("no monitor records to fit"));
    }
    let mut conc = vec![0.0; linked.records().len()];
    fill_concentrations(linked, field, &vec![0.0; d], &mut conc);
    let state = initial_state(spec, linked, &conc, d)?;
    let coords = linked.dataset().coords();
    let factor = CorrelationFactor::new(&coords, state.range)?;
    let mut site_ll = vec![0.0; n_sites];
    let total_ll = total_from_sites(spec, &state, linked, &conc, &mut site_ll);
    if !total_ll.is_finite() {
        let bad: Vec<&str> = site_ll
            .iter()
            .zip(linked.sites())
            .filter(|(v, _)| !v.is_finite())
            .map(|(_, s)| s.id.as_str())
            .take(5)
            .collect();
        return Err(Error::numerical(format!(
            "log likelihood at the initial values is {total_ll}; non-finite at sites {bad:?}"
        )));
    }
    let (eta_l, eta_u) = logit_from_state(&state.tail);
    let w = config.adapt_window;
    let tgt = config.target_acceptance;
    let n = spec.coef_len();
    let tuners = Tuners {
        alpha: (0..d).map(|_| ProposalTuner::new(0.05, tgt, w)).collect(),
        xi: (0..n).map(|_| ProposalTuner::new(0.05, tgt, w)).collect(),
        link: (0..n).map(|_| ProposalTuner::new(0.2, tgt, w)).collect(),
        site: (0..n_sites * spec.site_len())
            .map(|i| ProposalTuner::new(initial_sd(spec, i % spec.site_len()), tgt, w))
            .collect(),
        hyper_mean: state.hypers.iter().map(|h| ProposalTuner::new(h.variance.sqrt() / 2.0, tgt, w)).collect(),
        hyper_var: (0..spec.site_len()).map(|_| ProposalTuner::new(0.3, tgt, w)).collect(),
        range: ProposalTuner::new(0.2, tgt, w),
        l_thr: ProposalTuner::new(0.5, tgt, w),
        u_thr: ProposalTuner::new(0.5, tgt, w),
    };
    let mut active: Vec<usize> = (0..=spec.basis.len()).collect();
    if spec.use_gpd {
        active.push(spec.sigma_process());
    }
    let precision = factor.precision();
    let mut sampler = Sampler {
        spec,
        priors: config.priors,
        linked,
        field,
        coords,
        active,
        state: state.clone(),
        conc_scratch: conc.clone(),
        conc,
        site_ll_scratch: site_ll.clone(),
        site_ll,
        total_ll,
        factor,
        precision,
        eta_l,
        eta_u,
        tuners,
    };

    let mut rng = substream(config.seed, "chain", &[]);
    let mut draws = Vec::with_capacity(config.iterations - config.burn_in);
    let mut trace = Trace::default();
    for it in 0..config.iterations {
        if it == config.burn_in {
            sampler.tuners.all_mut().for_each(ProposalTuner::freeze);
        }
        sampler.update_alpha(&mut rng);
        sampler.update_globals(&mut rng);
        sampler.update_sites(&mut rng);
        sampler.update_hypers(&mut rng);
        sampler.update_range(&mut rng);
        sampler.update_thresholds(&mut rng);

        trace.log_likelihood.push(sampler.total_ll);
        trace.alpha.push(sampler.state.alpha.clone());
        trace.xi0.push(sampler.state.tail.xi[0]);
        trace.range.push(sampler.state.range);
        if it >= config.burn_in {
            draws.push(sampler.state.clone());
        }
    }
    let acceptance = summarize_acceptance(spec, &sampler.tuners, n_sites, &sampler.active);
    Ok(ChainOutput {
        spec: spec.clone(),
        draws,
        acceptance,
        trace,
        initial: state,
    })
}

fn block(name: String, tuners: &[&ProposalTuner]) -> BlockAcceptance {
    let (mut a, mut p) = (0, 0);
    for t in tuners {
        let (ta, tp) = t.counts();
        a += ta;
        p += tp;
    }
    let sd = tuners.iter().map(|t| t.sd()).sum::<f64>() / tuners.len().max(1) as f64;
    BlockAcceptance { block: name, accepted: a, proposed: p, proposal_sd: sd }
}

fn summarize_acceptance(spec: &ModelSpec, t: &Tuners, n_sites: usize, active: &[usize]) -> Vec<BlockAcceptance> {
    let n = spec.coef_len();
    let mut out = Vec::new();
    for (j, tu) in t.alpha.iter().enumerate() {
        out.push(block(format!("alpha_{j}"), &[tu]));
    }
    if spec.use_gpd {
        for j in 0..n {
            out.push(block(format!("xi_{j}"), &[&t.xi[j]]));
            out.push(block(format!("link_{j}"), &[&t.link[j]]));
        }
    }
    for &k in active {
        let name = spec.process_name(k);
        for j in 0..n {
            let p = k * n + j;
            let sites: Vec<&ProposalTuner> = (0..n_sites).map(|s| &t.site[s * spec.site_len() + p]).collect();
            out.push(block(format!("{name}_{j}"), &sites));
            out.push(block(format!("{name}_mean_{j}"), &[&t.hyper_mean[p]]));
            out.push(block(format!("{name}_var_{j}"), &[&t.hyper_var[p]]));
        }
    }
    out.push(block("range".into(), &[&t.range]));
    if spec.use_gpd {
        out.push(block("l_thr".into(), &[&t.l_thr]));
        out.push(block("u_thr".into(), &[&t.u_thr]));
    }
    out
}
