//! Scalar random-walk Metropolis kernel and proposal tuning.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhOutcome {
    pub value: f64,
    pub log_target: f64,
    pub accepted: bool,
}

/// One Gaussian random-walk step on an unconstrained scalar.
///
/// `log_target` should return −∞ outside the support; such candidates, and
/// NaN, are always rejected.
pub fn mh_step<F>(current: f64, current_lp: f64, sd: f64, rng: &mut Rng, mut log_target: F) -> MhOutcome
where
    F: FnMut(f64) -> f64,
{
    let step: f64 = rng.sample(StandardNormal);
    let candidate = current + sd * step;
    let lp = log_target(candidate);
    let u: f64 = rng.random();
    if accept(current_lp, lp, u) {
        MhOutcome { value: candidate, log_target: lp, accepted: true }
    } else {
        MhOutcome { value: current, log_target: current_lp, accepted: false }
    }
}

/// Metropolis decision for a uniform draw `u ∈ [0, 1)`.
#[inline]
pub fn accept(current_lp: f64, candidate_lp: f64, u: f64) -> bool {
    if candidate_lp.is_nan() || candidate_lp == f64::NEG_INFINITY {
        return false;
    }
    if candidate_lp >= current_lp {
        return true;
    }
    u.ln() < candidate_lp - current_lp
}

/// Batch-wise Robbins–Monro adaptation of a proposal s.d. on the log scale.
///
/// After every `window` proposals the log s.d. moves by
/// `gain · (rate − target)`, with gain `2/√b` at batch `b`. Calling
/// [`ProposalTuner::freeze`] stops all further changes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProposalTuner {
    log_sd: f64,
    target: f64,
    window: usize,
    batch_accepts: usize,
    batch_len: usize,
    batches: usize,
    frozen: bool,
    accepts: u64,
    proposals: u64,
}

impl ProposalTuner {
    pub fn new(sd: f64, target: f64, window: usize) -> Self {
        Self {
            log_sd: sd.ln(),
            target,
            window: window.max(1),
            batch_accepts: 0,
            batch_len: 0,
            batches: 0,
            frozen: false,
            accepts: 0,
            proposals: 0,
        }
    }

    pub fn sd(&self) -> f64 {
        self.log_sd.exp()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn record(&mut self, accepted: bool) {
        self.proposals += 1;
        self.accepts += accepted as u64;
        if self.frozen {
            return;
        }
        self.batch_len += 1;
        self.batch_accepts += accepted as usize;
        if self.batch_len == self.window {
            self.batches += 1;
            let rate = self.batch_accepts as f64 / self.window as f64;
            let gain = 2.0 / (self.batches as f64).sqrt();
            self.log_sd = (self.log_sd + gain * (rate - self.target)).clamp(-30.0, 10.0);
            self.batch_len = 0;
            self.batch_accepts = 0;
        }
    }

    /// Stop adapting and reset the acceptance counters.
    pub fn freeze(&mut self) {
        self.frozen = true;
        self.accepts = 0;
        self.proposals = 0;
    }

    /// Acceptance rate since the last freeze (or since creation).
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            f64::NAN
        } else {
            self.accepts as f64 / self.proposals as f64
        }
    }

    pub fn counts(&self) -> (u64, u64) {
        (self.accepts, self.proposals)
    }
}

/// Draws from a one-dimensional target with an adaptive random walk.
#[derive(Debug, Clone)]
pub struct ScalarChain {
    pub draws: Vec<f64>,
    pub acceptance: f64,
    pub final_sd: f64,
}

/// Run `iterations` scalar MH steps, adapting during the first `burn_in`
/// and keeping the rest.
pub fn sample_scalar<F>(
    init: f64,
    sd: f64,
    iterations: usize,
    burn_in: usize,
    rng: &mut Rng,
    mut log_target: F,
) -> Result<ScalarChain>
where
    F: FnMut(f64) -> f64,
{
    if burn_in >= iterations {
        return Err(Error::input("burn_in must be smaller than iterations"));
    }
    let mut lp = log_target(init);
    if !lp.is_finite() {
        return Err(Error::numerical(format!("log target is {lp} at the initial value {init}")));
    }
    let mut x = init;
    let mut tuner = ProposalTuner::new(sd, 0.4, 50);
    let mut draws = Vec::with_capacity(iterations - burn_in);
    for it in 0..iterations {
        if it == burn_in {
            tuner.freeze();
        }
        let out = mh_step(x, lp, tuner.sd(), rng, &mut log_target);
        tuner.record(out.accepted);
        x = out.value;
        lp = out.log_target;
        if it >= burn_in {
            draws.push(x);
        }
    }
    Ok(ScalarChain { draws, acceptance: tuner.acceptance_rate(), final_sd: tuner.sd() })
}

/// Monte-Carlo standard error of the mean of `x` by non-overlapping batch means.
pub fn batch_means_se(x: &[f64], batches: usize) -> f64 {
    let b = batches.max(2).min(x.len());
    let size = x.len() / b;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = x.chunks_exact(size).take(b).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}
