//! Two-stage estimation: Metropolis–Hastings over the marginal model with
//! observations independent given the parameters, then an AR(1) Gaussian
//! copula fitted to the residuals at the posterior mean.

mod chain;
mod copula;
mod data;
mod init;
mod likelihood;
mod mh;
mod state;

pub use chain::{run_chain, run_chain_linked, BlockAcceptance, ChainOutput, McmcConfig, Trace};
pub use copula::{fit_copula, frechet_transform, lag1_pairs, residuals, CopulaFit, CopulaParams, Residual, INDEPENDENCE_PHI};
pub use data::{LinkedDataset, LinkedRecord, MonitorDataset, MonitorRecord, Site};
pub use likelihood::{linked_log_likelihood, log_likelihood, record_concentrations, site_log_likelihood};
pub use mh::{accept, batch_means_se, mh_step, sample_scalar, MhOutcome, ProposalTuner, ScalarChain};
pub use state::{ParameterPriors, PosteriorState, ProcessHyper};
