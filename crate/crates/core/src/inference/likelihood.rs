use crate::error::Result;
use crate::evt::{resolve, ModelSpec, TailParams};
use crate::rfm::{evaluate_packed, PerturbationVector, SensitivityField};

use super::data::{LinkedDataset, MonitorDataset};
use super::state::PosteriorState;

/// Model concentration at every linked record under perturbation `alpha`.
pub fn record_concentrations(linked: &LinkedDataset, field: &SensitivityField, alpha: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; linked.records().len()];
    fill_concentrations(linked, field, alpha, &mut out);
    out
}

pub(crate) fn fill_concentrations(
    linked: &LinkedDataset,
    field: &SensitivityField,
    alpha: &[f64],
    out: &mut [f64],
) {
    for (c, r) in out.iter_mut().zip(linked.records()) {
        *c = evaluate_packed(field.coefficients(r.t, r.cell), alpha);
    }
}

/// Log likelihood of one site's records; `conc` is indexed like the records.
pub fn site_log_likelihood(
    spec: &ModelSpec,
    coefs: &[f64],
    tail: &TailParams,
    linked: &LinkedDataset,
    site: usize,
    conc: &[f64],
) -> f64 {
    let records = linked.records();
    let mut total = 0.0;
    for &i in &linked.by_site()[site] {
        let v = resolve(spec, coefs, tail, conc[i]).ln_density(records[i].y);
        if !(v > f64::NEG_INFINITY) {
            return f64::NEG_INFINITY;
        }
        total += v;
    }
    total
}

/// Sum of site log likelihoods, −∞ as soon as one site has zero likelihood.
pub(crate) fn total_from_sites(
    spec: &ModelSpec,
    state: &PosteriorState,
    linked: &LinkedDataset,
    conc: &[f64],
    per_site: &mut [f64],
) -> f64 {
    let mut total = 0.0;
    for (s, slot) in per_site.iter_mut().enumerate() {
        *slot = site_log_likelihood(spec, &state.site_coefs[s], &state.tail, linked, s, conc);
        total += *slot;
    }
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

/// Log likelihood of linked data under `state`.
pub fn linked_log_likelihood(
    spec: &ModelSpec,
    state: &PosteriorState,
    linked: &LinkedDataset,
    field: &SensitivityField,
) -> Result<f64> {
    state.validate(spec, field.n_inputs(), linked.n_sites())?;
    PerturbationVector::new(state.alpha.clone())?;
    let conc = record_concentrations(linked, field, &state.alpha);
    let mut per_site = vec![0.0; linked.n_sites()];
    Ok(total_from_sites(spec, state, linked, &conc, &mut per_site))
}

/// Stage-one log likelihood: conditionally independent records, each
/// contributing the log conditional density at its model concentration.
pub fn log_likelihood(
    spec: &ModelSpec,
    state: &PosteriorState,
    data: &MonitorDataset,
    field: &SensitivityField,
) -> Result<f64> {
    let linked = data.link(field)?;
    linked_log_likelihood(spec, state, &linked, field)
}
