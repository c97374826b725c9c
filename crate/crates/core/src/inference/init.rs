//! Starting values for the sampler.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::evt::{covariate_row, ModelSpec, TailParams};
use crate::spatial::distance;

use super::data::LinkedDataset;
use super::state::{PosteriorState, ProcessHyper};

pub(crate) const INIT_L_THR: f64 = 0.85;
pub(crate) const INIT_U_THR: f64 = 0.95;

/// Least-squares coefficients, `None` if the design is rank deficient.
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    if x.nrows() < x.ncols() {
        return None;
    }
    let svd = x.clone().svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if !(max > 0.0) || min < 1e-9 * max {
        return None;
    }
    svd.solve(y, 0.0).ok()
}

fn design(rows: &[(f64, f64)], order: usize) -> (DMatrix<f64>, DVector<f64>) {
    let x = DMatrix::from_fn(rows.len(), order + 1, |i, j| covariate_row(rows[i].0, order)[j]);
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    (x, y)
}

fn residual_sd(x: &DMatrix<f64>, y: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let r = y - x * b;
    let dof = (y.len() as f64 - b.len() as f64).max(1.0);
    (r.norm_squared() / dof).sqrt()
}

/// Half the median distance between distinct sites, or 1 km for one site.
pub(crate) fn initial_range(linked: &LinkedDataset) -> f64 {
    let coords = linked.dataset().coords();
    let mut d = Vec::new();
    for i in 0..coords.len() {
        for j in i + 1..coords.len() {
            d.push(distance(&coords[i], &coords[j]));
        }
    }
    d.retain(|v| *v > 0.0);
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    0.5 * d[d.len() / 2]
}

/// α = 0, per-site least squares of y on X(C₀) for β, the log residual s.d.
/// for every θ_l, and half of it for σ; pooled fits cover sites that are
/// too sparse for their own regression.
pub(crate) fn initial_state(spec: &ModelSpec, linked: &LinkedDataset, conc0: &[f64], n_inputs: usize) -> Result<PosteriorState> {
    let n = spec.coef_len();
    let records = linked.records();
    let all: Vec<(f64, f64)> = records.iter().zip(conc0).map(|(r, c)| (*c, r.y)).collect();
    if all.is_empty() {
        return Err(Error::input("no monitor records to fit"));
    }
    let (px, py) = design(&all, spec.order);
    let (pooled, pooled_sd) = match least_squares(&px, &py) {
        Some(b) => {
            let sd = residual_sd(&px, &py, &b);
            (b, sd)
        }
        None => {
            let mean = py.mean();
            let sd = (py.map(|v| (v - mean).powi(2)).sum() / (py.len() as f64).max(1.0)).sqrt();
            let mut b = DVector::zeros(n);
            b[0] = mean;
            (b, sd)
        }
    };
    let pooled_sd = pooled_sd.max(1e-3);

    let mut site_coefs = Vec::with_capacity(linked.n_sites());
    for idx in linked.by_site() {
        let rows: Vec<(f64, f64)> = idx.iter().map(|&i| (conc0[i], records[i].y)).collect();
        let (x, y) = design(&rows, spec.order);
        let (beta, sd) = match least_squares(&x, &y) {
            Some(b) if rows.len() > n + 1 => {
                let sd = residual_sd(&x, &y, &b);
                (b, sd)
            }
            _ => (pooled.clone(), pooled_sd),
        };
        let sd = sd.max(1e-3);
        let mut coefs = vec![0.0; spec.site_len()];
        coefs[..n].copy_from_slice(beta.as_slice());
        for k in 1..=spec.basis.len() {
            coefs[k * n] = sd.ln();
        }
        coefs[spec.sigma_process() * n] = (0.5 * sd).ln();
        site_coefs.push(coefs);
    }

    let hypers = (0..spec.site_len())
        .map(|p| {
            let vals: Vec<f64> = site_coefs.iter().map(|c| c[p]).collect();
            let m = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len().max(1) as f64;
            ProcessHyper { mean: m, variance: v.max(1e-2) }
        })
        .collect();

    Ok(PosteriorState {
        alpha: vec![0.0; n_inputs],
        site_coefs,
        tail: TailParams {
            xi: vec![0.0; n],
            link: vec![0.0; n],
            l_thr: INIT_L_THR,
            u_thr: INIT_U_THR,
        },
        hypers,
        range: initial_range(linked),
    })
}
