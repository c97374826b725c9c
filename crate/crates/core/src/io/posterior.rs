use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{csv_error, open_csv, parse_error, parse_field, read_json, write_json, CsvOut};
use crate::error::{Error, Result};
use crate::evt::{ModelSpec, TailParams};
use crate::inference::{McmcConfig, PosteriorState, ProcessHyper, Site};

pub const POSTERIOR_FILE: &str = "posterior.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Sidecar describing the columns of a posterior draw file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorManifest {
    pub spec: ModelSpec,
    pub input_names: Vec<String>,
    /// Site `i` in the file is column group `site<i>_…`.
    pub sites: Vec<Site>,
    pub mcmc: McmcConfig,
    pub n_draws: usize,
    pub columns: Vec<String>,
}

/// Column names of one flattened draw, in order: perturbations, tail
/// coefficients and bounds, range, GP hypers, then per-site coefficients.
pub fn posterior_columns(spec: &ModelSpec, input_names: &[String], n_sites: usize) -> Vec<String> {
    let n = spec.coef_len();
    let mut cols: Vec<String> = input_names.iter().map(|a| format!("alpha_{a}")).collect();
    cols.extend((0..n).map(|j| format!("xi_{j}")));
    cols.extend((0..n).map(|j| format!("link_{j}")));
    cols.extend(["l_thr".to_string(), "u_thr".to_string(), "range".to_string()]);
    for k in 0..spec.n_processes() {
        let p = spec.process_name(k);
        for j in 0..n {
            cols.push(format!("{p}_mean_{j}"));
            cols.push(format!("{p}_var_{j}"));
        }
    }
    for s in 0..n_sites {
        for k in 0..spec.n_processes() {
            let p = spec.process_name(k);
            cols.extend((0..n).map(|j| format!("site{s}_{p}_{j}")));
        }
    }
    cols
}

fn flatten(state: &PosteriorState) -> Vec<f64> {
    let mut v = state.alpha.clone();
    v.extend(&state.tail.xi);
    v.extend(&state.tail.link);
    v.extend([state.tail.l_thr, state.tail.u_thr, state.range]);
    for h in &state.hypers {
        v.extend([h.mean, h.variance]);
    }
    for c in &state.site_coefs {
        v.extend(c);
    }
    v
}

fn unflatten(spec: &ModelSpec, d: usize, n_sites: usize, v: &[f64]) -> PosteriorState {
    let n = spec.coef_len();
    let mut it = v.iter().copied();
    let mut take = |k: usize| -> Vec<f64> { it.by_ref().take(k).collect() };
    let alpha = take(d);
    let xi = take(n);
    let link = take(n);
    let b = take(3);
    let hypers = take(2 * spec.site_len())
        .chunks(2)
        .map(|h| ProcessHyper { mean: h[0], variance: h[1] })
        .collect();
    let site_coefs = (0..n_sites).map(|_| take(spec.site_len())).collect();
    PosteriorState {
        alpha,
        site_coefs,
        tail: TailParams { xi, link, l_thr: b[0], u_thr: b[1] },
        hypers,
        range: b[2],
    }
}

/// Write `posterior.csv` (one row per draw) and then `manifest.json` into
/// `dir`.
pub fn write_posterior(
    dir: &Path,
    spec: &ModelSpec,
    input_names: &[String],
    sites: &[Site],
    mcmc: &McmcConfig,
    draws: &[PosteriorState],
) -> Result<PosteriorManifest> {
    let columns = posterior_columns(spec, input_names, sites.len());
    let mut out = CsvOut::new(std::iter::once("draw").chain(columns.iter().map(String::as_str)))?;
    for (i, d) in draws.iter().enumerate() {
        let row = flatten(d);
        if row.len() != columns.len() {
            return Err(Error::input("draw does not match the model layout"));
        }
        out.row(std::iter::once(i.to_string()).chain(row.iter().map(f64::to_string)))?;
    }
    out.finish(&dir.join(POSTERIOR_FILE))?;
    let manifest = PosteriorManifest {
        spec: spec.clone(),
        input_names: input_names.to_vec(),
        sites: sites.to_vec(),
        mcmc: mcmc.clone(),
        n_draws: draws.len(),
        columns,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Read draws written by [`write_posterior`], checking them against the
/// manifest.
pub fn read_posterior(dir: &Path) -> Result<(PosteriorManifest, Vec<PosteriorState>)> {
    let manifest: PosteriorManifest = read_json(&dir.join(MANIFEST_FILE))?;
    let path = dir.join(POSTERIOR_FILE);
    let expected = posterior_columns(&manifest.spec, &manifest.input_names, manifest.sites.len());
    if expected != manifest.columns {
        return Err(Error::Serde(format!("{MANIFEST_FILE}: column list does not match the model")));
    }
    let mut rdr = open_csv(&path)?;
    let header = rdr.headers().map_err(|e| csv_error(&path, e))?;
    if header.iter().skip(1).ne(expected.iter().map(String::as_str)) || header.get(0) != Some("draw") {
        return Err(parse_error(&path, 1, "header does not match the manifest"));
    }
    let d = manifest.input_names.len();
    let mut draws = Vec::with_capacity(manifest.n_draws);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(&path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let v = rec
            .iter()
            .skip(1)
            .zip(&expected)
            .map(|(raw, name)| parse_field(&path, line, name, raw))
            .collect::<Result<Vec<f64>>>()?;
        let state = unflatten(&manifest.spec, d, manifest.sites.len(), &v);
        state
            .validate(&manifest.spec, d, manifest.sites.len())
            .map_err(|e| parse_error(&path, line, e.to_string()))?;
        draws.push(state);
    }
    if draws.len() != manifest.n_draws {
        return Err(parse_error(
            &path,
            0,
            format!("{} draws, manifest lists {}", draws.len(), manifest.n_draws),
        ));
    }
    Ok((manifest, draws))
}
