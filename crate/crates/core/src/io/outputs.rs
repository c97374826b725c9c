use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_json, write_json, CsvOut};
use crate::error::{Error, Result};
use crate::inference::{frechet_transform, lag1_pairs, BlockAcceptance, CopulaFit, CopulaParams, Residual, Site, Trace};
use crate::predict::{ReplicateSummary, SummaryDifference};
use crate::rfm::Cell;
use crate::scoring::ScoreReport;

/// Per-block acceptance after burn-in.
pub fn write_diagnostics(path: &Path, blocks: &[BlockAcceptance]) -> Result<()> {
    let mut out = CsvOut::new(["block", "accepted", "proposed", "rate", "proposal_sd"])?;
    for b in blocks {
        out.row([
            b.block.clone(),
            b.accepted.to_string(),
            b.proposed.to_string(),
            b.rate().to_string(),
            b.proposal_sd.to_string(),
        ])?;
    }
    out.finish(path)
}

/// Every iteration, burn-in included.
pub fn write_trace(path: &Path, trace: &Trace, input_names: &[String]) -> Result<()> {
    let mut header = vec!["iteration".to_string(), "log_likelihood".to_string()];
    header.extend(input_names.iter().map(|a| format!("alpha_{a}")));
    header.extend(["xi_0".to_string(), "range".to_string()]);
    let mut out = CsvOut::new(&header)?;
    for i in 0..trace.log_likelihood.len() {
        let mut row = vec![(i + 1).to_string(), trace.log_likelihood[i].to_string()];
        row.extend(trace.alpha[i].iter().map(f64::to_string));
        row.extend([trace.xi0[i].to_string(), trace.range[i].to_string()]);
        out.row(row)?;
    }
    out.finish(path)
}

#[derive(Serialize, Deserialize)]
struct CopulaFile {
    phi: f64,
    lag1: f64,
    n_pairs: usize,
    independence_fallback: bool,
}

/// The fitted copula range without its residual table.
pub fn write_copula(path: &Path, fit: &CopulaFit) -> Result<()> {
    write_json(
        path,
        &CopulaFile {
            phi: fit.params.phi,
            lag1: fit.lag1,
            n_pairs: fit.n_pairs,
            independence_fallback: fit.independence_fallback,
        },
    )
}

pub fn read_copula(path: &Path) -> Result<CopulaParams> {
    let f: CopulaFile = read_json(path)?;
    CopulaParams::new(f.phi).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
}

pub fn write_residuals(path: &Path, residuals: &[Residual], sites: &[Site]) -> Result<()> {
    let mut out = CsvOut::new(["day", "site_id", "conc", "o3_ppb", "u", "z", "frechet"])?;
    for r in residuals {
        out.row([
            r.day.to_string(),
            sites[r.site].id.clone(),
            r.conc.to_string(),
            r.y.to_string(),
            r.u.to_string(),
            r.z.to_string(),
            frechet_transform(r.z).to_string(),
        ])?;
    }
    out.finish(path)
}

/// Same-site residuals on consecutive days, on the normal and unit-Fréchet
/// scales.
pub fn write_residual_pairs(path: &Path, residuals: &[Residual], sites: &[Site]) -> Result<()> {
    let mut out = CsvOut::new(["site_id", "day", "z_prev", "z", "frechet_prev", "frechet"])?;
    for (a, b) in lag1_pairs(residuals) {
        let (a, b) = (&residuals[a], &residuals[b]);
        out.row([
            sites[b.site].id.clone(),
            b.day.to_string(),
            a.z.to_string(),
            b.z.to_string(),
            frechet_transform(a.z).to_string(),
            frechet_transform(b.z).to_string(),
        ])?;
    }
    out.finish(path)
}

fn threshold_label(c: f64) -> String {
    format!("{c}")
}

pub fn write_summary(path: &Path, summary: &ReplicateSummary) -> Result<()> {
    let mut header = vec!["cell_id".to_string(), "x_km".into(), "y_km".into(), "mean_kth".into()];
    header.extend(summary.thresholds.iter().map(|c| format!("p_exceed_{}", threshold_label(*c))));
    let mut out = CsvOut::new(&header)?;
    for (i, cell) in summary.cells.iter().enumerate() {
        let mut row = vec![
            cell.id.to_string(),
            cell.x_km.to_string(),
            cell.y_km.to_string(),
            summary.mean_kth[i].to_string(),
        ];
        row.extend(summary.p_exceed[i].iter().map(f64::to_string));
        out.row(row)?;
    }
    out.finish(path)
}

pub fn write_difference(path: &Path, diff: &SummaryDifference, cells: &[Cell], thresholds: &[f64]) -> Result<()> {
    let mut header = vec!["cell_id".to_string(), "x_km".into(), "y_km".into(), "diff_mean_kth".into()];
    header.extend(thresholds.iter().map(|c| format!("diff_p_exceed_{}", threshold_label(*c))));
    let mut out = CsvOut::new(&header)?;
    for (i, cell) in cells.iter().enumerate() {
        let mut row = vec![
            cell.id.to_string(),
            cell.x_km.to_string(),
            cell.y_km.to_string(),
            diff.mean_kth[i].to_string(),
        ];
        row.extend(diff.p_exceed[i].iter().map(f64::to_string));
        out.row(row)?;
    }
    out.finish(path)
}

/// One row per model: mean quantile score at each level, then mean Brier
/// score (×100) at each threshold.
pub fn write_scores(path: &Path, reports: &[ScoreReport]) -> Result<()> {
    let first = reports.first().ok_or_else(|| Error::input("no score reports"))?;
    let mut header = vec!["model".to_string(), "n_test".to_string()];
    header.extend(first.levels.iter().map(|t| format!("qs_{t}")));
    header.extend(first.thresholds.iter().map(|c| format!("bs_{}", threshold_label(*c))));
    header.push("flagged_sites".into());
    let mut out = CsvOut::new(&header)?;
    for r in reports {
        if r.levels != first.levels || r.thresholds != first.thresholds {
            return Err(Error::input("score reports use different levels or thresholds"));
        }
        let mut row = vec![r.label.clone(), r.n_test.to_string()];
        row.extend(r.quantile_scores.iter().map(f64::to_string));
        row.extend(r.brier_scores.iter().map(f64::to_string));
        row.push(r.flagged_sites.join(";"));
        out.row(row)?;
    }
    out.finish(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn summary_layout() {
        let s = ReplicateSummary {
            scenario: "base".into(),
            cells: vec![Cell { id: 4, x_km: 6.0, y_km: 18.0 }],
            order: 4,
            thresholds: vec![75.0, 84.5],
            replicates: 10,
            mean_kth: vec![71.25],
            p_exceed: vec![vec![0.3, 0.1]],
            draw_indices: vec![0; 10],
            raw: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_summary(&p, &s).unwrap();
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            "cell_id,x_km,y_km,mean_kth,p_exceed_75,p_exceed_84.5\n4,6,18,71.25,0.3,0.1\n"
        );
    }

    #[test]
    fn score_table_layout() {
        let r = ScoreReport {
            label: "SLR".into(),
            levels: vec![0.99],
            quantile_scores: vec![0.5],
            thresholds: vec![75.0],
            brier_scores: vec![2.0],
            n_test: 9,
            flagged_sites: vec!["a".into(), "b".into()],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_scores(&p, &[r]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "model,n_test,qs_0.99,bs_75,flagged_sites\nSLR,9,0.5,2,a;b\n");
        assert!(write_scores(&p, &[]).is_err());
    }

    #[test]
    fn copula_round_trip() {
        let fit = CopulaFit {
            params: CopulaParams { phi: 1.7 },
            lag1: (-1.0f64 / 1.7).exp(),
            n_pairs: 10,
            independence_fallback: false,
            residuals: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        write_copula(&p, &fit).unwrap();
        assert_eq!(read_copula(&p).unwrap().phi, 1.7);
    }
}
