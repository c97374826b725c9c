//! Holdout scoring: pinball and Brier scores, random record splits and the
//! site-wise linear regression baseline.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt::{resolve, ModelSpec};
use crate::inference::{record_concentrations, MonitorDataset, PosteriorState};
use crate::rfm::SensitivityField;
use crate::rng::substream;

pub const DEFAULT_LEVELS: [f64; 4] = [0.75, 0.95, 0.99, 0.995];
pub const DEFAULT_THRESHOLDS: [f64; 7] = [70.0, 75.0, 80.0, 85.0, 90.0, 95.0, 100.0];

/// `2 (I[y < q̂] − τ)(q̂ − y)`.
pub fn quantile_score(y: f64, qhat: f64, tau: f64) -> f64 {
    let ind = if y < qhat { 1.0 } else { 0.0 };
    2.0 * (ind - tau) * (qhat - y)
}

/// `(I[y > c] − p)²`.
pub fn brier_score(y: f64, p_exceed: f64, c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_exceed) {
        return Err(Error::input(format!("exceedance probability {p_exceed} outside [0, 1]")));
    }
    let e = if y > c { 1.0 } else { 0.0 };
    Ok((e - p_exceed).powi(2))
}

/// Record-level random split; the training set gets `round(fraction · n)`
/// records. Both halves keep the input order.
pub fn split_train_test(data: &MonitorDataset, fraction: f64, seed: u64) -> Result<(MonitorDataset, MonitorDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::input(format!("split fraction {fraction} outside (0, 1)")));
    }
    let n = data.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut substream(seed, "split", &[]));
    let n_train = (fraction * n as f64).round() as usize;
    let mut in_train = vec![false; n];
    for &i in &idx[..n_train] {
        in_train[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (r, t) in data.records().iter().zip(&in_train) {
        if *t {
            train.push(*r);
        } else {
            test.push(*r);
        }
    }
    Ok((data.with_records(train), data.with_records(test)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSettings {
    pub levels: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl Default for ScoreSettings {
    fn default() -> Self {
        Self {
            levels: DEFAULT_LEVELS.to_vec(),
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
        }
    }
}

impl ScoreSettings {
    pub fn validate(&self) -> Result<()> {
        if self.levels.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::input("quantile levels must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Average scores of one model over a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub label: String,
    pub levels: Vec<f64>,
    pub quantile_scores: Vec<f64>,
    pub thresholds: Vec<f64>,
    /// Mean Brier score times 100.
    pub brier_scores: Vec<f64>,
    pub n_test: usize,
    /// Sites scored with a fallback rule, where relevant.
    pub flagged_sites: Vec<String>,
}

/// One test record's forecasts: quantiles at each level and exceedance
/// probabilities at each threshold.
struct Forecast {
    y: f64,
    quantiles: Vec<f64>,
    p_exceed: Vec<f64>,
}

fn aggregate(label: String, settings: &ScoreSettings, forecasts: &[Forecast]) -> Result<ScoreReport> {
    let n = forecasts.len();
    let mut qs = vec![0.0; settings.levels.len()];
    let mut bs = vec![0.0; settings.thresholds.len()];
    for f in forecasts {
        for (i, tau) in settings.levels.iter().enumerate() {
            qs[i] += quantile_score(f.y, f.quantiles[i], *tau);
        }
        for (i, c) in settings.thresholds.iter().enumerate() {
            bs[i] += brier_score(f.y, f.p_exceed[i], *c)?;
        }
    }
    let nf = n as f64;
    Ok(ScoreReport {
        label,
        levels: settings.levels.clone(),
        quantile_scores: qs.into_iter().map(|s| s / nf).collect(),
        thresholds: settings.thresholds.clone(),
        brier_scores: bs.into_iter().map(|s| 100.0 * s / nf).collect(),
        n_test: n,
        flagged_sites: Vec::new(),
    })
}

/// Plug-in scores with every parameter fixed at `state`.
pub fn score_model(
    spec: &ModelSpec,
    state: &PosteriorState,
    test: &MonitorDataset,
    field: &SensitivityField,
    settings: &ScoreSettings,
) -> Result<ScoreReport> {
    settings.validate()?;
    let linked = test.link(field)?;
    state.validate(spec, field.n_inputs(), linked.n_sites())?;
    let conc = record_concentrations(&linked, field, &state.alpha);
    let forecasts = linked
        .records()
        .iter()
        .zip(&conc)
        .map(|(r, &c)| {
            let d = resolve(spec, &state.site_coefs[r.site], &state.tail, c);
            Ok(Forecast {
                y: r.y,
                quantiles: settings.levels.iter().map(|t| d.quantile(*t)).collect::<Result<_>>()?,
                p_exceed: settings.thresholds.iter().map(|c| (1.0 - d.cdf(*c)).clamp(0.0, 1.0)).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate(spec.label(), settings, &forecasts)
}

/// Site-wise least squares of y on the base concentration `C₀`. The fitted
/// value is every quantile forecast and its exceedance indicator is the
/// probability forecast. Sites with fewer than two training records or a
/// constant `C₀` use their training mean (or the pooled mean) and are flagged.
pub fn slr_baseline(
    train: &MonitorDataset,
    test: &MonitorDataset,
    field: &SensitivityField,
    settings: &ScoreSettings,
) -> Result<ScoreReport> {
    settings.validate()?;
    let tr = train.link(field)?;
    let te = test.link(field)?;
    if tr.n_sites() != te.n_sites() {
        return Err(Error::input("training and test sets must share sites"));
    }
    let base = |t: usize, cell: usize| field.base(t, cell);
    let pooled = if tr.records().is_empty() {
        0.0
    } else {
        tr.records().iter().map(|r| r.y).sum::<f64>() / tr.records().len() as f64
    };
    let mut fits = Vec::with_capacity(tr.n_sites());
    let mut flagged = Vec::new();
    for (s, idx) in tr.by_site().iter().enumerate() {
        let pts: Vec<(f64, f64)> = idx.iter().map(|&i| {
            let r = tr.records()[i];
            (base(r.t, r.cell), r.y)
        }).collect();
        match simple_regression(&pts) {
            Some(fit) => fits.push(fit),
            None => {
                let mean = if pts.is_empty() {
                    pooled
                } else {
                    pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64
                };
                fits.push((mean, 0.0));
                flagged.push(tr.sites()[s].id.clone());
            }
        }
    }
    let forecasts: Vec<Forecast> = te
        .records()
        .iter()
        .map(|r| {
            let (a, b) = fits[r.site];
            let fit = a + b * base(r.t, r.cell);
            Forecast {
                y: r.y,
                quantiles: vec![fit; settings.levels.len()],
                p_exceed: settings.thresholds.iter().map(|c| (fit > *c) as u8 as f64).collect(),
            }
        })
        .collect();
    let mut report = aggregate("SLR".into(), settings, &forecasts)?;
    report.flagged_sites = flagged;
    Ok(report)
}

/// Intercept and slope, `None` for fewer than two points or constant x.
pub fn simple_regression(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 1e-12 * (1.0 + mx * mx) * n) {
        return None;
    }
    let b = sxy / sxx;
    Some((my - b * mx, b))
}
