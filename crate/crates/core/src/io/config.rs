use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::parse_error;
use crate::error::{Error, Result};
use crate::evt::ModelSpec;
use crate::inference::McmcConfig;
use crate::predict::ScenarioSpec;
use crate::rfm::PerturbationVector;
use crate::scoring::ScoreSettings;

/// Everything a command needs, read from a flat `key = value` file and
/// then overridden from the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sensitivity: Option<PathBuf>,
    pub monitors: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub spec: ModelSpec,
    pub mcmc: McmcConfig,
    /// Master seed; commands derive their named substreams from it.
    pub seed: u64,
    pub train_fraction: f64,
    pub score: ScoreSettings,
    /// Models compared by `score`, as labels like `L4M2_GPD`.
    pub models: Vec<ModelSpec>,
    pub replicates: usize,
    /// Rank of the summarized order statistic.
    pub kth: usize,
    pub exceed_thresholds: Vec<f64>,
    /// Named perturbations of `scenario.<name> = v1,…,vd` lines.
    pub scenarios: Vec<(String, Vec<f64>)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let spec = ModelSpec::new(1, 1, true).expect("valid model");
        Self {
            sensitivity: None,
            monitors: None,
            out: None,
            models: vec![ModelSpec::new(1, 1, false).expect("valid model"), spec.clone()],
            spec,
            mcmc: McmcConfig::default(),
            seed: 0,
            train_fraction: 0.8,
            score: ScoreSettings::default(),
            replicates: 10_000,
            kth: 4,
            exceed_thresholds: vec![75.0],
            scenarios: Vec::new(),
        }
    }
}

/// Parse `L<count>M<order>[_GPD|_NoGPD]`; the tail defaults to GPD.
pub fn parse_model_label(label: &str) -> Result<ModelSpec> {
    let bad = || Error::input(format!("model label {label:?} is not of the form L<n>M<n>[_GPD|_NoGPD]"));
    let (shape, tail) = match label.split_once('_') {
        Some((s, t)) => (s, Some(t)),
        None => (label, None),
    };
    let use_gpd = match tail {
        None | Some("GPD") => true,
        Some("NoGPD") => false,
        _ => return Err(bad()),
    };
    let rest = shape.strip_prefix('L').ok_or_else(bad)?;
    let (l, m) = rest.split_once('M').ok_or_else(bad)?;
    ModelSpec::new(l.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?, use_gpd)
}

/// Parse `name=v1,…,vd` (or bare `v1,…,vd`, named `eta<index>`) into a
/// scenario.
pub fn parse_scenario(text: &str, index: usize) -> Result<ScenarioSpec> {
    let (name, values) = match text.split_once('=') {
        Some((n, v)) => (n.trim().to_string(), v),
        None => (format!("eta{index}"), text),
    };
    if name.is_empty() || name.contains(['/', '\\']) {
        return Err(Error::input(format!("invalid scenario name {name:?}")));
    }
    let eta = parse_list(values).map_err(|e| Error::input(format!("scenario {name}: {e}")))?;
    Ok(ScenarioSpec::new(name, PerturbationVector::new(eta)?))
}

fn parse_list<T: std::str::FromStr>(text: &str) -> std::result::Result<Vec<T>, String> {
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| format!("cannot parse {:?}", s.trim())))
        .collect()
}

fn parse_one<T: std::str::FromStr>(text: &str) -> std::result::Result<T, String> {
    text.parse().map_err(|_| format!("cannot parse {text:?}"))
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_error(path, i as u64 + 1, "expected key = value"))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| parse_error(path, i as u64 + 1, e.to_string()))?;
        }
        Ok(cfg)
    }

    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let r: std::result::Result<(), String> = (|| {
            match key {
                "sensitivity" => self.sensitivity = Some(value.into()),
                "monitors" => self.monitors = Some(value.into()),
                "out" => self.out = Some(value.into()),
                "model" => self.spec = parse_model_label(value).map_err(|e| e.to_string())?,
                "basis_count" => {
                    self.spec = ModelSpec::new(parse_one(value)?, self.spec.order, self.spec.use_gpd)
                        .map_err(|e| e.to_string())?
                }
                "order" => {
                    self.spec = ModelSpec::new(self.spec.basis.len(), parse_one(value)?, self.spec.use_gpd)
                        .map_err(|e| e.to_string())?
                }
                "use_gpd" => self.spec.use_gpd = parse_one(value)?,
                "iterations" => self.mcmc.iterations = parse_one(value)?,
                "burn_in" => self.mcmc.burn_in = parse_one(value)?,
                "target_acceptance" => self.mcmc.target_acceptance = parse_one(value)?,
                "adapt_window" => self.mcmc.adapt_window = parse_one(value)?,
                "alpha_sd" => self.mcmc.priors.alpha_sd = parse_one(value)?,
                "xi_prior_sd" => self.mcmc.priors.xi_sd = parse_one(value)?,
                "link_prior_sd" => self.mcmc.priors.link_sd = parse_one(value)?,
                "seed" => self.seed = parse_one(value)?,
                "train_fraction" => self.train_fraction = parse_one(value)?,
                "levels" => self.score.levels = parse_list(value)?,
                "thresholds" => self.score.thresholds = parse_list(value)?,
                "models" => {
                    self.models = value
                        .split(',')
                        .map(|m| parse_model_label(m.trim()).map_err(|e| e.to_string()))
                        .collect::<std::result::Result<_, _>>()?
                }
                "replicates" => self.replicates = parse_one(value)?,
                "kth" => self.kth = parse_one(value)?,
                "exceed_thresholds" => self.exceed_thresholds = parse_list(value)?,
                _ => match key.strip_prefix("scenario.") {
                    Some(name) => {
                        let s = parse_scenario(&format!("{name}={value}"), 0).map_err(|e| e.to_string())?;
                        let eta = s.eta.as_slice().to_vec();
                        match self.scenarios.iter_mut().find(|(n, _)| *n == s.name) {
                            Some(slot) => slot.1 = eta,
                            None => self.scenarios.push((s.name, eta)),
                        }
                    }
                    None => return Err(format!("unknown setting {key:?}")),
                },
            }
            Ok(())
        })();
        r.map_err(|e| Error::input(format!("{key}: {e}")))
    }

    /// Apply `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::input(format!("override {:?} is not key=value", o.as_ref())))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Range checks, and existence of any input files that are named.
    pub fn validate(&self) -> Result<()> {
        self.mcmc.validate()?;
        self.score.validate()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::input("train_fraction must lie in (0, 1)"));
        }
        if self.replicates == 0 || self.kth == 0 {
            return Err(Error::input("replicates and kth must be positive"));
        }
        for p in [&self.sensitivity, &self.monitors].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::from(std::io::ErrorKind::NotFound),
                ));
            }
        }
        Ok(())
    }

    /// Scenario specs built from the configured perturbations and
    /// simulation settings.
    pub fn scenario_specs(&self) -> Result<Vec<ScenarioSpec>> {
        self.scenarios
            .iter()
            .map(|(name, eta)| Ok(self.scenario(name, PerturbationVector::new(eta.clone())?)))
            .collect()
    }

    pub fn scenario(&self, name: &str, eta: PerturbationVector) -> ScenarioSpec {
        let mut s = ScenarioSpec::new(name, eta);
        s.replicates = self.replicates;
        s.order = self.kth;
        s.thresholds = self.exceed_thresholds.clone();
        s
    }

    /// Render as a config file that [`RunConfig::load`] reads back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, p) in [("sensitivity", &self.sensitivity), ("monitors", &self.monitors), ("out", &self.out)] {
            if let Some(p) = p {
                let _ = writeln!(s, "{k} = {}", p.display());
            }
        }
        let _ = writeln!(s, "model = {}", self.spec.label());
        let _ = writeln!(s, "iterations = {}", self.mcmc.iterations);
        let _ = writeln!(s, "burn_in = {}", self.mcmc.burn_in);
        let _ = writeln!(s, "target_acceptance = {}", self.mcmc.target_acceptance);
        let _ = writeln!(s, "adapt_window = {}", self.mcmc.adapt_window);
        let _ = writeln!(s, "alpha_sd = {}", self.mcmc.priors.alpha_sd);
        let _ = writeln!(s, "xi_prior_sd = {}", self.mcmc.priors.xi_sd);
        let _ = writeln!(s, "link_prior_sd = {}", self.mcmc.priors.link_sd);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "train_fraction = {}", self.train_fraction);
        let _ = writeln!(s, "levels = {}", join(&self.score.levels));
        let _ = writeln!(s, "thresholds = {}", join(&self.score.thresholds));
        let labels: Vec<String> = self.models.iter().map(ModelSpec::label).collect();
        let _ = writeln!(s, "models = {}", labels.join(","));
        let _ = writeln!(s, "replicates = {}", self.replicates);
        let _ = writeln!(s, "kth = {}", self.kth);
        let _ = writeln!(s, "exceed_thresholds = {}", join(&self.exceed_thresholds));
        for (name, eta) in &self.scenarios {
            let _ = writeln!(s, "scenario.{name} = {}", join(eta));
        }
        s
    }
}
