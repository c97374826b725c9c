use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ozevt_core::inference::{fit_copula, residuals, run_chain, MonitorDataset};
use ozevt_core::io::{self, RunConfig};
use ozevt_core::predict::{run_scenario, ReplicateSummary};
use ozevt_core::scoring::{score_model, slr_baseline, split_train_test};
use ozevt_core::synth::{generate_synthetic, SyntheticConfig};
use ozevt_core::{ModelSpec, PerturbationVector, SensitivityField};

#[derive(Parser)]
#[command(name = "ozevt", version, about = "Calibrate a reduced-form ozone model against monitors and simulate control scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sensitivity field, monitor data and the truth behind them.
    GenSynth(GenSynthArgs),
    /// Run the MCMC fit and the copula stage.
    Fit(FitArgs),
    /// Simulate emission-control scenarios from a fitted posterior.
    Predict(PredictArgs),
    /// Compare models on a held-out split.
    Score(ScoreArgs),
    /// Write residual pairs on the normal and unit-Fréchet scales.
    Diagnose(DiagnoseArgs),
}

/// Settings shared by the commands that read a run configuration.
#[derive(Args)]
struct Common {
    /// Flat `key = value` run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sensitivity: Option<PathBuf>,
    #[arg(long)]
    monitors: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenSynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    sites: usize,
    #[arg(long, default_value_t = 92)]
    days: usize,
    /// Grid cells per side.
    #[arg(long, default_value_t = 20)]
    grid: usize,
    #[arg(long, default_value_t = 6)]
    inputs: usize,
    /// Generating model.
    #[arg(long, default_value = "L1M2_GPD")]
    model: String,
    /// GPD shape intercept of the truth.
    #[arg(long, default_value_t = 0.1)]
    xi: f64,
    /// Temporal range of the residual copula (days).
    #[arg(long, default_value_t = 1.5)]
    phi: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Model label such as L4M2_GPD.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    /// Directory written by `fit`.
    #[arg(long)]
    posterior: PathBuf,
    /// Scenario as `name=v1,...,vd`; repeatable. The base case is always run.
    #[arg(long = "eta", value_name = "NAME=V1,...")]
    etas: Vec<String>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Rank of the summarized order statistic.
    #[arg(long)]
    kth: Option<usize>,
    /// Comma-separated exceedance thresholds (ppb).
    #[arg(long)]
    exceed: Option<String>,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated model labels.
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    common: Common,
    /// Directory written by `fit`.
    #[arg(long)]
    posterior: PathBuf,
}

impl Common {
    fn resolve(&self, extra: &[(&str, Option<String>)]) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.apply_overrides(&self.overrides)?;
        let mut set = |k: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.set(k, &v));
        set("seed", self.seed.map(|s| s.to_string()))?;
        set("sensitivity", self.sensitivity.as_ref().map(|p| p.display().to_string()))?;
        set("monitors", self.monitors.as_ref().map(|p| p.display().to_string()))?;
        set("out", self.out.as_ref().map(|p| p.display().to_string()))?;
        for (k, v) in extra {
            set(k, v.clone())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    match p {
        Some(p) => Ok(p),
        None => Err(ozevt_core::Error::Input(format!("no {what} given (flag or config key)")).into()),
    }
}

fn load_inputs(cfg: &RunConfig) -> Result<(SensitivityField, MonitorDataset)> {
    let field = io::load_sensitivity(required(&cfg.sensitivity, "sensitivity file")?)?;
    let data = io::load_monitors(required(&cfg.monitors, "monitor file")?)?;
    Ok((field, data))
}

fn gen_synth(a: GenSynthArgs) -> Result<()> {
    let spec = io::parse_model_label(&a.model)?;
    let mut cfg = SyntheticConfig::desk(a.xi).with_spec(spec);
    cfg.n_sites = a.sites;
    cfg.n_days = a.days;
    cfg.nx = a.grid;
    cfg.ny = a.grid;
    cfg.alpha = (0..a.inputs).map(|j| cfg.alpha[j % cfg.alpha.len()]).collect();
    cfg.n_inputs = a.inputs;
    cfg.phi = a.phi;
    let (field, data, truth) = generate_synthetic(&cfg, a.seed)?;
    io::write_sensitivity(&a.out.join("sensitivity.csv"), &field)?;
    io::write_monitors(&a.out.join("monitors.csv"), &data)?;
    io::write_json(&a.out.join("truth.json"), &truth)?;
    eprintln!("wrote {} cells x {} days, {} records to {}", field.n_cells(), field.n_days(), data.len(), a.out.display());
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let cfg = a.common.resolve(&[
        ("model", a.model),
        ("iterations", a.iterations.map(|v| v.to_string())),
        ("burn_in", a.burn_in.map(|v| v.to_string())),
    ])?;
    let out = required(&cfg.out, "output directory")?;
    let (field, data) = load_inputs(&cfg)?;
    let mut mcmc = cfg.mcmc.clone();
    mcmc.seed = cfg.seed;
    let t0 = Instant::now();
    let chain = run_chain(&cfg.spec, &mcmc, &data, &field)?;
    eprintln!("{} iterations in {:.1?}", mcmc.iterations, t0.elapsed());
    let mean = chain.posterior_mean()?;
    let copula = fit_copula(&cfg.spec, &mean, &data, &field)?;
    if copula.independence_fallback {
        eprintln!("warning: lag-one residual correlation {} is not positive; using independent days", copula.lag1);
    }
    let names = field.input_names();
    io::write_diagnostics(&out.join("diagnostics.csv"), &chain.acceptance)?;
    io::write_trace(&out.join("trace.csv"), &chain.trace, names)?;
    io::write_residuals(&out.join("residuals.csv"), &copula.residuals, data.sites())?;
    io::write_copula(&out.join("copula.json"), &copula)?;
    io::write_atomic(&out.join("run.cfg"), cfg.to_text().as_bytes())?;
    // The manifest goes last: its presence marks a complete fit.
    io::write_posterior(out, &cfg.spec, names, data.sites(), &mcmc, &chain.draws)?;
    for (j, n) in names.iter().enumerate() {
        eprintln!("alpha_{n}: posterior mean {:.4}", mean.alpha[j]);
    }
    eprintln!("copula range phi = {:.3} days", copula.params.phi);
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let mut cfg = a.common.resolve(&[
        ("replicates", a.replicates.map(|v| v.to_string())),
        ("kth", a.kth.map(|v| v.to_string())),
        ("exceed_thresholds", a.exceed),
    ])?;
    for (i, e) in a.etas.iter().enumerate() {
        let s = io::parse_scenario(e, i + 1)?;
        cfg.set(&format!("scenario.{}", s.name), e.split_once('=').map_or(e.as_str(), |p| p.1))?;
    }
    let out = required(&cfg.out, "output directory")?;
    let field = io::load_sensitivity(required(&cfg.sensitivity, "sensitivity file")?)?;
    let (manifest, draws) = io::read_posterior(&a.posterior)?;
    if manifest.input_names != field.input_names() {
        bail!(ozevt_core::Error::Link("posterior and sensitivity file have different inputs".into()));
    }
    let copula = io::read_copula(&a.posterior.join("copula.json"))?;
    let mut scenarios = vec![cfg.scenario("base", PerturbationVector::zeros(field.n_inputs()))];
    scenarios.extend(cfg.scenario_specs()?.into_iter().filter(|s| s.name != "base"));
    let mut summaries: Vec<ReplicateSummary> = Vec::new();
    for s in &scenarios {
        let t0 = Instant::now();
        let summary = run_scenario(s, &manifest.spec, &draws, &copula, &field, &manifest.sites, cfg.seed)?;
        io::write_summary(&out.join(format!("summary_{}.csv", s.name)), &summary)?;
        eprintln!("scenario {}: {} replicates in {:.1?}", s.name, s.replicates, t0.elapsed());
        summaries.push(summary);
    }
    for (i, a) in summaries.iter().enumerate() {
        for b in &summaries[i + 1..] {
            let d = b.difference(a)?;
            let path = out.join(format!("diff_{}_minus_{}.csv", b.scenario, a.scenario));
            io::write_difference(&path, &d, &a.cells, &a.thresholds)?;
        }
    }
    Ok(())
}

fn score(a: ScoreArgs) -> Result<()> {
    let cfg = a.common.resolve(&[
        ("models", a.models),
        ("iterations", a.iterations.map(|v| v.to_string())),
        ("burn_in", a.burn_in.map(|v| v.to_string())),
        ("train_fraction", a.train_fraction.map(|v| v.to_string())),
    ])?;
    let out = required(&cfg.out, "output directory")?;
    let (field, data) = load_inputs(&cfg)?;
    let (train, test) = split_train_test(&data, cfg.train_fraction, cfg.seed)?;
    let mut mcmc = cfg.mcmc.clone();
    mcmc.seed = cfg.seed;
    let mut reports = Vec::new();
    for spec in &cfg.models {
        let t0 = Instant::now();
        let chain = run_chain(spec, &mcmc, &train, &field)?;
        let report = score_model(spec, &chain.posterior_mean()?, &test, &field, &cfg.score)?;
        eprintln!("{} fitted and scored in {:.1?}", spec.label(), t0.elapsed());
        reports.push(report);
    }
    reports.push(slr_baseline(&train, &test, &field, &cfg.score)?);
    io::write_scores(&out.join("scores.csv"), &reports)?;
    Ok(())
}

fn diagnose(a: DiagnoseArgs) -> Result<()> {
    let cfg = a.common.resolve(&[])?;
    let out = required(&cfg.out, "output directory")?;
    let (field, data) = load_inputs(&cfg)?;
    let (manifest, draws) = io::read_posterior(&a.posterior)?;
    if data.sites() != manifest.sites.as_slice() {
        bail!(ozevt_core::Error::Link("monitor sites differ from the fitted sites".into()));
    }
    let spec: ModelSpec = manifest.spec;
    let mean = ozevt_core::inference::PosteriorState::mean(&draws)?;
    let linked = data.link(&field)?;
    let res = residuals(&spec, &mean, &linked, &field)?;
    io::write_residual_pairs(&out.join("residual_pairs.csv"), &res, data.sites())?;
    Ok(())
}

/// 2 for usage errors, 3 for bad data or files, 4 for numerical failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    use ozevt_core::Error;
    match err.downcast_ref::<Error>() {
        Some(Error::Numerical(_)) => 4,
        Some(Error::Input(_)) => 2,
        Some(_) => 3,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::GenSynth(a) => gen_synth(a).context("gen-synth failed"),
        Command::Fit(a) => fit(a).context("fit failed"),
        Command::Predict(a) => predict(a).context("predict failed"),
        Command::Score(a) => score(a).context("score failed"),
        Command::Diagnose(a) => diagnose(a).context("diagnose failed"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
