//! End-to-end acceptance checks, one line of output per criterion.
//!
//! Runs without the libtest harness so the verdict lines are always printed.
//! Pass a substring to run only the matching criteria, e.g.
//! `cargo test -p ozevt-cli --test acceptance -- recovery`.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng as _;
use statrs::distribution::{Binomial, Continuous, ContinuousCDF, DiscreteCDF, Normal};
use statrs::statistics::Distribution as _;

use ozevt_core::evt::{conditional_cdf, conditional_density, conditional_quantile, gpd_cdf, gpd_quantile};
use ozevt_core::inference::{batch_means_se, run_chain, sample_scalar, McmcConfig, PosteriorState};
use ozevt_core::predict::{replicate_concentrations, run_scenario, simulate_site_year, ScenarioSpec};
use ozevt_core::rfm::{compose_perturbation, evaluate_rfm, evaluate_rfm_field};
use ozevt_core::rng::{substream, Rng};
use ozevt_core::scoring::{score_model, split_train_test, ScoreSettings};
use ozevt_core::synth::{generate_synthetic, SyntheticConfig};
use ozevt_core::{
    Cell, ConditionalModelParams, GpdParams, ModelSpec, PerturbationVector, SensitivityField, TailParams,
};

use common::{dir_contents, integrate, integrate_lower, integrate_upper, ozevt, path_str, pearson};

type Verdict = (bool, String);

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Verdict,
}

const CRITERIA: [Criterion; 11] = [
    Criterion { id: 1, name: "gpd round-trip", budget: Some(Duration::from_secs(1)), run: gpd_round_trip },
    Criterion { id: 2, name: "density normalization", budget: Some(Duration::from_secs(30)), run: density_normalization },
    Criterion { id: 3, name: "quantile/cdf inverse and continuity", budget: None, run: quantile_cdf_consistency },
    Criterion { id: 4, name: "gaussian collapse", budget: None, run: gaussian_collapse },
    Criterion { id: 5, name: "rfm oracle equivalence", budget: None, run: rfm_equivalence },
    Criterion { id: 6, name: "mh conjugate normal", budget: Some(Duration::from_secs(10)), run: mh_conjugate },
    Criterion { id: 7, name: "synthetic recovery", budget: Some(Duration::from_secs(300)), run: synthetic_recovery },
    Criterion { id: 8, name: "copula marginal preservation", budget: None, run: copula_marginals },
    Criterion { id: 9, name: "gpd tail beats no-gpd on heavy tails", budget: None, run: tail_ordering },
    Criterion { id: 10, name: "scenario engine", budget: None, run: scenario_engine },
    Criterion { id: 11, name: "cli determinism", budget: None, run: cli_determinism },
];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut ran = 0;
    for c in &CRITERIA {
        let label = format!("{} {}", c.id, c.name);
        if !filters.is_empty() && !filters.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let t0 = Instant::now();
        let (mut pass, mut detail) = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        let elapsed = t0.elapsed();
        if let Some(b) = c.budget {
            if elapsed > b {
                pass = false;
                detail.push_str(&format!("; over the {:?} budget", b));
            }
        }
        failed += !pass as usize;
        println!(
            "criterion {:>2} {:<40} {}  {:.2}s  {}",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            detail
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn gpd_round_trip() -> Verdict {
    let shapes = [-0.4, -0.1, -1e-9, 0.0, 1e-9, 0.1, 0.5];
    let mut worst: f64 = 0.0;
    for &xi in &shapes {
        for (mu, sigma) in [(0.0, 1.0), (80.0, 5.0)] {
            let g = GpdParams::new(mu, sigma, xi).unwrap();
            for i in 1..=999 {
                let p = i as f64 / 1000.0;
                let q = gpd_quantile(p, &g).unwrap();
                worst = worst.max((gpd_cdf(q, &g) - p).abs());
            }
        }
    }
    (worst < 1e-10, format!("max |F(q(p)) - p| = {worst:.1e} over 999 p x 7 shapes x 2 scales"))
}

/// A random valid parameter set for model `spec` and a concentration.
fn random_params(spec: &ModelSpec, xi0: f64, rng: &mut Rng) -> (ConditionalModelParams, f64) {
    let n = spec.coef_len();
    let mut site = vec![0.0; spec.site_len()];
    site[0] = rng.random_range(35.0..65.0);
    site[1] = rng.random_range(5.0..15.0);
    for j in 2..n {
        site[j] = rng.random_range(-1.0..1.0);
    }
    for k in 1..spec.n_processes() {
        let level: f64 = if k == spec.sigma_process() {
            rng.random_range(2.0..8.0)
        } else {
            rng.random_range(3.0..10.0)
        };
        site[k * n] = level.ln();
        for j in 1..n {
            site[k * n + j] = rng.random_range(-0.1..0.1);
        }
    }
    let mut xi = vec![0.0; n];
    xi[0] = xi0;
    xi[1] = rng.random_range(-0.02..0.02);
    let link: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let l_thr = rng.random_range(0.8..0.95);
    let u_thr = rng.random_range(l_thr..0.995);
    let tail = TailParams { xi, link, l_thr, u_thr };
    let c = rng.random_range(25.0..85.0);
    (ConditionalModelParams::new(spec.clone(), site, tail).unwrap(), c)
}

/// The 100 parameter sets shared by criteria 2 and 3: L ∈ {1, 4}, M ∈ {1, 2},
/// negative, tiny and positive tail shapes, and some models without a tail.
fn parameter_sets() -> Vec<(ConditionalModelParams, f64)> {
    let mut rng = substream(2024, "acceptance-params", &[]);
    let shapes = [-0.35, -0.1, -1e-9, 0.0, 1e-9, 0.15, 0.4];
    (0..100)
        .map(|i| {
            let l = if i % 2 == 0 { 1 } else { 4 };
            let m = if (i / 2) % 2 == 0 { 1 } else { 2 };
            let gpd = i % 10 != 9;
            let spec = ModelSpec::new(l, m, gpd).unwrap();
            random_params(&spec, shapes[i % shapes.len()], &mut rng)
        })
        .collect()
}

/// ∫ density, split at every kink (interior knots and the threshold).
fn total_mass(params: &ConditionalModelParams, c: f64) -> f64 {
    let dist = params.resolve(c);
    let f = |y: f64| conditional_density(y, c, params);
    let theta = dist.thetas()[0];
    let mu = dist.mu();
    let mut cuts: Vec<f64> = dist.knot_quantiles().iter().copied().filter(|q| q.is_finite() && *q < mu).collect();
    if mu.is_finite() {
        cuts.push(mu);
    }
    if cuts.is_empty() {
        cuts.push(dist.beta());
    }
    let tol = 1e-12;
    let mut total = integrate_lower(&f, cuts[0], theta, tol);
    for w in cuts.windows(2) {
        total += integrate(&f, w[0], w[1], tol);
    }
    let last = *cuts.last().unwrap();
    total += match dist.tail() {
        Some(t) => match t.upper_endpoint() {
            Some(end) => integrate(&f, last, end, tol),
            None => integrate_upper(&f, last, t.sigma, tol),
        },
        None => integrate_upper(&f, last, theta, tol),
    };
    total
}

fn density_normalization() -> Verdict {
    let sets = parameter_sets();
    let mut worst: f64 = 0.0;
    for (p, c) in &sets {
        worst = worst.max((total_mass(p, *c) - 1.0).abs());
    }
    (worst < 1e-6, format!("max |mass - 1| = {worst:.1e} over {} parameter sets", sets.len()))
}

fn quantile_cdf_consistency() -> Verdict {
    let sets = parameter_sets();
    let mut inv: f64 = 0.0;
    let mut jump: f64 = 0.0;
    let delta = 1e-12;
    for (p, c) in &sets {
        let dist = p.resolve(*c);
        let mut taus: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
        let t = dist.threshold();
        let mut joins: Vec<f64> = p.spec.basis.knots().iter().copied().filter(|k| *k > 0.0 && *k < 1.0).collect();
        if t < 1.0 {
            joins.push(t);
            taus.extend([t - 1e-9, t, t + 1e-9]);
        }
        for &tau in &taus {
            let q = conditional_quantile(tau, *c, p).unwrap();
            inv = inv.max((conditional_cdf(q, *c, p) - tau).abs());
        }
        for &k in &joins {
            let lo = conditional_quantile(k - delta, *c, p).unwrap();
            let hi = conditional_quantile(k + delta, *c, p).unwrap();
            jump = jump.max((hi - lo).abs());
        }
    }
    (
        inv < 1e-10 && jump < 1e-8,
        format!("max |F(q(tau)) - tau| = {inv:.1e}; max jump across T and knots = {jump:.1e}"),
    )
}

fn gaussian_collapse() -> Verdict {
    let mut worst = [0.0f64; 3];
    // Without a tail, and with a tail whose threshold is pinned at 1.
    for (gpd, l, u) in [(false, 0.85, 0.95), (true, 1.0, 1.0)] {
        let spec = ModelSpec::new(1, 1, gpd).unwrap();
        for (beta, theta) in [(47.0, 3.0), (55.5, 8.25), (30.0, 0.5)] {
            let mut site = vec![0.0; spec.site_len()];
            site[0] = beta;
            site[2] = f64::ln(theta);
            let tail = TailParams { xi: vec![0.2, 0.0], link: vec![0.0; 2], l_thr: l, u_thr: u };
            let p = ConditionalModelParams::new(spec.clone(), site, tail).unwrap();
            let n = Normal::new(beta, theta).unwrap();
            for c in [20.0, 50.0, 95.0] {
                for i in -80..=80 {
                    let y = beta + theta * i as f64 / 10.0;
                    worst[0] = worst[0].max((conditional_density(y, c, &p) - n.pdf(y)).abs());
                    worst[1] = worst[1].max((conditional_cdf(y, c, &p) - normal_cdf(&n, y)).abs());
                }
                for i in 1..1000 {
                    let tau = i as f64 / 1000.0;
                    let q = conditional_quantile(tau, c, &p).unwrap();
                    worst[2] = worst[2].max((q - n.inverse_cdf(tau)).abs());
                }
            }
        }
    }
    (
        worst.iter().all(|w| *w < 1e-12),
        format!("max error density {:.1e}, cdf {:.1e}, quantile {:.1e}", worst[0], worst[1], worst[2]),
    )
}

/// Normal CDF by quadrature of the density. The closed-form CDF in statrs is
/// only good to about 3e-11, too coarse for a 1e-12 comparison.
fn normal_cdf(n: &Normal, y: f64) -> f64 {
    let f = |x: f64| n.pdf(x);
    let (m, s) = (n.mean().unwrap(), n.std_dev().unwrap());
    if y <= m {
        integrate_lower(&f, y, s, 1e-15)
    } else {
        1.0 - integrate_upper(&f, y, s, 1e-15)
    }
}

fn random_field(d: usize, days: usize, cells: usize, rng: &mut Rng) -> SensitivityField {
    let stride = SensitivityField::stride_for(d);
    let coeffs: Vec<f64> = (0..days * cells * stride)
        .map(|i| {
            if i % stride == 0 {
                rng.random_range(30.0..70.0)
            } else {
                rng.random_range(-10.0..10.0)
            }
        })
        .collect();
    let cells: Vec<Cell> = (0..cells).map(|i| Cell { id: i as i64, x_km: 12.0 * i as f64, y_km: 0.0 }).collect();
    let names = (0..d).map(|j| format!("s{}", j + 1)).collect();
    SensitivityField::from_packed(cells, (0..days as i64).collect(), names, coeffs).unwrap()
}

fn rfm_equivalence() -> Verdict {
    let mut rng = substream(5, "acceptance-rfm", &[]);
    let d = 6;
    let field = random_field(d, 9, 11, &mut rng);
    let mut mismatches = 0;
    let mut formula_err: f64 = 0.0;
    for _ in 0..20 {
        let alpha = PerturbationVector::new((0..d).map(|_| rng.random_range(-0.9..1.0)).collect()).unwrap();
        let a = alpha.as_slice();
        let grid = evaluate_rfm_field(&field, &alpha).unwrap();
        for t in 0..field.n_days() {
            for c in 0..field.n_cells() {
                if grid.get(t, c).to_bits() != evaluate_rfm(&field, t, c, &alpha).unwrap().to_bits() {
                    mismatches += 1;
                }
                let mut v = field.base(t, c);
                for j in 0..d {
                    v += field.first_order(t, c, j) * a[j] + 0.5 * field.second_diag(t, c, j) * a[j] * a[j];
                    for l in 0..j {
                        v += field.second_cross(t, c, l, j) * a[l] * a[j];
                    }
                }
                formula_err = formula_err.max((v - grid.get(t, c)).abs() / v.abs().max(1.0));
            }
        }
    }
    let mut assoc: f64 = 0.0;
    for _ in 0..1000 {
        let mut draw = || PerturbationVector::new((0..d).map(|_| rng.random_range(-0.95..1.5)).collect()).unwrap();
        let (a, b, c) = (draw(), draw(), draw());
        let left = compose_perturbation(&compose_perturbation(&a, &b).unwrap(), &c).unwrap();
        let right = compose_perturbation(&a, &compose_perturbation(&b, &c).unwrap()).unwrap();
        for (x, y) in left.as_slice().iter().zip(right.as_slice()) {
            assoc = assoc.max((x - y).abs());
        }
    }
    (
        mismatches == 0 && formula_err < 1e-13 && assoc < 1e-12,
        format!(
            "{mismatches} field/scalar mismatches in 1980 cells; independent formula rel. error {formula_err:.1e}; associativity error {assoc:.1e}"
        ),
    )
}

fn mh_conjugate() -> Verdict {
    let mut rng = substream(17, "acceptance-mh-data", &[]);
    let y: Vec<f64> = (0..20).map(|_| 3.0 + ozevt_core::normal::quantile(rng.random::<f64>())).collect();
    let prior_var = 100.0;
    let post_var = 1.0 / (y.len() as f64 + 1.0 / prior_var);
    let post_mean = post_var * y.iter().sum::<f64>();
    let log_target = |mu: f64| -0.5 * mu * mu / prior_var - 0.5 * y.iter().map(|v| (v - mu).powi(2)).sum::<f64>();
    let mut rng = substream(17, "acceptance-mh-chain", &[]);
    let chain = sample_scalar(0.0, 1.0, 12_000, 2_000, &mut rng, log_target).unwrap();
    let n = chain.draws.len() as f64;
    let m = chain.draws.iter().sum::<f64>() / n;
    let sq: Vec<f64> = chain.draws.iter().map(|x| (x - m).powi(2)).collect();
    let v = sq.iter().sum::<f64>() / n;
    let (se_m, se_v) = (batch_means_se(&chain.draws, 50), batch_means_se(&sq, 50));
    let (zm, zv) = ((m - post_mean) / se_m, (v - post_var) / se_v);
    (
        chain.draws.len() == 10_000 && zm.abs() < 3.0 && zv.abs() < 3.0,
        format!(
            "mean {m:.4} vs {post_mean:.4} ({zm:+.2} se), variance {v:.5} vs {post_var:.5} ({zv:+.2} se), acceptance {:.2}",
            chain.acceptance
        ),
    )
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let (lo, frac) = (h.floor() as usize, h - h.floor());
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Desk-scale synthetic data, independent days, fitted on the reduced
/// 5,000 / 2,000 schedule.
fn synthetic_recovery() -> Verdict {
    let mut cfg = SyntheticConfig::desk(0.1);
    cfg.phi = RECOVERY_PHI;
    let (field, data, truth) = generate_synthetic(&cfg, 1).unwrap();
    let mc = McmcConfig { iterations: 5_000, burn_in: 2_000, seed: 1, ..McmcConfig::default() };
    let out = run_chain(&cfg.spec, &mc, &data, &field).unwrap();
    let mut covered = 0;
    let mut cis = Vec::new();
    for j in 0..cfg.n_inputs {
        let mut v: Vec<f64> = out.draws.iter().map(|d| d.alpha[j]).collect();
        v.sort_by(f64::total_cmp);
        let (lo, hi) = (percentile(&v, 0.025), percentile(&v, 0.975));
        let hit = (lo..=hi).contains(&cfg.alpha[j]);
        covered += hit as usize;
        cis.push(format!("{:+.2}{}[{:+.3},{:+.3}]", cfg.alpha[j], if hit { "in" } else { "out" }, lo, hi));
    }
    let mean = out.posterior_mean().unwrap();
    let fitted: Vec<f64> = mean.site_coefs.iter().map(|c| c[0]).collect();
    let actual: Vec<f64> = truth.state.site_coefs.iter().map(|c| c[0]).collect();
    let r = pearson(&fitted, &actual);
    let rates: Vec<f64> = out.acceptance.iter().map(|b| b.rate()).collect();
    let (rmin, rmax) = rates.iter().fold((1.0f64, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
    (
        covered >= 5 && r > 0.9,
        format!(
            "{covered}/6 alpha covered {}; beta corr {r:.3}; block acceptance {rmin:.2}..{rmax:.2}",
            cis.join(" ")
        ),
    )
}

/// Copula range used for the recovery data; stage one assumes independent
/// days, so its credible intervals are only calibrated for data that has them.
const RECOVERY_PHI: f64 = 1e-6;

fn copula_marginals() -> Verdict {
    let spec = ModelSpec::new(1, 2, true).unwrap();
    let site = vec![52.0, 14.0, -0.5, f64::ln(6.0), 0.05, 0.0, f64::ln(4.0), 0.0, 0.0];
    let tail = TailParams { xi: vec![0.1, 0.0, 0.0], link: vec![0.0, 0.5, 0.0], l_thr: 0.85, u_thr: 0.95 };
    let params = ConditionalModelParams::new(spec, site, tail).unwrap();
    let copula = ozevt_core::inference::CopulaParams::new(1.5).unwrap();
    let c = 60.0;
    let season = vec![c; 92];
    let n = 100_000;
    let mut picked = Vec::with_capacity(n);
    let (mut prev, mut next) = (Vec::new(), Vec::new());
    for r in 0..n {
        let mut rng = substream(8, "acceptance-copula", &[r as u64]);
        let y = simulate_site_year(&season, &params, &copula, &mut rng);
        // One value per independent season for the quantile check.
        picked.push(y[45]);
        if r < 20_000 {
            let z: Vec<f64> = y.iter().map(|v| ozevt_core::normal::quantile(conditional_cdf(*v, c, &params))).collect();
            prev.extend_from_slice(&z[..91]);
            next.extend_from_slice(&z[1..]);
        }
    }
    let q95 = conditional_quantile(0.95, c, &params).unwrap();
    let below = picked.iter().filter(|v| **v <= q95).count() as u64;
    let b = Binomial::new(0.95, n as u64).unwrap();
    let (lo, hi) = (b.inverse_cdf(0.005), b.inverse_cdf(0.995));
    picked.sort_by(f64::total_cmp);
    let emp = picked[(0.95 * n as f64) as usize - 1];
    let r = pearson(&prev, &next);
    let target = copula.lag1();
    (
        (lo..=hi).contains(&below) && (r - target).abs() < 0.02,
        format!(
            "empirical q95 {emp:.3} vs {q95:.3} ({below} of {n} below, 99% band {lo}..{hi}); lag-1 {r:.4} vs {target:.4}"
        ),
    )
}

fn tail_ordering() -> Verdict {
    let levels = vec![0.99, 0.995];
    let settings = ScoreSettings { levels: levels.clone(), thresholds: vec![75.0] };
    let mut ok = true;
    let mut parts = Vec::new();
    for seed in 1..=3u64 {
        let cfg = SyntheticConfig::desk(0.3);
        let (field, data, _) = generate_synthetic(&cfg, 100 + seed).unwrap();
        let (train, test) = split_train_test(&data, 0.8, seed).unwrap();
        let mc = McmcConfig { iterations: 5_000, burn_in: 2_000, seed, ..McmcConfig::default() };
        let mut qs = Vec::new();
        for gpd in [true, false] {
            let spec = ModelSpec::new(1, 2, gpd).unwrap();
            let out = run_chain(&spec, &mc, &train, &field).unwrap();
            let report = score_model(&spec, &out.posterior_mean().unwrap(), &test, &field, &settings).unwrap();
            qs.push(report.quantile_scores);
        }
        let better = qs[0].iter().zip(&qs[1]).all(|(g, n)| g < n);
        ok &= better;
        parts.push(format!(
            "seed {seed}: GPD {:.3}/{:.3} vs no-GPD {:.3}/{:.3}",
            qs[0][0], qs[0][1], qs[1][0], qs[1][1]
        ));
    }
    (ok, format!("QS at tau 0.99/0.995; {}", parts.join("; ")))
}

fn scenario_engine() -> Verdict {
    let mut cfg = SyntheticConfig::desk(0.1);
    cfg.nx = 8;
    cfg.ny = 8;
    cfg.n_sites = 15;
    cfg.n_days = 30;
    let (field, data, truth) = generate_synthetic(&cfg, 3).unwrap();
    let mut rng = substream(10, "acceptance-draws", &[]);
    let draws: Vec<PosteriorState> = (0..12)
        .map(|_| {
            let mut s = truth.state.clone();
            for a in &mut s.alpha {
                *a += rng.random_range(-0.05..0.05);
            }
            s
        })
        .collect();
    let copula = ozevt_core::inference::CopulaParams::new(cfg.phi).unwrap();
    let d = cfg.n_inputs;
    let mk = |name: &str, eta: Vec<f64>| {
        let mut s = ScenarioSpec::new(name, PerturbationVector::new(eta).unwrap());
        s.replicates = 200;
        s
    };
    let run = |s: &ScenarioSpec| run_scenario(s, &cfg.spec, &draws, &copula, &field, data.sites(), 42).unwrap();
    let base = run(&mk("base", vec![0.0; d]));
    let zero = run(&mk("zero", vec![0.0; d]));
    let same = base.mean_kth == zero.mean_kth && base.p_exceed == zero.p_exceed;
    let mut s1 = vec![0.0; d];
    s1[0] = -0.5;
    let eta = PerturbationVector::new(s1.clone()).unwrap();
    let zero_eta = PerturbationVector::zeros(d);
    let controlled = run(&mk("s1", s1));
    let mut used: Vec<usize> = controlled.draw_indices.clone();
    used.sort_unstable();
    used.dedup();
    let mut exact = 0;
    let mut checked = 0;
    for &i in used.iter().take(10) {
        let alpha = PerturbationVector::new(draws[i].alpha.clone()).unwrap();
        let star = compose_perturbation(&alpha, &eta).unwrap();
        let direct = evaluate_rfm_field(&field, &star).unwrap();
        let via = replicate_concentrations(&field, alpha.as_slice(), &eta).unwrap();
        let base_direct = evaluate_rfm_field(&field, &alpha).unwrap();
        let base_via = replicate_concentrations(&field, alpha.as_slice(), &zero_eta).unwrap();
        exact += (direct == via && base_direct == base_via) as usize;
        checked += 1;
    }
    let lower = controlled.mean_kth.iter().zip(&base.mean_kth).filter(|(c, b)| c < b).count();
    (
        same && checked == 10 && exact == 10,
        format!(
            "eta = 0 summaries identical: {same}; S1 field exact on {exact}/{checked} draws; S1 lowers mean 4th-highest in {lower}/{} cells",
            base.cells.len()
        ),
    )
}

/// Run `args` twice into the same output directory and compare every file.
fn rerun_identical(args: &[&str], out: &std::path::Path) -> bool {
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--out", path_str(out)]);
    ozevt(&full);
    let first = dir_contents(out);
    std::fs::remove_dir_all(out).unwrap();
    ozevt(&full);
    !first.is_empty() && first == dir_contents(out)
}

fn cli_determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    let fit = tmp.path().join("fit");
    let sens = gen.join("sensitivity.csv");
    let mons = gen.join("monitors.csv");
    let (sens, mons, post) = (path_str(&sens), path_str(&mons), path_str(&fit));
    let steps: [(&str, Vec<&str>); 5] = [
        ("gen-synth", vec!["gen-synth", "--seed", "7", "--sites", "20", "--days", "30", "--grid", "10"]),
        (
            "fit",
            vec![
                "fit", "--sensitivity", sens, "--monitors", mons, "--iterations", "400", "--burn-in", "200", "--seed",
                "5", "--model", "L1M1_GPD",
            ],
        ),
        (
            "predict",
            vec![
                "predict", "--posterior", post, "--sensitivity", sens, "--eta", "s1=-0.5,0,0,0,0,0", "--replicates",
                "40", "--seed", "9",
            ],
        ),
        (
            "score",
            vec![
                "score", "--sensitivity", sens, "--monitors", mons, "--models", "L1M1_NoGPD,L1M1_GPD", "--iterations",
                "300", "--burn-in", "100", "--seed", "3",
            ],
        ),
        ("diagnose", vec!["diagnose", "--posterior", post, "--sensitivity", sens, "--monitors", mons]),
    ];
    let mut diffs = Vec::new();
    for (name, args) in &steps {
        let out = match *name {
            "gen-synth" => gen.clone(),
            "fit" => fit.clone(),
            other => tmp.path().join(other),
        };
        if !rerun_identical(args, &out) {
            diffs.push(*name);
        }
    }
    (
        diffs.is_empty(),
        if diffs.is_empty() {
            "gen-synth, fit, predict, score and diagnose byte-identical across reruns".to_string()
        } else {
            format!("outputs differ for: {}", diffs.join(", "))
        },
    )
}
