//! Property checks returning a description of the first violation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbmcda::association::{is_canonical, AssocPrior, AssocPriorConfig, ClutterDensity, Window};
use rbmcda::diagnostics::{ess, kolmogorov, ospa, WeightedIntDist};
use rbmcda::filter::{rbmcda_step, FilterConfig, ParticleSet};
use rbmcda::model::{BirthCoupling, ModelParams, OuModel};
use rbmcda::pmcmc::{pgibbs, pmmh, SamplerConfig, TrackingProblem};
use rbmcda::simulate::{simulate_scenario, Scenario, ScenarioConfig};

pub type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn small_scenario(seed: u64, n_targets: usize, n_obs: usize) -> Scenario {
    let cfg = ScenarioConfig {
        n_targets,
        n_obs,
        params: ModelParams::new(100.0, 0.5, 0.5).unwrap(),
        ..Default::default()
    };
    simulate_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Clutter and deaths enabled so every code path is exercised.
pub fn busy_config() -> AssocPriorConfig {
    AssocPriorConfig {
        clutter_prob: 0.05,
        clutter_density: ClutterDensity::Uniform { window: Window::square(-50.0, 150.0) },
        death_threshold: Some(0.3),
        ..Default::default()
    }
}

fn run_steps(seed: u64, cfg: AssocPriorConfig, mut each: impl FnMut(&ParticleSet) -> Check) -> Check {
    let sc = small_scenario(seed, 4, 30);
    let stats = sc.stats().unwrap();
    let model = OuModel::new(ModelParams::new(100.0, 0.5, 0.5).unwrap(), &stats, BirthCoupling::Joint).unwrap();
    let prior = AssocPrior::new(cfg, sc.len()).unwrap();
    let fcfg = FilterConfig::with_particles(20);
    let mut set = ParticleSet::new(20).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    for o in &sc.observations {
        rbmcda_step(&mut set, o, &model, &prior, &fcfg, &mut rng).map_err(|e| e.to_string())?;
        each(&set)?;
    }
    Ok(())
}

pub fn weight_normalization(seeds: u64) -> Check {
    for seed in 0..seeds {
        for cfg in [AssocPriorConfig::default(), busy_config()] {
            run_steps(seed, cfg, |set| {
                let s: f64 = set.weights().iter().sum();
                ensure((s - 1.0).abs() <= 1e-9, || format!("seed {seed}: weights sum to {s}"))
            })?;
        }
    }
    Ok(())
}

pub fn canonicality(seeds: u64) -> Check {
    for seed in 0..seeds {
        run_steps(seed, busy_config(), |set| {
            ensure(set.particles.iter().all(|p| is_canonical(&p.history)), || format!("seed {seed}: non-canonical particle"))
        })?;
    }
    let sc = small_scenario(7, 3, 15);
    let problem = TrackingProblem::new(sc.observations, AssocPriorConfig::default(), BirthCoupling::Joint).unwrap();
    let cfg = SamplerConfig { iterations: 300, store_histories: true, ..Default::default() };
    let trace = pgibbs(&problem, &cfg, &mut ChaCha8Rng::seed_from_u64(3)).map_err(|e| e.to_string())?;
    ensure(trace.samples.len() == cfg.iterations + 1, || "one retained history per iteration expected".into())?;
    ensure(
        trace.samples.iter().all(|s| is_canonical(s.history.as_deref().unwrap())),
        || "non-canonical retained history".into(),
    )
}

/// Dead targets never become visible again, and a target is dead exactly
/// when it has gone unobserved for longer than the threshold.
pub fn death_monotonicity(seeds: u64) -> Check {
    let cfg = busy_config();
    let threshold = cfg.death_threshold.unwrap();
    for seed in 0..seeds {
        let mut previous: Vec<Vec<bool>> = Vec::new();
        let mut last_time = 0.0;
        run_steps(seed, cfg, |set| {
            let now = set.last_time.unwrap();
            for p in &set.particles {
                for (j, (&vis, &seen)) in p.summary.visible.iter().zip(&p.summary.last_seen).enumerate() {
                    let expected = now - seen <= threshold;
                    ensure(vis == expected, || format!("seed {seed}: target {j} visibility {vis} at gap {}", now - seen))?;
                }
            }
            // Lineages change at resampling, so compare only when none happened.
            if !set.resampled.last().copied().unwrap_or(false) && previous.len() == set.len() {
                for (p, prev) in set.particles.iter().zip(&previous) {
                    for (j, &was) in prev.iter().enumerate() {
                        ensure(was || !p.summary.visible[j], || format!("seed {seed}: target {j} revived"))?;
                    }
                }
            }
            ensure(now >= last_time, || "time went backwards".into())?;
            last_time = now;
            previous = set.particles.iter().map(|p| p.summary.visible.clone()).collect();
            Ok(())
        })?;
    }
    Ok(())
}

fn random_points(rng: &mut ChaCha8Rng, max: usize) -> Vec<[f64; 2]> {
    let n = rng.random_range(0..=max);
    (0..n).map(|_| [rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)]).collect()
}

pub fn ospa_metric(trials: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..trials {
        let (x, y, z) = (random_points(&mut rng, 5), random_points(&mut rng, 5), random_points(&mut rng, 5));
        let c = rng.random_range(1.0..15.0);
        let p = rng.random_range(1.0..3.0);
        let d = |a: &[[f64; 2]], b: &[[f64; 2]]| ospa(a, b, c, p).unwrap();
        ensure(d(&x, &x).abs() < 1e-9, || "ospa(x, x) != 0".into())?;
        ensure((d(&x, &y) - d(&y, &x)).abs() < 1e-9, || "ospa not symmetric".into())?;
        ensure(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-9, || "ospa triangle inequality".into())?;
        ensure(d(&x, &y) <= c + 1e-12, || "ospa above cutoff".into())?;
    }
    Ok(())
}

fn random_dist(rng: &mut ChaCha8Rng) -> WeightedIntDist {
    let n = rng.random_range(1..6);
    WeightedIntDist::from_weighted((0..n).map(|_| (rng.random_range(0..8), rng.random::<f64>() + 1e-3))).unwrap()
}

pub fn kolmogorov_metric(trials: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..trials {
        let (a, b, c) = (random_dist(&mut rng), random_dist(&mut rng), random_dist(&mut rng));
        ensure(kolmogorov(&a, &a) == 0.0, || "kolmogorov(a, a) != 0".into())?;
        ensure((kolmogorov(&a, &b) - kolmogorov(&b, &a)).abs() < 1e-12, || "kolmogorov not symmetric".into())?;
        ensure(
            kolmogorov(&a, &c) <= kolmogorov(&a, &b) + kolmogorov(&b, &c) + 1e-12,
            || "kolmogorov triangle inequality".into(),
        )?;
        let d = kolmogorov(&a, &b);
        ensure((0.0..=1.0).contains(&d), || format!("kolmogorov out of range: {d}"))?;
    }
    Ok(())
}

pub fn ess_formulas() -> Check {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    ensure(close(ess(&[0.25; 4]), 4.0), || "uniform ESS".into())?;
    ensure(close(ess(&[1.0, 0.0, 0.0]), 1.0), || "degenerate ESS".into())?;
    ensure(close(ess(&[0.5, 0.5, 0.0, 0.0]), 2.0), || "half ESS".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let n = rng.random_range(1..50);
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let e = ess(&w);
        let direct = 1.0 / w.iter().map(|v| v * v).sum::<f64>();
        ensure(close(e, direct) && e >= 1.0 - 1e-12 && e <= n as f64 + 1e-9, || format!("ESS {e} for n={n}"))?;
    }
    Ok(())
}

pub fn adaptation_freeze() -> Check {
    let sc = small_scenario(5, 3, 20);
    let problem = TrackingProblem::new(sc.observations, AssocPriorConfig::default(), BirthCoupling::Joint).unwrap();
    let mut cfg = SamplerConfig { iterations: 400, ..Default::default() };
    cfg.adaptation.start = 20;
    cfg.adaptation.end = Some(150);
    for algo in 0..2 {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let trace = if algo == 0 { pmmh(&problem, &cfg, &mut rng) } else { pgibbs(&problem, &cfg, &mut rng) }
            .map_err(|e| e.to_string())?;
        // proposal_covs[i - 1] is the covariance used at iteration i, set by
        // the adaptation after iteration i - 1.
        let frozen = trace.proposal_covs[150];
        ensure(trace.proposal_covs[151..].iter().all(|c| *c == frozen), || "covariance changed after window".into())?;
        ensure(
            trace.proposal_covs[..20].iter().all(|c| *c == trace.proposal_covs[0]),
            || "covariance changed before window".into(),
        )?;
        ensure(trace.proposal_covs[100] != trace.proposal_covs[0], || "covariance never adapted".into())?;
    }
    Ok(())
}

pub fn seed_determinism() -> Check {
    let a = small_scenario(9, 4, 25);
    let b = small_scenario(9, 4, 25);
    ensure(a == b, || "simulator not deterministic".into())?;
    let problem = TrackingProblem::new(a.observations, busy_config(), BirthCoupling::Joint).unwrap();
    let cfg = SamplerConfig { iterations: 120, store_histories: true, record_locations: true, ..Default::default() };
    for algo in 0..2 {
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if algo == 0 { pmmh(&problem, &cfg, &mut rng) } else { pgibbs(&problem, &cfg, &mut rng) }.unwrap()
        };
        ensure(run(4) == run(4), || "trace differs for equal seeds".into())?;
        ensure(run(4) != run(5), || "trace ignores the seed".into())?;
    }
    Ok(())
}

/// Every property with its name, in a fixed order.
pub fn all() -> Vec<(&'static str, Check)> {
    vec![
        ("weight normalization", weight_normalization(10)),
        ("canonicality preservation", canonicality(10)),
        ("OSPA metric axioms", ospa_metric(500)),
        ("Kolmogorov metric axioms", kolmogorov_metric(500)),
        ("ESS formulas", ess_formulas()),
        ("death-rule monotonicity", death_monotonicity(10)),
        ("adaptation freeze", adaptation_freeze()),
        ("seed determinism", seed_determinism()),
    ]
}
