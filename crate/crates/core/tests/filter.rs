mod common;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rbmcda::association::{AssocPriorConfig, ClutterDensity, Label, Window};
use rbmcda::filter::{
    assoc_loglik, conditional_rbmcda, rbmcda_filter, rbmcda_step, step_with_draws, systematic_indices, FilterConfig,
    ParticleSet,
};
use rbmcda::gauss::KalmanCallCounter;
use rbmcda::model::BirthCoupling;
use rbmcda::pmcmc::TrackingProblem;
use rbmcda::Error;

fn cluttered_problem() -> TrackingProblem {
    let cfg = AssocPriorConfig {
        clutter_prob: 0.1,
        clutter_density: ClutterDensity::Uniform { window: Window::square(0.0, 100.0) },
        ..Default::default()
    };
    TrackingProblem::new(common::three_obs(), cfg, BirthCoupling::Joint).unwrap()
}

fn weighted_histories(set: &ParticleSet) -> HashMap<Vec<Label>, f64> {
    let mut counts = HashMap::new();
    for (p, w) in set.particles.iter().zip(set.weights()) {
        *counts.entry(p.history.clone()).or_default() += w;
    }
    counts
}

#[test]
fn filter_matches_enumeration() {
    let params = common::three_params();
    for (i, problem) in [common::three_problem(), cluttered_problem()].into_iter().enumerate() {
        let exact = common::enumerate(&problem, &params);
        let model = problem.model(params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let set =
            rbmcda_filter(&problem.observations, &model, &problem.assoc, &FilterConfig::with_particles(4000), &mut rng)
                .unwrap();
        let tv = exact.tv(&weighted_histories(&set));
        assert!(tv < 0.05, "problem {i}: TV {tv}");
    }
}

#[test]
fn likelihood_estimate_is_unbiased() {
    let problem = cluttered_problem();
    let params = common::three_params();
    let exact = common::enumerate(&problem, &params);
    let model = problem.model(params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let runs = 400;
    let ratios: Vec<f64> = (0..runs)
        .map(|_| {
            let set = rbmcda_filter(&problem.observations, &model, &problem.assoc, &FilterConfig::with_particles(10), &mut rng)
                .unwrap();
            (set.log_marginal_lik - exact.log_evidence).exp()
        })
        .collect();
    let mean = ratios.iter().sum::<f64>() / runs as f64;
    let sd = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (runs - 1) as f64).sqrt();
    assert!((mean - 1.0).abs() < 4.0 * sd / (runs as f64).sqrt(), "mean ratio {mean}, sd {sd}");
}

#[test]
fn conditional_filter_leaves_posterior_invariant() {
    let problem = common::three_problem();
    let params = common::three_params();
    let exact = common::enumerate(&problem, &params);
    let model = problem.model(params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = FilterConfig::with_particles(3);
    let mut counts: HashMap<Vec<Label>, f64> = HashMap::new();
    let mut current = vec![1, 2, 3];
    for _ in 0..5000 {
        let set = conditional_rbmcda(&problem.observations, &model, &problem.assoc, &cfg, &current, &mut rng).unwrap();
        current = set.particles[set.sample_index(&mut rng)].history.clone();
        *counts.entry(current.clone()).or_default() += 1.0;
    }
    let tv = exact.tv(&counts);
    assert!(tv < 0.05, "TV {tv}");
}

#[test]
fn forced_single_target_is_exact() {
    let problem = common::forced_problem(common::three_obs());
    let params = common::three_params();
    let model = problem.model(params).unwrap();
    let set = rbmcda_filter(&problem.observations, &model, &problem.assoc, &FilterConfig::with_particles(7), &mut ChaCha8Rng::seed_from_u64(1))
        .unwrap();
    let exact = assoc_loglik(&problem.observations, &model, &problem.assoc.cfg, &[1, 1, 1]).unwrap();
    assert!(set.particles.iter().all(|p| p.history == vec![1, 1, 1]));
    assert!((set.log_marginal_lik - exact).abs() < 1e-10);
    assert!((exact - common::history_loglik_oracle(&problem, &params, &[1, 1, 1])).abs() < 1e-10);
}

#[test]
fn first_measurement_opens_a_target() {
    let problem = cluttered_problem();
    let params = common::three_params();
    let model = problem.model(params).unwrap();
    let obs = &problem.observations[..1];
    let set = rbmcda_filter(obs, &model, &problem.assoc, &FilterConfig::with_particles(500), &mut ChaCha8Rng::seed_from_u64(2))
        .unwrap();
    let (m, p) = common::birth_moments(&params, &problem.stats, BirthCoupling::Joint);
    let y = DVector::from_column_slice(problem.observations[0].y.as_slice());
    let mean = DVector::from_vec(vec![m[2], m[3]]);
    let s = DMatrix::from_fn(2, 2, |i, j| p[(2 + i, 2 + j)] + if i == j { params.sigma.powi(2) } else { 0.0 });
    let target = common::mvn_logpdf(&y, &mean, &s).exp();
    let clutter = common::clutter_logdensity(&[y[0], y[1]], &problem.assoc.cfg).exp();
    let expected = (0.9 * target + 0.1 * clutter).ln();
    assert!((set.log_marginal_lik - expected).abs() < 1e-10);
    assert!(set.particles.iter().all(|p| p.history == vec![1] || p.history == vec![0]));
}

#[test]
fn empty_data_gives_empty_particles() {
    let problem = common::three_problem();
    let model = problem.model(common::three_params()).unwrap();
    let set = rbmcda_filter(&[], &model, &problem.assoc, &FilterConfig::with_particles(6), &mut ChaCha8Rng::seed_from_u64(3))
        .unwrap();
    assert_eq!(set.len(), 6);
    assert_eq!(set.log_marginal_lik, 0.0);
    assert!(set.particles.iter().all(|p| p.history.is_empty() && p.num_targets() == 0));
}

#[test]
fn ess_threshold_controls_resampling() {
    let sc = common::props::small_scenario(3, 3, 20);
    let problem = TrackingProblem::new(sc.observations, AssocPriorConfig::default(), BirthCoupling::Joint).unwrap();
    let model = problem.model(common::three_params()).unwrap();
    let run = |threshold: f64| {
        let cfg = FilterConfig { ess_threshold: threshold, ..FilterConfig::with_particles(20) };
        rbmcda_filter(&problem.observations, &model, &problem.assoc, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap()
    };
    assert!(run(0.0).resampled.iter().all(|r| !r));
    let always = run(1.0);
    // Uniform weights after the first step give ESS = N, which never falls below N.
    assert!(always.resampled.iter().skip(1).filter(|r| **r).count() > 10);
    let default = run(0.5);
    let mut set = ParticleSet::new(20).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (k, o) in problem.observations.iter().enumerate() {
        rbmcda_step(&mut set, o, &model, &problem.assoc, &FilterConfig::with_particles(20), &mut rng).unwrap();
        if set.resampled[k] {
            assert!(set.weights().iter().all(|w| (w - 0.05).abs() < 1e-12));
        }
    }
    assert_eq!(set.resampled, default.resampled);
}

#[test]
fn sharing_duplicates_changes_cost_only() {
    let problem = TrackingProblem::new(common::props::small_scenario(5, 4, 25).observations, common::props::busy_config(), BirthCoupling::Joint)
        .unwrap();
    let model = problem.model(common::three_params()).unwrap();
    for seed in 0..20 {
        let run = |share: bool| {
            let cfg = FilterConfig { share_duplicates: share, ..FilterConfig::with_particles(30) };
            let start = KalmanCallCounter::current();
            let set =
                rbmcda_filter(&problem.observations, &model, &problem.assoc, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            (set, KalmanCallCounter::current().since(start).total())
        };
        let (shared, cheap) = run(true);
        let (naive, full) = run(false);
        assert_eq!(shared.log_marginal_lik, naive.log_marginal_lik);
        assert_eq!(shared.weights(), naive.weights());
        for (a, b) in shared.particles.iter().zip(&naive.particles) {
            assert_eq!(a.history, b.history);
            assert_eq!(a.cond_loglik, b.cond_loglik);
        }
        assert!(cheap < full, "seed {seed}: {cheap} vs {full}");
    }
}

#[test]
fn particles_are_exchangeable() {
    let problem = cluttered_problem();
    let model = problem.model(common::three_params()).unwrap();
    let cfg = FilterConfig { ess_threshold: 0.0, ..FilterConfig::with_particles(2) };
    let mut set = ParticleSet::new(2).unwrap();
    step_with_draws(&mut set, &problem.observations[0], &model, &problem.assoc, &cfg, None, &[0.5, 0.95]).unwrap();
    step_with_draws(&mut set, &problem.observations[1], &model, &problem.assoc, &cfg, None, &[0.3, 0.99]).unwrap();
    assert_ne!(set.particles[0].history, set.particles[1].history);
    let mut swapped = set.clone();
    swapped.particles.swap(0, 1);
    let o = &problem.observations[2];
    step_with_draws(&mut set, o, &model, &problem.assoc, &cfg, None, &[0.2, 0.7]).unwrap();
    step_with_draws(&mut swapped, o, &model, &problem.assoc, &cfg, None, &[0.7, 0.2]).unwrap();
    assert!((set.log_marginal_lik - swapped.log_marginal_lik).abs() < 1e-12);
    for (a, b) in [(0, 1), (1, 0)] {
        assert_eq!(set.particles[a].history, swapped.particles[b].history);
        assert!((set.particles[a].log_weight - swapped.particles[b].log_weight).abs() < 1e-12);
    }
}

#[test]
fn systematic_counts_are_within_one_of_expectation() {
    let weights = [0.05, 0.3, 0.0, 0.15, 0.5];
    let n = 17;
    let mut mean = vec![0.0; weights.len()];
    let draws = 20_000;
    for k in 0..draws {
        let u = (k as f64 + 0.5) / draws as f64;
        let idx = systematic_indices(&weights, n, u);
        assert!(idx.windows(2).all(|w| w[0] <= w[1]));
        for (i, w) in weights.iter().enumerate() {
            let count = idx.iter().filter(|&&j| j == i).count() as f64;
            let expected = n as f64 * w;
            assert!(count >= expected.floor() - 1e-9 && count <= expected.ceil() + 1e-9, "index {i}: {count} vs {expected}");
            mean[i] += count / draws as f64;
        }
    }
    for (m, w) in mean.iter().zip(weights) {
        assert!((m - n as f64 * w).abs() < 1e-3);
    }
}

#[test]
fn single_particle_conditional_follows_clamp() {
    let problem = cluttered_problem();
    let model = problem.model(common::three_params()).unwrap();
    for clamp in [[1, 0, 2], [1, 1, 1], [0, 1, 2]] {
        let set = conditional_rbmcda(&problem.observations, &model, &problem.assoc, &FilterConfig::with_particles(1), &clamp, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(set.particles[0].history, clamp.to_vec());
        let exact = assoc_loglik(&problem.observations, &model, &problem.assoc.cfg, &clamp).unwrap();
        assert!((set.particles[0].cond_loglik - exact).abs() < 1e-10);
    }
}

#[test]
fn clamp_through_dead_target_has_zero_weight() {
    let cfg = AssocPriorConfig { death_threshold: Some(0.3), ..Default::default() };
    let problem = TrackingProblem::new(common::three_obs(), cfg, BirthCoupling::Joint).unwrap();
    let model = problem.model(common::three_params()).unwrap();
    // Target 1 is last seen at 0.0 and has died by 0.4.
    let clamp = [1, 2, 1];
    let fcfg = FilterConfig { ess_threshold: 0.0, ..FilterConfig::with_particles(4) };
    let set = conditional_rbmcda(&problem.observations, &model, &problem.assoc, &fcfg, &clamp, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(set.particles[0].log_weight, f64::NEG_INFINITY);
    let err = conditional_rbmcda(&problem.observations, &model, &problem.assoc, &FilterConfig::with_particles(1), &clamp, &mut ChaCha8Rng::seed_from_u64(1))
        .unwrap_err();
    assert!(matches!(err, Error::DegenerateFilter { .. }));
    // Clutter is not a candidate when the clutter probability is zero.
    let set = conditional_rbmcda(&problem.observations, &model, &problem.assoc, &fcfg, &[1, 0, 2], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(set.particles[0].log_weight, f64::NEG_INFINITY);
}

#[test]
fn non_canonical_clamp_is_rejected() {
    let problem = common::three_problem();
    let model = problem.model(common::three_params()).unwrap();
    let r = conditional_rbmcda(&problem.observations, &model, &problem.assoc, &FilterConfig::with_particles(3), &[2, 1, 1], &mut ChaCha8Rng::seed_from_u64(1));
    assert!(r.is_err());
}
