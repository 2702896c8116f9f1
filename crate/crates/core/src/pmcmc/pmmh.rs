use rand::Rng;

use crate::filter::{rbmcda_filter, Particle, ParticleSet};
use crate::gauss::KalmanCallCounter;
use crate::{Error, Result};

use super::trace::{Algorithm, AssocSample, IterationRecord, Trace};
use super::{metropolis_step, prior_logpdf, ProposalState, SamplerConfig, ThetaState, TrackingProblem};

pub(super) fn sample_of(p: &Particle, iteration: usize, weight: f64, calls: u64, cfg: &SamplerConfig) -> AssocSample {
    AssocSample {
        iteration,
        weight,
        num_targets: p.num_targets(),
        num_alive: p.num_alive(),
        kalman_calls: calls,
        history: cfg.store_histories.then(|| p.history.clone()),
        locations: cfg.record_locations.then(|| p.alive_locations()),
    }
}

pub(super) fn push_all(trace: &mut Trace, set: &ParticleSet, iteration: usize, calls: u64, cfg: &SamplerConfig) {
    for (p, w) in set.particles.iter().zip(set.weights()) {
        trace.samples.push(sample_of(p, iteration, w, calls, cfg));
    }
}

/// Particle marginal Metropolis-Hastings with the filter's likelihood estimate.
///
/// With `all_particles` every proposed particle set is recorded, weighted by
/// its occupancy weight `u_i` times the particle weight; otherwise one
/// particle of the current set is drawn per iteration. The occupancy weights
/// sum to the number of iterations.
pub fn pmmh<R: Rng + ?Sized>(problem: &TrackingProblem, cfg: &SamplerConfig, rng: &mut R) -> Result<Trace> {
    cfg.validate()?;
    let start = KalmanCallCounter::current();
    let calls = || KalmanCallCounter::current().since(start).total();
    let iterations = cfg.iterations;
    let mut trace = Trace::new(Algorithm::Pmmh, iterations);

    let params = cfg.initial_params();
    let log_prior = prior_logpdf(&params, &cfg.prior);
    if log_prior == f64::NEG_INFINITY {
        return Err(Error::invalid("initial parameters have zero prior density"));
    }
    let model = problem.model(params)?;
    let mut current_set = rbmcda_filter(&problem.observations, &model, &problem.assoc, &cfg.filter, rng)?;
    let mut theta = ThetaState { params, log_prior, log_lik: current_set.log_marginal_lik };

    let mut proposal = ProposalState::from_config(&cfg.adaptation, &cfg.prior, iterations);
    proposal.adapt(&theta.coords(), 0);

    let mut u = vec![0.0; iterations + 1];
    let mut last_accept = 0;
    if cfg.all_particles {
        push_all(&mut trace, &current_set, 0, calls(), cfg);
    } else {
        let l = current_set.sample_index(rng);
        trace.samples.push(sample_of(&current_set.particles[l], 0, 1.0, calls(), cfg));
    }
    trace.records.push(IterationRecord {
        iteration: 0,
        params,
        accepted: true,
        alpha: 1.0,
        log_lik: theta.log_lik,
        log_prior,
        u: 0.0,
        kalman_calls: calls(),
    });

    for i in 1..=iterations {
        trace.proposal_covs.push(proposal.cov);
        let (next, outcome) = metropolis_step(&theta, &proposal, &cfg.prior, rng, |p, rng| {
            let model = problem.model(*p)?;
            let set = rbmcda_filter(&problem.observations, &model, &problem.assoc, &cfg.filter, rng)?;
            Ok((set.log_marginal_lik, set))
        });
        if outcome.failed {
            trace.failed_evaluations += 1;
        }
        u[i] = outcome.alpha;
        u[last_accept] += 1.0 - outcome.alpha;
        theta = next;
        if let Some(set) = outcome.payload {
            if cfg.all_particles {
                push_all(&mut trace, &set, i, calls(), cfg);
            }
            if outcome.accepted {
                current_set = set;
                last_accept = i;
            }
        }
        if !cfg.all_particles {
            let l = current_set.sample_index(rng);
            trace.samples.push(sample_of(&current_set.particles[l], i, 1.0, calls(), cfg));
        }
        proposal.adapt(&theta.coords(), i);
        trace.records.push(IterationRecord {
            iteration: i,
            params: theta.params,
            accepted: outcome.accepted,
            alpha: outcome.alpha,
            log_lik: theta.log_lik,
            log_prior: theta.log_prior,
            u: 0.0,
            kalman_calls: calls(),
        });
    }

    for (r, &ui) in trace.records.iter_mut().zip(&u) {
        r.u = ui;
    }
    if cfg.all_particles {
        for s in trace.samples.iter_mut() {
            s.weight *= u[s.iteration];
        }
    }
    if trace.failed_evaluations > 0 {
        trace.warnings.push(format!(
            "{} likelihood evaluations failed and were rejected",
            trace.failed_evaluations
        ));
    }
    Ok(trace)
}
