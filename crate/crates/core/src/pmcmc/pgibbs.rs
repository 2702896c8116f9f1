use rand::Rng;

use crate::association::Label;
use crate::filter::{assoc_loglik, conditional_rbmcda, rbmcda_filter};
use crate::gauss::KalmanCallCounter;
use crate::{Error, Result};

use super::pmmh::push_all;
use super::trace::{Algorithm, AssocSample, IterationRecord, Trace};
use super::{
    history_locations, metropolis_step, prior_logpdf, refresh_associations, ProposalState, SamplerConfig, ThetaState,
    TrackingProblem,
};

/// Retained association history with what is recorded about it.
struct Retained {
    history: Vec<Label>,
    num_alive: usize,
    locations: Option<Vec<[f64; 2]>>,
}

impl Retained {
    fn sample(&self, iteration: usize, calls: u64, cfg: &SamplerConfig) -> AssocSample {
        AssocSample {
            iteration,
            weight: 1.0,
            num_targets: crate::association::num_targets(&self.history),
            num_alive: self.num_alive,
            kalman_calls: calls,
            history: cfg.store_histories.then(|| self.history.clone()),
            locations: self.locations.clone(),
        }
    }
}

/// Particle Gibbs: a Metropolis step on θ given the retained history, a
/// conditional filter run clamped to it, a draw of the new retained history
/// and optional single-site association refreshes.
///
/// Kalman calls spent only on recording locations are not charged to the chain.
pub fn pgibbs<R: Rng + ?Sized>(problem: &TrackingProblem, cfg: &SamplerConfig, rng: &mut R) -> Result<Trace> {
    cfg.validate()?;
    let start = KalmanCallCounter::current();
    let mut diagnostic_calls = 0;
    let iterations = cfg.iterations;
    let mut trace = Trace::new(Algorithm::Pgibbs, iterations);
    if cfg.filter.n_particles == 1 {
        let msg = "particle Gibbs with one particle never changes the associations".to_string();
        log::warn!("{msg}");
        trace.warnings.push(msg);
    }

    let params = cfg.initial_params();
    let log_prior = prior_logpdf(&params, &cfg.prior);
    if log_prior == f64::NEG_INFINITY {
        return Err(Error::invalid("initial parameters have zero prior density"));
    }
    let model = problem.model(params)?;
    let set = rbmcda_filter(&problem.observations, &model, &problem.assoc, &cfg.filter, rng)?;
    let l = set.sample_index(rng);
    let p = &set.particles[l];
    let mut retained = Retained {
        history: p.history.clone(),
        num_alive: p.num_alive(),
        locations: cfg.record_locations.then(|| p.alive_locations()),
    };
    let mut theta = ThetaState { params, log_prior, log_lik: p.cond_loglik };
    let calls = |diag: u64| KalmanCallCounter::current().since(start).total() - diag;

    let mut proposal = ProposalState::from_config(&cfg.adaptation, &cfg.prior, iterations);
    proposal.adapt(&theta.coords(), 0);
    let n_refresh = cfg.refresh.resolved_count(problem.len());

    if cfg.all_particles {
        push_all(&mut trace, &set, 0, calls(0), cfg);
    } else {
        trace.samples.push(retained.sample(0, calls(0), cfg));
    }
    trace.records.push(IterationRecord {
        iteration: 0,
        params,
        accepted: true,
        alpha: 1.0,
        log_lik: theta.log_lik,
        log_prior,
        u: 0.0,
        kalman_calls: calls(0),
    });

    for i in 1..=iterations {
        trace.proposal_covs.push(proposal.cov);
        let (mut accepted, mut alpha) = (false, 0.0);
        if !cfg.fix_parameters {
            let history = &retained.history;
            let (next, outcome) = metropolis_step(&theta, &proposal, &cfg.prior, rng, |p, _| {
                let model = problem.model(*p)?;
                Ok((assoc_loglik(&problem.observations, &model, &problem.assoc.cfg, history)?, ()))
            });
            if outcome.failed {
                trace.failed_evaluations += 1;
            }
            theta = next;
            accepted = outcome.accepted;
            alpha = outcome.alpha;
            proposal.adapt(&theta.coords(), i);
        }

        let model = problem.model(theta.params)?;
        match conditional_rbmcda(&problem.observations, &model, &problem.assoc, &cfg.filter, &retained.history, rng) {
            Ok(set) => {
                if cfg.all_particles {
                    push_all(&mut trace, &set, i, calls(diagnostic_calls), cfg);
                }
                let l = set.sample_index(rng);
                let p = &set.particles[l];
                retained = Retained {
                    history: p.history.clone(),
                    num_alive: p.num_alive(),
                    locations: cfg.record_locations.then(|| p.alive_locations()),
                };
                theta.log_lik = p.cond_loglik;
            }
            Err(e @ Error::DegenerateFilter { .. }) => {
                log::debug!("conditional filter failed at iteration {i}: {e}");
                trace.failed_evaluations += 1;
            }
            Err(e) => return Err(e),
        }

        if n_refresh > 0 && !problem.is_empty() {
            let indices: Vec<usize> = (0..n_refresh).map(|_| rng.random_range(0..problem.len())).collect();
            let (history, log_lik) = refresh_associations(problem, &model, &retained.history, &indices, rng)?;
            if history != retained.history {
                let before = KalmanCallCounter::current();
                if cfg.record_locations {
                    retained.locations = Some(history_locations(problem, &model, &history)?);
                }
                retained.num_alive = alive_count(problem, &history)?;
                diagnostic_calls += KalmanCallCounter::current().since(before).total();
                retained.history = history;
            }
            theta.log_lik = log_lik;
        }

        if !cfg.all_particles {
            trace.samples.push(retained.sample(i, calls(diagnostic_calls), cfg));
        }
        trace.records.push(IterationRecord {
            iteration: i,
            params: theta.params,
            accepted,
            alpha,
            log_lik: theta.log_lik,
            log_prior: theta.log_prior,
            u: 0.0,
            kalman_calls: calls(diagnostic_calls),
        });
    }
    if trace.failed_evaluations > 0 {
        trace.warnings.push(format!("{} evaluations failed and were rejected", trace.failed_evaluations));
    }
    Ok(trace)
}

fn alive_count(problem: &TrackingProblem, history: &[Label]) -> Result<usize> {
    let mut summary = crate::association::AssocHistorySummary::new();
    for (&c, &t) in history.iter().zip(&problem.times) {
        summary.record(c, t)?;
        crate::association::apply_deaths(&mut summary, t, &problem.assoc.cfg);
    }
    Ok(summary.num_visible())
}
