use std::collections::HashMap;

use rand::Rng;

use crate::association::{apply_deaths, canonicalize, history_log_prior, num_targets, AssocHistorySummary, Label, CLUTTER};
use crate::filter::{cluster_loglik, fit_history, log_sum_exp};
use crate::model::{location, OuModel};
use crate::{Error, Result};

use super::TrackingProblem;

/// Scores histories by prior times likelihood, caching per-target
/// likelihoods by the set of measurements the target explains.
struct Scorer<'a> {
    problem: &'a TrackingProblem,
    model: &'a OuModel,
    clusters: HashMap<Vec<usize>, f64>,
    clutter: Vec<f64>,
}

impl<'a> Scorer<'a> {
    fn new(problem: &'a TrackingProblem, model: &'a OuModel) -> Self {
        let clutter = problem.observations.iter().map(|o| problem.assoc.clutter_loglik(&o.y)).collect();
        Self { problem, model, clusters: HashMap::new(), clutter }
    }

    fn log_lik(&mut self, history: &[Label]) -> Result<f64> {
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); num_targets(history)];
        let mut total = 0.0;
        for (k, &c) in history.iter().enumerate() {
            if c == CLUTTER {
                total += self.clutter[k];
            } else {
                groups[c as usize - 1].push(k);
            }
        }
        for g in groups {
            total += match self.clusters.get(&g) {
                Some(&v) => v,
                None => {
                    let v = cluster_loglik(&self.problem.observations, self.model, &g)?;
                    self.clusters.insert(g, v);
                    v
                }
            };
        }
        Ok(total)
    }

    fn log_posterior(&mut self, history: &[Label]) -> Result<f64> {
        let prior = history_log_prior(history, &self.problem.times, &self.problem.assoc)?;
        if prior == f64::NEG_INFINITY {
            return Ok(prior);
        }
        Ok(prior + self.log_lik(history)?)
    }
}

/// Redraws `c_k` for each `k` in `indices` in turn from its full conditional
/// given the rest of the history, θ and the data.
///
/// Candidates are clutter (if enabled), every existing target and a new
/// target, each relabelled to canonical form; candidates that coincide after
/// relabelling are counted once. Returns the new history and its
/// conditional log likelihood.
pub fn refresh_associations<R: Rng + ?Sized>(
    problem: &TrackingProblem,
    model: &OuModel,
    history: &[Label],
    indices: &[usize],
    rng: &mut R,
) -> Result<(Vec<Label>, f64)> {
    crate::filter::likelihood::check_history(history, problem.len())?;
    if let Some(&k) = indices.iter().find(|&&k| k >= problem.len()) {
        return Err(Error::invalid(format!("refresh index {k} out of range for {} observations", problem.len())));
    }
    let mut scorer = Scorer::new(problem, model);
    let mut current = history.to_vec();
    let clutter = problem.assoc.cfg.clutter_enabled();
    for &k in indices {
        let t = num_targets(&current) as Label;
        let mut candidates: Vec<Vec<Label>> = Vec::with_capacity(t as usize + 2);
        let first = if clutter { CLUTTER } else { 1 };
        for label in first..=t + 1 {
            let mut h = current.clone();
            h[k] = label;
            canonicalize(&mut h);
            if !candidates.contains(&h) {
                candidates.push(h);
            }
        }
        let scores = candidates.iter().map(|h| scorer.log_posterior(h)).collect::<Result<Vec<f64>>>()?;
        let norm = log_sum_exp(scores.iter().copied());
        if norm == f64::NEG_INFINITY {
            return Err(Error::invalid(format!("no candidate association with positive probability at index {k}")));
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = candidates.len() - 1;
        for (i, s) in scores.iter().enumerate() {
            acc += (s - norm).exp();
            if u < acc {
                pick = i;
                break;
            }
        }
        current = candidates.swap_remove(pick);
    }
    let log_lik = scorer.log_lik(&current)?;
    Ok((current, log_lik))
}

/// Final locations of the targets still alive at the last observation.
pub fn history_locations(problem: &TrackingProblem, model: &OuModel, history: &[Label]) -> Result<Vec<[f64; 2]>> {
    let fit = fit_history(&problem.observations, model, &problem.assoc.cfg, history)?;
    let mut summary = AssocHistorySummary::new();
    for (&c, &t) in history.iter().zip(&problem.times) {
        summary.record(c, t)?;
        apply_deaths(&mut summary, t, &problem.assoc.cfg);
    }
    Ok(fit
        .targets
        .iter()
        .zip(&summary.visible)
        .filter(|(_, &alive)| alive)
        .map(|(m, _)| location(&m.mean))
        .collect())
}
