//! Rao-Blackwellized particle filter over association histories.
//!
//! Each particle carries one sampled association history and, conditional on
//! it, Kalman moments for every target it has opened. The association of each
//! new measurement is drawn from the optimal importance distribution, which is
//! available in closed form because the candidate set is finite.
//!
//! Particles that are copies of the same parent (after resampling) share one
//! set of Kalman computations per step. This never changes sampled values or
//! weights, only the number of Kalman calls.

mod importance;
pub(crate) mod likelihood;
mod resample;

use std::collections::HashMap;

use rand::Rng;

pub use importance::{eval_importance, log_sum_exp, Candidate, ImportanceTable};
pub use likelihood::{assoc_loglik, cluster_loglik, fit_history, HistoryFit};
pub use resample::{ess, resample_indices, systematic_indices, ResampleMode};

use crate::association::{apply_deaths, AssocHistorySummary, AssocPrior, Label, CLUTTER};
use crate::gauss::{kf_predict, kf_update};
use crate::model::{location, OuModel, StateMoments};
use crate::simulate::Observation;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub n_particles: usize,
    /// Resample when `ESS < ess_threshold · N`.
    pub ess_threshold: f64,
    /// Share Kalman work between identical particles.
    pub share_duplicates: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { n_particles: 5, ess_threshold: 0.5, share_duplicates: true }
    }
}

impl FilterConfig {
    pub fn with_particles(n_particles: usize) -> Self {
        Self { n_particles, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::invalid("need at least one particle"));
        }
        if !(0.0..=1.0).contains(&self.ess_threshold) {
            return Err(Error::invalid(format!(
                "ess_threshold must be in [0, 1], got {}",
                self.ess_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Particle {
    pub history: Vec<Label>,
    pub targets: Vec<StateMoments>,
    pub summary: AssocHistorySummary,
    /// Normalized log importance weight.
    pub log_weight: f64,
    /// `log p(y₁:ₖ | θ, c₁:ₖ)` of this particle's own history.
    pub cond_loglik: f64,
    /// Particles with equal lineage hold identical state.
    lineage: u64,
}

impl Particle {
    fn root(log_weight: f64) -> Self {
        Self {
            history: Vec::new(),
            targets: Vec::new(),
            summary: AssocHistorySummary::new(),
            log_weight,
            cond_loglik: 0.0,
            lineage: 0,
        }
    }

    pub fn num_targets(&self) -> usize {
        self.summary.t_seen()
    }

    pub fn num_alive(&self) -> usize {
        self.summary.num_visible()
    }

    /// Posterior mean locations of the visible targets.
    pub fn alive_locations(&self) -> Vec<[f64; 2]> {
        self.targets
            .iter()
            .zip(&self.summary.visible)
            .filter(|(_, &v)| v)
            .map(|(t, _)| location(&t.mean))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    /// Accumulated `log p̂(y₁:ₖ | θ)`.
    pub log_marginal_lik: f64,
    pub last_time: Option<f64>,
    /// Whether resampling happened after each processed measurement.
    pub resampled: Vec<bool>,
    next_lineage: u64,
}

impl ParticleSet {
    pub fn new(n_particles: usize) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::invalid("need at least one particle"));
        }
        let lw = -(n_particles as f64).ln();
        Ok(Self {
            particles: vec![Particle::root(lw); n_particles],
            log_marginal_lik: 0.0,
            last_time: None,
            resampled: Vec::new(),
            next_lineage: 1,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Number of measurements processed.
    pub fn steps(&self) -> usize {
        self.resampled.len()
    }

    /// Normalized linear weights.
    pub fn weights(&self) -> Vec<f64> {
        let norm = log_sum_exp(self.particles.iter().map(|p| p.log_weight));
        self.particles.iter().map(|p| (p.log_weight - norm).exp()).collect()
    }

    pub fn ess(&self) -> f64 {
        ess(&self.weights())
    }

    /// Draws a particle index with probability proportional to its weight.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let w = self.weights();
        let target = rng.random::<f64>() * w.iter().sum::<f64>();
        let mut acc = 0.0;
        for (i, wi) in w.iter().enumerate() {
            acc += wi;
            if target < acc {
                return i;
            }
        }
        w.iter().rposition(|&x| x > 0.0).unwrap_or(0)
    }

    fn fresh_lineage(&mut self) -> u64 {
        self.next_lineage += 1;
        self.next_lineage
    }
}

/// Kalman work shared by all particles of one lineage.
struct Prepared {
    predicted: Vec<StateMoments>,
    table: ImportanceTable,
    log_norm: f64,
}

fn prepare(
    particle: &Particle,
    transition: Option<&(nalgebra::Matrix4<f64>, nalgebra::Matrix4<f64>)>,
    obs: &Observation,
    model: &OuModel,
    prior: &AssocPrior,
) -> Result<Prepared> {
    let mut predicted = particle.targets.clone();
    if let Some((a, q)) = transition {
        for (target, &vis) in predicted.iter_mut().zip(&particle.summary.visible) {
            if vis {
                *target = kf_predict(target, a, q)?;
            }
        }
    }
    let table = eval_importance(&predicted, &particle.summary, &obs.y, model, prior)?;
    let log_norm = table.log_normalizer();
    Ok(Prepared { predicted, table, log_norm })
}

/// Processes one measurement for every particle given pre-drawn uniforms,
/// one per particle, without resampling.
///
/// With `clamp = Some(c)` particle 0 takes association `c` instead of drawing
/// one. [`rbmcda_step`] is this plus the uniform draws and resampling.
pub fn step_with_draws(
    set: &mut ParticleSet,
    obs: &Observation,
    model: &OuModel,
    prior: &AssocPrior,
    cfg: &FilterConfig,
    clamp: Option<Label>,
    uniforms: &[f64],
) -> Result<()> {
    let n = set.len();
    if uniforms.len() != n {
        return Err(Error::invalid("need one uniform draw per particle"));
    }
    let step = set.steps() + 1;
    let dt = set.last_time.map_or(0.0, |t0| obs.t - t0);
    if dt < 0.0 {
        return Err(Error::invalid(format!(
            "measurement {step} at t = {} precedes the previous one",
            obs.t
        )));
    }
    let any_targets = set.particles.iter().any(|p| p.num_alive() > 0);
    let transition = if any_targets { Some(model.transition(dt)?) } else { None };

    let old = std::mem::take(&mut set.particles);
    let mut prepared: Vec<Prepared> = Vec::new();
    let mut by_lineage: HashMap<u64, usize> = HashMap::new();
    let mut next = Vec::with_capacity(n);
    let mut evidence = Vec::with_capacity(n);

    for (i, particle) in old.into_iter().enumerate() {
        let shared = if cfg.share_duplicates { by_lineage.get(&particle.lineage).copied() } else { None };
        let slot = match shared {
            Some(s) => s,
            None => {
                prepared.push(prepare(&particle, transition.as_ref(), obs, model, prior)?);
                by_lineage.insert(particle.lineage, prepared.len() - 1);
                prepared.len() - 1
            }
        };
        let prep = &prepared[slot];

        let mut log_weight = particle.log_weight + prep.log_norm;
        evidence.push(log_weight);

        let (label, log_lik, moments) = match clamp.filter(|_| i == 0) {
            None => {
                let c = &prep.table.candidates[prep.table.sample_index(uniforms[i])];
                (c.label, c.log_lik, c.moments.clone())
            }
            Some(label) => match prep.table.get(label) {
                Some(c) => {
                    if c.log_pi() == f64::NEG_INFINITY {
                        log_weight = f64::NEG_INFINITY;
                    }
                    (c.label, c.log_lik, c.moments.clone())
                }
                None => {
                    // Not a candidate: clutter while clutter is off, or a dead target.
                    log_weight = f64::NEG_INFINITY;
                    if label == CLUTTER {
                        (label, prior.clutter_loglik(&obs.y), None)
                    } else if (label as usize) <= particle.num_targets() {
                        let target = &prep.predicted[label as usize - 1];
                        let (post, lh) = kf_update(target, &obs.y, &model.obs_matrix, &model.obs_noise)?;
                        (label, lh, Some(post))
                    } else {
                        return Err(Error::invalid(format!(
                            "clamped label {label} at measurement {step} is not canonical"
                        )));
                    }
                }
            },
        };

        let Particle { mut history, mut summary, cond_loglik, .. } = particle;
        let mut targets = prep.predicted.clone();
        if let Some(m) = moments {
            if label == summary.new_label() {
                targets.push(m);
            } else {
                targets[label as usize - 1] = m;
            }
        }
        history.push(label);
        summary.record(label, obs.t)?;
        apply_deaths(&mut summary, obs.t, &prior.cfg);
        next.push(Particle {
            history,
            targets,
            summary,
            log_weight,
            cond_loglik: cond_loglik + log_lik,
            lineage: 0,
        });
    }

    let increment = log_sum_exp(evidence.iter().copied());
    if increment == f64::NEG_INFINITY || increment.is_nan() {
        return Err(Error::DegenerateFilter { step });
    }
    let norm = log_sum_exp(next.iter().map(|p| p.log_weight));
    if norm == f64::NEG_INFINITY {
        return Err(Error::DegenerateFilter { step });
    }
    for p in next.iter_mut() {
        p.log_weight -= norm;
        p.lineage = set.fresh_lineage();
    }
    set.particles = next;
    set.log_marginal_lik += increment;
    set.last_time = Some(obs.t);
    Ok(())
}

/// Resamples when the effective sample size falls below the threshold.
/// Returns whether resampling happened.
fn maybe_resample<R: Rng + ?Sized>(
    set: &mut ParticleSet,
    cfg: &FilterConfig,
    mode: ResampleMode,
    rng: &mut R,
) -> bool {
    let w = set.weights();
    let n = set.len();
    let fire = ess(&w) < cfg.ess_threshold * n as f64;
    if fire {
        resample(set, &w, mode, rng);
    }
    set.resampled.push(fire);
    fire
}

/// Systematic resampling; weights become uniform.
pub fn resample<R: Rng + ?Sized>(set: &mut ParticleSet, weights: &[f64], mode: ResampleMode, rng: &mut R) {
    let idx = resample_indices(weights, mode, rng);
    let lw = -(set.len() as f64).ln();
    set.particles = idx
        .into_iter()
        .map(|i| {
            let mut p = set.particles[i].clone();
            p.log_weight = lw;
            p
        })
        .collect();
}

fn draw_uniforms<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// One filter step: predict, draw associations, reweight, resample if needed.
pub fn rbmcda_step<R: Rng + ?Sized>(
    set: &mut ParticleSet,
    obs: &Observation,
    model: &OuModel,
    prior: &AssocPrior,
    cfg: &FilterConfig,
    rng: &mut R,
) -> Result<()> {
    let u = draw_uniforms(set.len(), rng);
    step_with_draws(set, obs, model, prior, cfg, None, &u)?;
    maybe_resample(set, cfg, ResampleMode::Unconditional, rng);
    Ok(())
}

/// Runs the filter over all observations. The estimate of `log p(y | θ)` is
/// in [`ParticleSet::log_marginal_lik`].
pub fn rbmcda_filter<R: Rng + ?Sized>(
    obs: &[Observation],
    model: &OuModel,
    prior: &AssocPrior,
    cfg: &FilterConfig,
    rng: &mut R,
) -> Result<ParticleSet> {
    cfg.validate()?;
    let mut set = ParticleSet::new(cfg.n_particles)?;
    for o in obs {
        rbmcda_step(&mut set, o, model, prior, cfg, rng)?;
    }
    Ok(set)
}

/// Conditional filter: particle 0 follows `clamped` and is never replaced by
/// resampling. Its weight is computed as if its associations had been drawn.
pub fn conditional_rbmcda<R: Rng + ?Sized>(
    obs: &[Observation],
    model: &OuModel,
    prior: &AssocPrior,
    cfg: &FilterConfig,
    clamped: &[Label],
    rng: &mut R,
) -> Result<ParticleSet> {
    cfg.validate()?;
    likelihood::check_history(clamped, obs.len())?;
    let mut set = ParticleSet::new(cfg.n_particles)?;
    for (o, &c) in obs.iter().zip(clamped) {
        let u = draw_uniforms(set.len(), rng);
        step_with_draws(&mut set, o, model, prior, cfg, Some(c), &u)?;
        maybe_resample(&mut set, cfg, ResampleMode::KeepFirst, rng);
    }
    Ok(set)
}
