//! Particle MCMC over the dynamic parameters: marginal Metropolis-Hastings
//! driven by the filter's likelihood estimate, and particle Gibbs with a
//! conditional filter plus optional single-site association refreshes.

mod pgibbs;
mod pmmh;
pub mod proposal;
mod refresh;
mod trace;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::association::{AssocPrior, AssocPriorConfig};
use crate::filter::FilterConfig;
use crate::model::{BirthCoupling, ModelParams, ObservationStats, OuModel};
use crate::simulate::Observation;
use crate::{Error, Result};

pub use pgibbs::pgibbs;
pub use pmmh::pmmh;
pub use proposal::{
    from_coords, gamma2_logpdf, prior_logpdf, prior_logpdf_coords, to_coords, AdaptationConfig, Coords,
    PriorSpec, ProposalState, PARAM_DIM, PARAM_NAMES,
};
pub use refresh::{history_locations, refresh_associations};
pub use trace::{Algorithm, AssocSample, IterationRecord, Trace};

/// Observations plus everything about the model that does not depend on θ.
#[derive(Debug, Clone)]
pub struct TrackingProblem {
    pub observations: Vec<Observation>,
    pub times: Vec<f64>,
    pub stats: ObservationStats,
    pub assoc: AssocPrior,
    pub coupling: BirthCoupling,
}

impl TrackingProblem {
    /// Birth statistics from the observations themselves (needs two or more).
    pub fn new(observations: Vec<Observation>, cfg: AssocPriorConfig, coupling: BirthCoupling) -> Result<Self> {
        let stats = ObservationStats::from_measurements(observations.iter().map(|o| &o.y))?;
        Self::with_stats(observations, stats, cfg, coupling)
    }

    pub fn with_stats(
        observations: Vec<Observation>,
        stats: ObservationStats,
        cfg: AssocPriorConfig,
        coupling: BirthCoupling,
    ) -> Result<Self> {
        if observations.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(Error::invalid("observations must be sorted by time"));
        }
        let assoc = AssocPrior::new(cfg, observations.len().max(1))?;
        Ok(Self::with_prior(observations, stats, assoc, coupling))
    }

    /// Uses a prebuilt association prior as is.
    pub fn with_prior(
        observations: Vec<Observation>,
        stats: ObservationStats,
        assoc: AssocPrior,
        coupling: BirthCoupling,
    ) -> Self {
        let times = observations.iter().map(|o| o.t).collect();
        Self { observations, times, stats, assoc, coupling }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn model(&self, params: ModelParams) -> Result<OuModel> {
        OuModel::new(params, &self.stats, self.coupling)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefreshConfig {
    pub enabled: bool,
    /// Measurements refreshed per iteration; `None` means a tenth of them, rounded up.
    pub count: Option<usize>,
}

impl Default for RefreshConfig {
    fn default() -> Self {
        Self { enabled: true, count: None }
    }
}

impl RefreshConfig {
    pub fn off() -> Self {
        Self { enabled: false, count: None }
    }

    pub fn resolved_count(&self, n_obs: usize) -> usize {
        if !self.enabled {
            return 0;
        }
        self.count.unwrap_or(n_obs.div_ceil(10))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub filter: FilterConfig,
    pub prior: PriorSpec,
    /// Starting parameters; the prior mode when absent.
    pub initial: Option<ModelParams>,
    pub adaptation: AdaptationConfig,
    /// Association refreshes (particle Gibbs only).
    pub refresh: RefreshConfig,
    /// Keep θ at its initial value (particle Gibbs only).
    pub fix_parameters: bool,
    /// Record every particle with its weight instead of one draw per iteration.
    pub all_particles: bool,
    /// Record final target locations with each association sample.
    pub record_locations: bool,
    /// Record full association histories with each sample.
    pub store_histories: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            filter: FilterConfig::default(),
            prior: PriorSpec::default(),
            initial: None,
            adaptation: AdaptationConfig::default(),
            refresh: RefreshConfig::default(),
            fix_parameters: false,
            all_particles: false,
            record_locations: false,
            store_histories: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("need at least one iteration"));
        }
        self.filter.validate()?;
        self.prior.validate()?;
        if let Some(p) = &self.initial {
            p.validate()?;
        }
        if !(self.adaptation.epsilon >= 0.0) || !(self.adaptation.initial_scale > 0.0) {
            return Err(Error::invalid("adaptation epsilon must be nonnegative and initial_scale positive"));
        }
        Ok(())
    }

    pub fn initial_params(&self) -> ModelParams {
        self.initial.unwrap_or_else(|| self.prior.mode_params())
    }
}

/// Current parameter value with its cached log prior and log likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaState {
    pub params: ModelParams,
    pub log_prior: f64,
    pub log_lik: f64,
}

impl ThetaState {
    pub fn coords(&self) -> Coords {
        to_coords(&self.params)
    }

    pub fn log_target(&self) -> f64 {
        self.log_prior + self.log_lik
    }
}

#[derive(Debug, Clone)]
pub struct MhOutcome<P> {
    pub accepted: bool,
    pub alpha: f64,
    /// Likelihood evaluation errored; treated as zero likelihood.
    pub failed: bool,
    pub proposed: Coords,
    pub log_prior: f64,
    pub log_lik: f64,
    /// Whatever `eval` returned alongside the likelihood.
    pub payload: Option<P>,
}

/// Acceptance probability `min(1, exp(proposed − current))`.
///
/// A finite proposal always beats a current state of zero density; two
/// zero-density states never move.
pub fn acceptance_prob(log_target_proposed: f64, log_target_current: f64) -> f64 {
    let log_ratio = log_target_proposed - log_target_current;
    if log_ratio.is_nan() {
        return if log_target_proposed > f64::NEG_INFINITY { 1.0 } else { 0.0 };
    }
    log_ratio.exp().min(1.0)
}

/// One random-walk Metropolis step on θ.
///
/// The proposal is always drawn and a uniform is always consumed, so the RNG
/// stream does not depend on the outcome apart from what `eval` draws.
/// `eval` is skipped when the prior rules the proposal out.
pub fn metropolis_step<R, P, F>(
    current: &ThetaState,
    proposal: &ProposalState,
    spec: &PriorSpec,
    rng: &mut R,
    mut eval: F,
) -> (ThetaState, MhOutcome<P>)
where
    R: Rng + ?Sized,
    F: FnMut(&ModelParams, &mut R) -> Result<(f64, P)>,
{
    let proposed = proposal.propose(&current.coords(), rng);
    let log_prior = prior_logpdf_coords(&proposed, spec);
    let mut failed = false;
    let mut payload = None;
    let mut log_lik = f64::NEG_INFINITY;
    let params = from_coords(&proposed);
    if let (Some(p), true) = (params, log_prior > f64::NEG_INFINITY) {
        match eval(&p, rng) {
            Ok((ll, extra)) => {
                log_lik = ll;
                payload = Some(extra);
            }
            Err(e) => {
                log::debug!("likelihood evaluation failed at {p:?}: {e}");
                failed = true;
            }
        }
    }
    let alpha = acceptance_prob(log_prior + log_lik, current.log_target());
    let z: f64 = rng.random();
    let accepted = z < alpha;
    let next = match (accepted, params) {
        (true, Some(p)) => ThetaState { params: p, log_prior, log_lik },
        _ => *current,
    };
    (next, MhOutcome { accepted, alpha, failed, proposed, log_prior, log_lik, payload })
}
