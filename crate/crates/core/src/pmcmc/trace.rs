use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::association::Label;
use crate::diagnostics::{num_targets_dist, ospa, CostedSample, WeightedIntDist};
use crate::model::ModelParams;
use crate::Result;

use super::proposal::{to_coords, PARAM_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Pmmh,
    Pgibbs,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Pmmh => "pmmh",
            Algorithm::Pgibbs => "pgibbs",
        }
    }
}

/// State of the chain after one iteration. Iteration 0 is the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub params: ModelParams,
    pub accepted: bool,
    /// Acceptance probability of this iteration's proposal.
    pub alpha: f64,
    /// Marginal likelihood estimate (PMMH) or conditional likelihood given
    /// the retained history (particle Gibbs) at the current parameters.
    pub log_lik: f64,
    pub log_prior: f64,
    /// Occupancy weight of the particle set proposed at this iteration (PMMH;
    /// zero for particle Gibbs).
    pub u: f64,
    /// Kalman predicts plus updates spent by the chain so far.
    pub kalman_calls: u64,
}

/// A weighted draw from the association posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssocSample {
    pub iteration: usize,
    pub weight: f64,
    pub num_targets: usize,
    pub num_alive: usize,
    pub kalman_calls: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<Label>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locations: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub algorithm: Algorithm,
    /// `iterations + 1` records, starting with the initial state.
    pub records: Vec<IterationRecord>,
    pub samples: Vec<AssocSample>,
    /// Proposal covariance used at each iteration `1..=I`.
    pub proposal_covs: Vec<Matrix3<f64>>,
    /// Likelihood evaluations that errored and were treated as rejections.
    pub failed_evaluations: usize,
    pub warnings: Vec<String>,
}

impl Trace {
    pub(crate) fn new(algorithm: Algorithm, iterations: usize) -> Self {
        Self {
            algorithm,
            records: Vec::with_capacity(iterations + 1),
            samples: Vec::new(),
            proposal_covs: Vec::with_capacity(iterations),
            failed_evaluations: 0,
            warnings: Vec::new(),
        }
    }

    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_params(&self) -> Option<ModelParams> {
        self.records.last().map(|r| r.params)
    }

    pub fn kalman_calls(&self) -> u64 {
        self.records.last().map_or(0, |r| r.kalman_calls)
    }

    pub fn acceptance_rate(&self) -> f64 {
        let n = self.iterations();
        if n == 0 {
            return 0.0;
        }
        self.records[1..].iter().filter(|r| r.accepted).count() as f64 / n as f64
    }

    /// Records of the second half of the chain.
    pub fn after_warmup(&self) -> &[IterationRecord] {
        let cut = self.iterations() / 2;
        &self.records[(cut + 1).min(self.records.len())..]
    }

    /// `[√q, λ, σ]` of the post-warmup records.
    pub fn coords_after_warmup(&self) -> Vec<[f64; PARAM_DIM]> {
        self.after_warmup().iter().map(|r| to_coords(&r.params).into()).collect()
    }

    pub fn costed_samples(&self) -> Vec<CostedSample> {
        self.samples
            .iter()
            .map(|s| CostedSample {
                iteration: s.iteration,
                kalman_calls: s.kalman_calls,
                num_targets: s.num_targets,
                weight: s.weight,
            })
            .collect()
    }

    fn samples_after_warmup(&self) -> impl Iterator<Item = &AssocSample> {
        let cut = self.iterations() / 2;
        self.samples.iter().filter(move |s| s.iteration > cut)
    }

    /// Posterior of the number of targets from the second half of the chain.
    pub fn num_targets_dist(&self) -> Option<WeightedIntDist> {
        let costed: Vec<CostedSample> =
            self.costed_samples().into_iter().filter(|s| s.iteration > self.iterations() / 2).collect();
        num_targets_dist(&costed)
    }

    /// Weighted mean OSPA of the recorded final locations against `truth`,
    /// over the second half of the chain. `None` if no sample has locations.
    pub fn mean_ospa(&self, truth: &[[f64; 2]], c: f64, p: f64) -> Result<Option<f64>> {
        let mut total = 0.0;
        let mut weight = 0.0;
        for s in self.samples_after_warmup() {
            let Some(locs) = &s.locations else { continue };
            if s.weight > 0.0 {
                total += s.weight * ospa(locs, truth, c, p)?;
                weight += s.weight;
            }
        }
        Ok((weight > 0.0).then(|| total / weight))
    }

    pub fn u_sum(&self) -> f64 {
        self.records.iter().map(|r| r.u).sum()
    }
}
