use crate::association::{AssocHistorySummary, AssocPrior, Label, CLUTTER};
use crate::gauss::kf_update;
use crate::model::{Measurement, OuModel, StateMoments};
use crate::Result;

/// One possible association of the current measurement.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub label: Label,
    pub log_prior: f64,
    /// Log predictive likelihood of the measurement under this association.
    pub log_lik: f64,
    /// Posterior target moments; `None` for clutter.
    pub moments: Option<StateMoments>,
}

impl Candidate {
    /// Unnormalized log importance weight.
    pub fn log_pi(&self) -> f64 {
        self.log_prior + self.log_lik
    }
}

/// Unnormalized optimal importance distribution over the association of one
/// measurement for one particle.
#[derive(Debug, Clone)]
pub struct ImportanceTable {
    pub candidates: Vec<Candidate>,
}

impl ImportanceTable {
    /// `log Σ πⱼ`.
    pub fn log_normalizer(&self) -> f64 {
        log_sum_exp(self.candidates.iter().map(Candidate::log_pi))
    }

    pub fn get(&self, label: Label) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.label == label)
    }

    /// Normalized probabilities in candidate order.
    pub fn probabilities(&self) -> Vec<f64> {
        let norm = self.log_normalizer();
        self.candidates.iter().map(|c| (c.log_pi() - norm).exp()).collect()
    }

    /// Inverse-CDF draw with a uniform `u ∈ [0, 1)`.
    ///
    /// If every candidate has zero mass the last one (the new target) is returned.
    pub fn sample_index(&self, u: f64) -> usize {
        let max = self.candidates.iter().map(Candidate::log_pi).fold(f64::NEG_INFINITY, f64::max);
        let last = self.candidates.len() - 1;
        if max == f64::NEG_INFINITY || max.is_nan() {
            return last;
        }
        let mass: Vec<f64> = self.candidates.iter().map(|c| (c.log_pi() - max).exp()).collect();
        let target = u * mass.iter().sum::<f64>();
        let mut acc = 0.0;
        for (i, m) in mass.iter().enumerate() {
            acc += m;
            if target < acc {
                return i;
            }
        }
        // Rounding can leave `target` at the total; take the last positive mass.
        mass.iter().rposition(|&m| m > 0.0).unwrap_or(last)
    }
}

/// Evaluates the importance table for a particle whose targets have already
/// been predicted to the measurement time.
pub fn eval_importance(
    predicted: &[StateMoments],
    summary: &AssocHistorySummary,
    y: &Measurement,
    model: &OuModel,
    prior: &AssocPrior,
) -> Result<ImportanceTable> {
    let dist = prior.dist(summary);
    let mut candidates = Vec::with_capacity(summary.num_visible() + 2);
    if prior.cfg.clutter_enabled() {
        candidates.push(Candidate {
            label: CLUTTER,
            log_prior: dist.clutter.ln(),
            log_lik: prior.clutter_loglik(y),
            moments: None,
        });
    }
    let log_existing = dist.existing.ln();
    for (j, target) in predicted.iter().enumerate() {
        if !summary.visible[j] {
            continue;
        }
        let (post, log_lik) = kf_update(target, y, &model.obs_matrix, &model.obs_noise)?;
        candidates.push(Candidate {
            label: j as Label + 1,
            log_prior: log_existing,
            log_lik,
            moments: Some(post),
        });
    }
    let (post, log_lik) = kf_update(&model.birth, y, &model.obs_matrix, &model.obs_noise)?;
    candidates.push(Candidate {
        label: summary.new_label(),
        log_prior: dist.new.ln(),
        log_lik,
        moments: Some(post),
    });
    Ok(ImportanceTable { candidates })
}

/// Numerically stable `log Σ exp(xᵢ)`; `-∞` for an empty or all `-∞` input.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.into_iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
