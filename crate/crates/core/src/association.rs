//! Association priors, clutter density and the target death rule.
//!
//! Associations are integer labels: `0` is clutter and `j ≥ 1` is target `j`.
//! Histories are canonical, i.e. labels are handed out in order of first
//! appearance, so "open a new target" at a step with `T` targets seen so far
//! is the label `T + 1`.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::model::Measurement;
use crate::{Error, Result};

pub type Label = u32;
pub const CLUTTER: Label = 0;

/// What the association prior needs to know about a history so far.
#[derive(Debug, Clone, PartialEq)]
pub struct AssocHistorySummary {
    /// 1-based index of the next measurement to be associated.
    pub k: usize,
    /// Number of measurements associated to a target (not clutter) so far.
    pub assigned: usize,
    /// Visibility indicator per target seen so far.
    pub visible: Vec<bool>,
    /// Time of the last measurement associated to each target.
    pub last_seen: Vec<f64>,
}

impl Default for AssocHistorySummary {
    fn default() -> Self {
        Self::new()
    }
}

impl AssocHistorySummary {
    pub fn new() -> Self {
        Self { k: 1, assigned: 0, visible: Vec::new(), last_seen: Vec::new() }
    }

    /// Number of distinct targets seen so far.
    pub fn t_seen(&self) -> usize {
        self.visible.len()
    }

    pub fn num_visible(&self) -> usize {
        self.visible.iter().filter(|v| **v).count()
    }

    /// Label that would open a new target.
    pub fn new_label(&self) -> Label {
        self.t_seen() as Label + 1
    }

    /// Records the association of measurement `k` observed at time `t`.
    ///
    /// `label` must be clutter, a seen target, or the new-target label.
    pub fn record(&mut self, label: Label, t: f64) -> Result<()> {
        let new = self.new_label();
        if label > new {
            return Err(Error::invalid(format!(
                "label {label} at measurement {} skips ahead of new-target label {new}",
                self.k
            )));
        }
        if label == new {
            self.visible.push(true);
            self.last_seen.push(t);
        } else if label != CLUTTER {
            self.last_seen[label as usize - 1] = t;
        }
        if label != CLUTTER {
            self.assigned += 1;
        }
        self.k += 1;
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.visible.len() == self.last_seen.len()
            && self.t_seen() <= self.assigned
            && self.assigned < self.k
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Window {
    pub fn square(lo: f64, hi: f64) -> Self {
        Self { x_min: lo, x_max: hi, y_min: lo, y_max: hi }
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn contains(&self, y: &Measurement) -> bool {
        (self.x_min..=self.x_max).contains(&y[0]) && (self.y_min..=self.y_max).contains(&y[1])
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_max > self.x_min && self.y_max > self.y_min && self.area().is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!("window {self:?} is empty")))
        }
    }
}

impl Default for Window {
    fn default() -> Self {
        Self::square(0.0, 100.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClutterDensity {
    Uniform { window: Window },
    Constant { density: f64 },
}

impl Default for ClutterDensity {
    fn default() -> Self {
        ClutterDensity::Uniform { window: Window::default() }
    }
}

/// Which measurement counts bound the latent number of targets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountSupport {
    /// `N ∈ {1, …, M}` with `M` the total number of measurements.
    #[default]
    Full,
    /// `N ∈ {1, …, k}` with `k` the index of the current measurement.
    Processed,
}

/// Built-in new-target probability models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NewTargetModel {
    /// A latent target count `N` uniform over the support, associations
    /// uniform over the `N` targets.
    LatentCount {
        #[serde(default)]
        support: CountSupport,
    },
    /// Constant probability of opening a new target once one exists.
    Fixed { p_new: f64 },
}

impl Default for NewTargetModel {
    fn default() -> Self {
        NewTargetModel::LatentCount { support: CountSupport::Full }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssocPriorConfig {
    pub clutter_prob: f64,
    pub clutter_density: ClutterDensity,
    /// Targets unobserved for longer than this are removed. `None` disables deaths.
    pub death_threshold: Option<f64>,
    pub new_target: NewTargetModel,
}

impl Default for AssocPriorConfig {
    fn default() -> Self {
        Self {
            clutter_prob: 0.0,
            clutter_density: ClutterDensity::default(),
            death_threshold: None,
            new_target: NewTargetModel::default(),
        }
    }
}

impl AssocPriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.clutter_prob) {
            return Err(Error::invalid(format!(
                "clutter_prob must be in [0, 1), got {}",
                self.clutter_prob
            )));
        }
        match self.clutter_density {
            ClutterDensity::Uniform { window } => window.validate()?,
            ClutterDensity::Constant { density } => {
                if !(density >= 0.0) || !density.is_finite() {
                    return Err(Error::invalid(format!("clutter density {density} is invalid")));
                }
            }
        }
        if let Some(t) = self.death_threshold {
            if !(t > 0.0) {
                return Err(Error::invalid(format!("death threshold must be positive, got {t}")));
            }
        }
        if let NewTargetModel::Fixed { p_new } = self.new_target {
            if !(0.0..=1.0).contains(&p_new) {
                return Err(Error::invalid(format!("p_new must be in [0, 1], got {p_new}")));
            }
        }
        Ok(())
    }

    pub fn clutter_enabled(&self) -> bool {
        self.clutter_prob > 0.0
    }
}

/// Pluggable probability that the next target-associated measurement opens
/// a new target.
pub trait NewTargetPrior: Send + Sync + std::fmt::Debug {
    /// `summary` describes the history before measurement `summary.k`.
    /// Only called when at least one target has been seen.
    fn new_target_prob(&self, summary: &AssocHistorySummary) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct FixedNewTargetPrior {
    pub p_new: f64,
}

impl NewTargetPrior for FixedNewTargetPrior {
    fn new_target_prob(&self, _summary: &AssocHistorySummary) -> f64 {
        self.p_new
    }
}

/// New-target probability under a latent target count.
///
/// `N` is uniform on `{1, …, M}` and each target-associated measurement picks
/// one of the `N` targets uniformly. Having assigned `n` measurements to `T`
/// distinct targets, the canonical history has likelihood
/// `L(N) = N (N−1) ⋯ (N−T+1) / Nⁿ` and the next measurement opens a new
/// target with probability `Σ L(N) (N−T)/N / Σ L(N)`.
#[derive(Debug)]
pub struct LatentCountPrior {
    support: CountSupport,
    total: usize,
    ln_fact: Vec<f64>,
    /// `rows[n][t]`: new-target probability after `n` assignments to `t` targets.
    rows: Vec<OnceLock<Vec<f64>>>,
}

impl LatentCountPrior {
    /// `total` is the number of measurements in the data set.
    pub fn new(total: usize, support: CountSupport) -> Self {
        let total = total.max(1);
        let mut ln_fact = Vec::with_capacity(total + 1);
        ln_fact.push(0.0);
        for n in 1..=total {
            ln_fact.push(ln_fact[n - 1] + (n as f64).ln());
        }
        let rows = (0..total).map(|_| OnceLock::new()).collect();
        Self { support, total, ln_fact, rows }
    }

    /// New-target probability with support `{1, …, max_n}`.
    pub fn prob_with_support(&self, max_n: usize, assigned: usize, t_seen: usize) -> f64 {
        if t_seen == 0 {
            return 1.0;
        }
        if t_seen >= max_n {
            return 0.0;
        }
        let log_l = |n: usize| {
            self.ln_fact(n) - self.ln_fact(n - t_seen) - assigned as f64 * (n as f64).ln()
        };
        let max_log = (t_seen..=max_n).map(log_l).fold(f64::NEG_INFINITY, f64::max);
        let mut num = 0.0;
        let mut den = 0.0;
        for n in t_seen..=max_n {
            let w = (log_l(n) - max_log).exp();
            den += w;
            num += w * (n - t_seen) as f64 / n as f64;
        }
        num / den
    }

    fn ln_fact(&self, n: usize) -> f64 {
        if n < self.ln_fact.len() {
            self.ln_fact[n]
        } else {
            self.ln_fact[self.ln_fact.len() - 1]
                + ((self.ln_fact.len())..=n).map(|i| (i as f64).ln()).sum::<f64>()
        }
    }
}

impl NewTargetPrior for LatentCountPrior {
    fn new_target_prob(&self, summary: &AssocHistorySummary) -> f64 {
        let (n, t) = (summary.assigned, summary.t_seen());
        match self.support {
            CountSupport::Processed => self.prob_with_support(summary.k, n, t),
            CountSupport::Full if n < self.total => {
                let row = self.rows[n]
                    .get_or_init(|| (0..=n).map(|t| self.prob_with_support(self.total, n, t)).collect());
                row[t.min(n)]
            }
            CountSupport::Full => self.prob_with_support(self.total, n, t),
        }
    }
}

/// Prior over the association of the next measurement.
///
/// Every visible target shares the same probability `existing`; invisible
/// targets have probability zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssocDist {
    pub clutter: f64,
    pub existing: f64,
    pub new: f64,
}

impl AssocDist {
    /// Dense vector over labels `0..=T_seen + 1`.
    pub fn to_vec(&self, summary: &AssocHistorySummary) -> Vec<f64> {
        let mut v = Vec::with_capacity(summary.t_seen() + 2);
        v.push(self.clutter);
        v.extend(summary.visible.iter().map(|&vis| if vis { self.existing } else { 0.0 }));
        v.push(self.new);
        v
    }

    /// Prior probability of `label` given the summary.
    pub fn prob(&self, summary: &AssocHistorySummary, label: Label) -> f64 {
        if label == CLUTTER {
            self.clutter
        } else if label == summary.new_label() {
            self.new
        } else if label < summary.new_label() && summary.visible[label as usize - 1] {
            self.existing
        } else {
            0.0
        }
    }
}

/// An association prior configuration bound to a data set size.
#[derive(Debug, Clone)]
pub struct AssocPrior {
    pub cfg: AssocPriorConfig,
    new_target: Arc<dyn NewTargetPrior>,
}

impl AssocPrior {
    /// Builds the configured new-target model for a data set of `total` measurements.
    pub fn new(cfg: AssocPriorConfig, total: usize) -> Result<Self> {
        cfg.validate()?;
        let new_target: Arc<dyn NewTargetPrior> = match cfg.new_target {
            NewTargetModel::LatentCount { support } => Arc::new(LatentCountPrior::new(total, support)),
            NewTargetModel::Fixed { p_new } => Arc::new(FixedNewTargetPrior { p_new }),
        };
        Ok(Self { cfg, new_target })
    }

    /// Uses a caller-supplied new-target model; `cfg.new_target` is ignored.
    pub fn with_new_target(cfg: AssocPriorConfig, new_target: Arc<dyn NewTargetPrior>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, new_target })
    }

    pub fn dist(&self, summary: &AssocHistorySummary) -> AssocDist {
        assoc_prior(summary, &self.cfg, self.new_target.as_ref())
    }

    pub fn clutter_loglik(&self, y: &Measurement) -> f64 {
        clutter_loglik(y, &self.cfg)
    }
}

/// Prior over clutter, visible targets and a new target for measurement `summary.k`.
pub fn assoc_prior(
    summary: &AssocHistorySummary,
    cfg: &AssocPriorConfig,
    new_target: &dyn NewTargetPrior,
) -> AssocDist {
    let clutter = cfg.clutter_prob;
    let visible = summary.num_visible();
    if summary.t_seen() == 0 || visible == 0 {
        return AssocDist { clutter, existing: 0.0, new: 1.0 - clutter };
    }
    let b = new_target.new_target_prob(summary).clamp(0.0, 1.0);
    AssocDist {
        clutter,
        existing: (1.0 - clutter) * (1.0 - b) / visible as f64,
        new: (1.0 - clutter) * b,
    }
}

/// Log density of a clutter measurement.
pub fn clutter_loglik(y: &Measurement, cfg: &AssocPriorConfig) -> f64 {
    match cfg.clutter_density {
        ClutterDensity::Uniform { window } => {
            if window.contains(y) {
                -window.area().ln()
            } else {
                f64::NEG_INFINITY
            }
        }
        ClutterDensity::Constant { density } => density.ln(),
    }
}

/// Marks targets unobserved for strictly longer than the threshold as invisible.
pub fn apply_deaths(summary: &mut AssocHistorySummary, now: f64, cfg: &AssocPriorConfig) {
    let Some(threshold) = cfg.death_threshold else {
        return;
    };
    for (vis, &seen) in summary.visible.iter_mut().zip(&summary.last_seen) {
        if *vis && now - seen > threshold {
            *vis = false;
        }
    }
}

/// True if labels first appear in increasing order without gaps.
pub fn is_canonical(history: &[Label]) -> bool {
    let mut next = 1;
    for &c in history {
        if c == next {
            next += 1;
        } else if c > next {
            return false;
        }
    }
    true
}

/// Relabels targets in order of first appearance; clutter stays `0`.
pub fn canonicalize(history: &mut [Label]) {
    let mut map: Vec<(Label, Label)> = Vec::new();
    for c in history.iter_mut() {
        if *c == CLUTTER {
            continue;
        }
        *c = match map.iter().find(|(from, _)| from == c) {
            Some(&(_, to)) => to,
            None => {
                let to = map.len() as Label + 1;
                map.push((*c, to));
                to
            }
        };
    }
}

/// Number of distinct targets in a canonical history.
pub fn num_targets(history: &[Label]) -> usize {
    history.iter().copied().max().unwrap_or(0) as usize
}

/// `log p(c₁:ₙ)` under the association prior, replaying deaths at `times`.
pub fn history_log_prior(history: &[Label], times: &[f64], prior: &AssocPrior) -> Result<f64> {
    if history.len() != times.len() {
        return Err(Error::invalid("history and times differ in length"));
    }
    if !is_canonical(history) {
        return Err(Error::invalid("history is not canonical"));
    }
    let mut summary = AssocHistorySummary::new();
    let mut total = 0.0;
    for (&c, &t) in history.iter().zip(times) {
        total += prior.dist(&summary).prob(&summary, c).ln();
        summary.record(c, t)?;
        apply_deaths(&mut summary, t, &prior.cfg);
    }
    Ok(total)
}
