//! Run configuration, read from TOML. Every section and field is optional;
//! omitted values take the defaults printed by `--print-defaults`.

use std::path::Path;

use rbmcda::association::{AssocPriorConfig, Label};
use rbmcda::filter::FilterConfig;
use rbmcda::model::{BirthCoupling, ModelParams};
use rbmcda::pmcmc::{AdaptationConfig, Algorithm, PriorSpec, RefreshConfig, SamplerConfig};
use rbmcda::simulate::ScenarioConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub model: ModelSection,
    pub association: AssocPriorConfig,
    pub filter: FilterConfig,
    pub filter_run: FilterRunSection,
    pub sampler: SamplerSection,
    pub diagnose: DiagnoseSection,
}

/// Parameters used by `filter`, and the birth-density coupling used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub params: ModelParams,
    pub coupling: BirthCoupling,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { params: ModelParams { q: 100.0, lambda: 0.5, sigma: 0.5 }, coupling: BirthCoupling::Joint }
    }
}

/// Options of the `filter` command beyond the filter itself.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterRunSection {
    /// Forces particle 0 along this canonical history (conditional filter).
    pub clamped_history: Option<Vec<Label>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub algorithm: Algorithm,
    pub chains: usize,
    pub iterations: usize,
    pub prior: PriorSpec,
    /// Starting parameters; the prior mode when absent.
    pub initial: Option<ModelParams>,
    pub adaptation: AdaptationConfig,
    /// Association refreshes (particle Gibbs only).
    pub refresh: RefreshConfig,
    /// Keep θ fixed at its initial value (particle Gibbs only).
    pub fix_parameters: bool,
    pub all_particles: bool,
    pub record_locations: bool,
    pub store_histories: bool,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let base = SamplerConfig::default();
        Self {
            algorithm: Algorithm::Pgibbs,
            chains: 4,
            iterations: base.iterations,
            prior: base.prior,
            initial: None,
            adaptation: base.adaptation,
            refresh: base.refresh,
            fix_parameters: false,
            all_particles: false,
            record_locations: true,
            store_histories: true,
        }
    }
}

impl SamplerSection {
    pub fn sampler_config(&self, filter: FilterConfig) -> SamplerConfig {
        SamplerConfig {
            iterations: self.iterations,
            filter,
            prior: self.prior,
            initial: self.initial,
            adaptation: self.adaptation,
            refresh: self.refresh,
            fix_parameters: self.fix_parameters,
            all_particles: self.all_particles,
            record_locations: self.record_locations,
            store_histories: self.store_histories,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSection {
    /// OSPA cutoff `c` in position units.
    pub ospa_cutoff: f64,
    /// OSPA order `p`.
    pub ospa_order: f64,
    /// Number of log-spaced Kalman-call budgets on the convergence curve.
    pub curve_points: usize,
    /// Bins of the parameter posterior histograms.
    pub histogram_bins: usize,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        Self { ospa_cutoff: 10.0, ospa_order: 1.0, curve_points: 20, histogram_bins: 40 }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// SHA-256 of the serialized configuration.
    pub fn hash(&self) -> String {
        crate::io::sha256_hex(self.to_toml().as_bytes())
    }

    /// Checks the sections every command uses.
    pub fn validate(&self) -> Result<(), CliError> {
        self.model.params.validate()?;
        self.association.validate()?;
        self.filter.validate()?;
        self.sampler.sampler_config(self.filter).validate()?;
        if self.sampler.chains == 0 {
            return Err(CliError::Validation("sampler.chains must be at least 1".into()));
        }
        let d = &self.diagnose;
        if !(d.ospa_cutoff > 0.0) || !(d.ospa_order >= 1.0) {
            return Err(CliError::Validation("diagnose needs ospa_cutoff > 0 and ospa_order >= 1".into()));
        }
        if d.curve_points == 0 || d.histogram_bins == 0 {
            return Err(CliError::Validation("diagnose.curve_points and histogram_bins must be positive".into()));
        }
        Ok(())
    }
}
