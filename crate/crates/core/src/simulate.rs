//! Scenario generation and the scenario CSV format.

use std::io::{Read, Write};

use nalgebra::Vector2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::association::{canonicalize, Label, Window};
use crate::model::{Measurement, ModelParams, ObservationStats};
use crate::{Error, Result};

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

/// A timestamped 2-D measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub y: Measurement,
}

impl Observation {
    pub fn new(t: f64, y1: f64, y2: f64) -> Self {
        Self { t, y: Vector2::new(y1, y2) }
    }
}

/// True target locations, indexed by canonical label.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub mean_locations: Vec<[f64; 2]>,
    /// `locations[target][k]`: location of the target at observation `k`'s time.
    pub locations: Vec<Vec<[f64; 2]>>,
}

impl GroundTruth {
    /// Every target's location at the last observation time.
    pub fn final_locations(&self) -> Vec<[f64; 2]> {
        self.locations.iter().filter_map(|l| l.last().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    /// Sorted by time.
    pub observations: Vec<Observation>,
    pub truth_assoc: Option<Vec<Label>>,
    pub truth: Option<GroundTruth>,
}

impl Scenario {
    pub fn from_observations(mut observations: Vec<Observation>) -> Self {
        observations.sort_by(|a, b| a.t.total_cmp(&b.t));
        Self { observations, truth_assoc: None, truth: None }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.t).collect()
    }

    pub fn stats(&self) -> Result<ObservationStats> {
        ObservationStats::from_measurements(self.observations.iter().map(|o| &o.y))
    }

    pub fn true_num_targets(&self) -> Option<usize> {
        self.truth_assoc.as_deref().map(crate::association::num_targets)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_targets: usize,
    pub n_obs: usize,
    pub window: Window,
    pub time_span: [f64; 2],
    pub params: ModelParams,
    /// Cap on association redraws while waiting for every target to be observed.
    pub max_attempts: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_targets: 30,
            n_obs: 150,
            window: Window::square(0.0, 100.0),
            time_span: [0.0, 1.0],
            params: ModelParams { q: 100.0, lambda: 0.5, sigma: 0.5 },
            max_attempts: 1_000_000,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_targets == 0 {
            return Err(Error::invalid("n_targets must be at least 1"));
        }
        if self.n_obs < self.n_targets {
            return Err(Error::invalid(format!(
                "n_obs ({}) must be at least n_targets ({})",
                self.n_obs, self.n_targets
            )));
        }
        self.window.validate()?;
        let [t0, t1] = self.time_span;
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::invalid(format!("time span [{t0}, {t1}] is empty")));
        }
        if self.max_attempts == 0 {
            return Err(Error::invalid("max_attempts must be at least 1"));
        }
        self.params.validate()
    }
}

fn normal2<R: Rng + ?Sized>(rng: &mut R) -> Vector2<f64> {
    Vector2::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

/// Simulates OU targets observed at uniformly random times.
///
/// Each observation picks a target uniformly; the whole association vector is
/// redrawn until every target is observed, then relabeled canonically.
pub fn simulate_scenario<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Scenario> {
    cfg.validate()?;
    let w = cfg.window;
    let means: Vec<Vector2<f64>> = (0..cfg.n_targets)
        .map(|_| {
            Vector2::new(
                rng.random_range(w.x_min..w.x_max),
                rng.random_range(w.y_min..w.y_max),
            )
        })
        .collect();

    let [t0, t1] = cfg.time_span;
    let mut times: Vec<f64> = (0..cfg.n_obs).map(|_| rng.random_range(t0..t1)).collect();
    times.sort_by(f64::total_cmp);

    let mut assoc = vec![0 as Label; cfg.n_obs];
    let mut attempts = 0;
    loop {
        if attempts == cfg.max_attempts {
            return Err(Error::GenerationFailed { attempts });
        }
        attempts += 1;
        let mut seen = vec![false; cfg.n_targets];
        for a in assoc.iter_mut() {
            let j = rng.random_range(0..cfg.n_targets);
            seen[j] = true;
            *a = j as Label + 1;
        }
        if seen.iter().all(|&s| s) {
            break;
        }
    }
    // Canonical labels, and the targets reordered to match them.
    let raw = assoc.clone();
    canonicalize(&mut assoc);
    let mut order = vec![0usize; cfg.n_targets];
    for (&r, &c) in raw.iter().zip(&assoc) {
        order[c as usize - 1] = r as usize - 1;
    }
    let means: Vec<Vector2<f64>> = order.iter().map(|&j| means[j]).collect();

    let p = cfg.params;
    let steady_sd = p.steady_state_var().sqrt();
    let mut positions: Vec<Vector2<f64>> =
        means.iter().map(|mu| mu + normal2(rng) * steady_sd).collect();
    let mut locations = vec![Vec::with_capacity(cfg.n_obs); cfg.n_targets];
    let mut observations = Vec::with_capacity(cfg.n_obs);
    let mut last_t = t0;
    for (&t, &c) in times.iter().zip(&assoc) {
        let dt = t - last_t;
        let b = (-p.lambda * dt).exp();
        let s = (-p.q / (2.0 * p.lambda) * (-2.0 * p.lambda * dt).exp_m1()).sqrt();
        for (j, pos) in positions.iter_mut().enumerate() {
            *pos = means[j] + (*pos - means[j]) * b + normal2(rng) * s;
            locations[j].push([pos[0], pos[1]]);
        }
        let y = positions[c as usize - 1] + normal2(rng) * p.sigma;
        observations.push(Observation { t, y });
        last_t = t;
    }

    Ok(Scenario {
        observations,
        truth_assoc: Some(assoc),
        truth: Some(GroundTruth {
            mean_locations: means.iter().map(|m| [m[0], m[1]]).collect(),
            locations,
        }),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioRow {
    t: f64,
    y1: f64,
    y2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth_assoc: Option<Label>,
}

/// Writes `t,y1,y2[,truth_assoc]` preceded by a `#` format-version comment.
pub fn scenario_to_csv<W: Write>(scenario: &Scenario, mut out: W) -> Result<()> {
    writeln!(out, "# rbmcda scenario format_version={SCENARIO_FORMAT_VERSION}")?;
    let mut wtr = csv::Writer::from_writer(out);
    let with_truth = scenario.truth_assoc.is_some();
    if with_truth {
        wtr.write_record(["t", "y1", "y2", "truth_assoc"]).map_err(csv_err)?;
    } else {
        wtr.write_record(["t", "y1", "y2"]).map_err(csv_err)?;
    }
    for (i, o) in scenario.observations.iter().enumerate() {
        let mut rec = vec![o.t.to_string(), o.y[0].to_string(), o.y[1].to_string()];
        if let Some(a) = &scenario.truth_assoc {
            rec.push(a[i].to_string());
        }
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a scenario CSV. Rows are stably re-sorted by time. `#` lines are comments.
pub fn scenario_from_csv<R: Read>(input: R) -> Result<Scenario> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    for need in ["t", "y1", "y2"] {
        if !headers.iter().any(|h| h == need) {
            return Err(Error::Parse { line: 1, message: format!("missing column `{need}`") });
        }
    }
    let has_truth = headers.iter().any(|h| h == "truth_assoc");
    let mut rows: Vec<(Observation, Option<Label>)> = Vec::new();
    for rec in rdr.deserialize::<ScenarioRow>() {
        let row = rec.map_err(csv_err)?;
        if has_truth && row.truth_assoc.is_none() {
            return Err(Error::Parse {
                line: rows.len() + 2,
                message: "missing truth_assoc value".into(),
            });
        }
        if !(row.t.is_finite() && row.y1.is_finite() && row.y2.is_finite()) {
            return Err(Error::Parse { line: rows.len() + 2, message: "non-finite value".into() });
        }
        rows.push((Observation::new(row.t, row.y1, row.y2), row.truth_assoc));
    }
    rows.sort_by(|a, b| a.0.t.total_cmp(&b.0.t));
    let truth_assoc = has_truth.then(|| rows.iter().map(|r| r.1.unwrap_or(0)).collect());
    Ok(Scenario { observations: rows.into_iter().map(|r| r.0).collect(), truth_assoc, truth: None })
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthRow {
    target: usize,
    k: usize,
    t: f64,
    mu1: f64,
    mu2: f64,
    p1: f64,
    p2: f64,
}

/// Writes one row per (target, observation time) with the true locations.
pub fn truth_to_csv<W: Write>(scenario: &Scenario, mut out: W) -> Result<()> {
    let truth = scenario.truth.as_ref().ok_or_else(|| Error::invalid("scenario has no ground truth"))?;
    writeln!(out, "# rbmcda truth format_version={SCENARIO_FORMAT_VERSION}")?;
    let mut wtr = csv::Writer::from_writer(out);
    for (j, locs) in truth.locations.iter().enumerate() {
        let mu = truth.mean_locations[j];
        for (k, loc) in locs.iter().enumerate() {
            wtr.serialize(TruthRow {
                target: j + 1,
                k: k + 1,
                t: scenario.observations[k].t,
                mu1: mu[0],
                mu2: mu[1],
                p1: loc[0],
                p2: loc[1],
            })
            .map_err(csv_err)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn truth_from_csv<R: Read>(input: R) -> Result<GroundTruth> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let mut truth = GroundTruth { mean_locations: Vec::new(), locations: Vec::new() };
    for rec in rdr.deserialize::<TruthRow>() {
        let row = rec.map_err(csv_err)?;
        if row.target == 0 {
            return Err(Error::Parse { line: 0, message: "target labels start at 1".into() });
        }
        while truth.locations.len() < row.target {
            truth.locations.push(Vec::new());
            truth.mean_locations.push([row.mu1, row.mu2]);
        }
        truth.locations[row.target - 1].push([row.p1, row.p2]);
    }
    Ok(truth)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        },
        _ => Error::Parse { line, message: e.to_string() },
    }
}
