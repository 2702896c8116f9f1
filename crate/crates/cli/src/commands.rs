use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rbmcda::association::AssocPrior;
use rbmcda::diagnostics::{convergence_curve, kolmogorov, num_targets_dist, psrf_columns, CostedSample, WeightedIntDist};
use rbmcda::filter::{conditional_rbmcda, rbmcda_filter, ParticleSet};
use rbmcda::gauss::KalmanCallCounter;
use rbmcda::pmcmc::{pgibbs, pmmh, Algorithm, IterationRecord, Trace, TrackingProblem};
use rbmcda::simulate::{scenario_from_csv, scenario_to_csv, simulate_scenario, truth_from_csv, truth_to_csv, GroundTruth, Scenario};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{self, ChainEntry, FilterSummary, InputFile, Manifest, ParticleLine, Provenance, FORMAT_VERSION};

#[derive(Debug, Parser)]
#[command(name = "rbmcda", version, about = "Multi-target tracking with particle MCMC parameter estimation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; defaults apply to anything omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Overrides `seed` from the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    /// Overrides `sampler.chains`.
    #[arg(long, global = true, value_name = "K")]
    pub chains: Option<usize>,

    /// Worker threads for multi-chain runs (all cores by default).
    #[arg(long, global = true, value_name = "K")]
    pub threads: Option<usize>,

    /// Print the default configuration as TOML and exit.
    #[arg(long, global = true)]
    pub print_defaults: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario with ground truth.
    Simulate,
    /// Run the association particle filter at fixed parameters.
    Filter {
        #[arg(long, value_name = "PATH")]
        scenario: PathBuf,
    },
    /// Run PMMH or particle Gibbs chains.
    Sample {
        #[arg(long, value_name = "PATH")]
        scenario: PathBuf,
    },
    /// Convergence and accuracy metrics for a directory of traces.
    Diagnose {
        /// Output directory of a `sample` run.
        #[arg(long, value_name = "DIR")]
        traces: PathBuf,
        /// A second `sample` run, compared side by side in `comparison.csv`.
        #[arg(long, value_name = "DIR")]
        baseline: Option<PathBuf>,
        /// A long run whose target-count posterior serves as the reference.
        #[arg(long, value_name = "DIR")]
        reference: Option<PathBuf>,
        /// Truth CSV written by `simulate`.
        #[arg(long, value_name = "PATH")]
        truth: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Filter { .. } => "filter",
            Command::Sample { .. } => "sample",
            Command::Diagnose { .. } => "diagnose",
        }
    }

    fn inputs(&self) -> Vec<(&'static str, &Path)> {
        match self {
            Command::Simulate => vec![],
            Command::Filter { scenario } | Command::Sample { scenario } => vec![("scenario", scenario)],
            Command::Diagnose { traces, baseline, reference, truth } => {
                let mut v = vec![("traces", traces.as_path())];
                v.extend(baseline.as_deref().map(|p| ("baseline", p)));
                v.extend(reference.as_deref().map(|p| ("reference", p)));
                v.extend(truth.as_deref().map(|p| ("truth", p)));
                v
            }
        }
    }
}

/// Resolves the configuration from the file and the command-line overrides.
pub fn resolve_config(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(chains) = global.chains {
        cfg.sampler.chains = chains;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    if cli.global.print_defaults {
        print!("{}", RunConfig::default().to_toml());
        return Ok(());
    }
    let command = cli.command.as_ref().ok_or_else(|| CliError::Validation("no subcommand given (see --help)".into()))?;
    if cli.global.threads == Some(0) {
        return Err(CliError::Validation("--threads must be at least 1".into()));
    }
    let cfg = resolve_config(&cli.global)?;
    let out = &cli.global.out;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_provenance(command, &cfg, out, argv)?;
    match command {
        Command::Simulate => simulate(&cfg, out),
        Command::Filter { scenario } => filter(&cfg, scenario, out),
        Command::Sample { scenario } => {
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(k) = cli.global.threads {
                pool = pool.num_threads(k);
            }
            let pool = pool.build().map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
            pool.install(|| sample(&cfg, scenario, out))
        }
        Command::Diagnose { traces, baseline, reference, truth } => {
            diagnose(&cfg, traces, baseline.as_deref(), reference.as_deref(), truth.as_deref(), out)
        }
    }
}

fn write_provenance(command: &Command, cfg: &RunConfig, out: &Path, argv: &[String]) -> Result<(), CliError> {
    let config_path = out.join("config.toml");
    let text = cfg.to_toml();
    fs::write(&config_path, &text).map_err(|e| CliError::io(&config_path, e))?;
    let mut inputs = Vec::new();
    let mut rerun: Vec<String> = vec!["rbmcda".into(), command.name().into()];
    for (role, path) in command.inputs() {
        let sha256 = if path.is_file() { io::file_sha256(path)? } else { String::new() };
        inputs.push(InputFile { role: role.into(), path: path.to_path_buf(), sha256 });
        rerun.extend([format!("--{role}"), path.display().to_string()]);
    }
    rerun.extend([
        "--config".into(),
        config_path.display().to_string(),
        "--seed".into(),
        cfg.seed.to_string(),
        "--out".into(),
        out.display().to_string(),
    ]);
    let prov = Provenance {
        format_version: FORMAT_VERSION,
        command: command.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        argv: argv.to_vec(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        config: text,
        inputs,
        rerun,
    };
    io::write_json(&out.join("provenance.json"), &prov)
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    Ok(scenario_from_csv(io::open(path)?)?)
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scenario = simulate_scenario(&cfg.scenario, &mut rng)?;
    let path = out.join("scenario.csv");
    scenario_to_csv(&scenario, io::create(&path)?)?;
    truth_to_csv(&scenario, io::create(&out.join("truth.csv"))?)?;
    log::info!("wrote {} observations to {}", scenario.len(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct DegenerateRecord {
    format_version: u32,
    error: String,
    step: Option<usize>,
}

fn filter(cfg: &RunConfig, scenario: &Path, out: &Path) -> Result<(), CliError> {
    let scenario = load_scenario(scenario)?;
    let n_obs = scenario.len();
    let problem = TrackingProblem::new(scenario.observations, cfg.association, cfg.model.coupling)?;
    let model = problem.model(cfg.model.params)?;
    let prior: &AssocPrior = &problem.assoc;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = KalmanCallCounter::current();
    let result = match &cfg.filter_run.clamped_history {
        Some(h) => conditional_rbmcda(&problem.observations, &model, prior, &cfg.filter, h, &mut rng),
        None => rbmcda_filter(&problem.observations, &model, prior, &cfg.filter, &mut rng),
    };
    let calls = KalmanCallCounter::current().since(start).total();
    let set: ParticleSet = match result {
        Ok(set) => set,
        Err(e) => {
            let step = match e {
                rbmcda::Error::DegenerateFilter { step } => Some(step),
                _ => None,
            };
            let err = CliError::from(e);
            if err.exit_code() == crate::error::EXIT_DEGENERATE {
                let rec = DegenerateRecord { format_version: FORMAT_VERSION, error: err.to_string(), step };
                io::write_json(&out.join("degenerate.json"), &rec)?;
            }
            return Err(err);
        }
    };

    let path = out.join("particles.jsonl");
    let mut w = io::create(&path)?;
    for (index, p) in set.particles.iter().enumerate() {
        let line = ParticleLine {
            format_version: FORMAT_VERSION,
            index,
            log_weight: p.log_weight,
            weight: p.log_weight.exp(),
            cond_loglik: p.cond_loglik,
            num_targets: p.num_targets(),
            num_alive: p.num_alive(),
            history: p.history.clone(),
            locations: p.alive_locations(),
        };
        serde_json::to_writer(&mut w, &line).map_err(|e| CliError::io(&path, e.into()))?;
        std::io::Write::write_all(&mut w, b"\n").map_err(|e| CliError::io(&path, e))?;
    }
    std::io::Write::flush(&mut w).map_err(|e| CliError::io(&path, e))?;

    let summary = FilterSummary {
        n_particles: set.len(),
        n_obs,
        log_marginal_lik: set.log_marginal_lik,
        ess: set.ess(),
        resample_count: set.resampled.iter().filter(|&&r| r).count(),
        kalman_calls: calls,
    };
    io::write_csv_rows(io::create(&out.join("summary.csv"))?, "filter summary", &[summary])
}

fn sample(cfg: &RunConfig, scenario: &Path, out: &Path) -> Result<(), CliError> {
    let scenario = load_scenario(scenario)?;
    let problem = TrackingProblem::new(scenario.observations, cfg.association, cfg.model.coupling)?;
    let sampler = cfg.sampler.sampler_config(cfg.filter);
    let algorithm = cfg.sampler.algorithm;
    let results: Vec<Result<Trace, CliError>> = (0..cfg.sampler.chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(chain as u64);
            let trace = match algorithm {
                Algorithm::Pmmh => pmmh(&problem, &sampler, &mut rng)?,
                Algorithm::Pgibbs => pgibbs(&problem, &sampler, &mut rng)?,
            };
            io::write_trace(io::create(&out.join(io::trace_file_name(chain)))?, chain, algorithm, &trace.records)?;
            if sampler.store_histories || sampler.record_locations {
                io::write_histories(io::create(&out.join(io::histories_file_name(chain)))?, chain, &trace.samples)?;
            }
            Ok(trace)
        })
        .collect();

    let mut entries = Vec::new();
    let mut first_error = None;
    for (chain, result) in results.into_iter().enumerate() {
        match result {
            Ok(trace) => {
                for w in &trace.warnings {
                    log::warn!("chain {chain}: {w}");
                }
                let with_histories = sampler.store_histories || sampler.record_locations;
                entries.push(ChainEntry {
                    chain,
                    status: "complete".into(),
                    error: None,
                    trace: Some(io::trace_file_name(chain)),
                    histories: with_histories.then(|| io::histories_file_name(chain)),
                    kalman_calls: trace.kalman_calls(),
                    acceptance_rate: trace.acceptance_rate(),
                });
            }
            Err(e) => {
                log::error!("chain {chain} failed: {e}");
                entries.push(ChainEntry {
                    chain,
                    status: "failed".into(),
                    error: Some(e.to_string()),
                    trace: None,
                    histories: None,
                    kalman_calls: 0,
                    acceptance_rate: 0.0,
                });
                first_error.get_or_insert(e);
            }
        }
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        algorithm,
        fix_parameters: sampler.fix_parameters,
        iterations: sampler.iterations,
        seed: cfg.seed,
        status: if first_error.is_some() { "failed" } else { "complete" }.into(),
        chains: entries,
    };
    io::write_json(&out.join("manifest.json"), &manifest)?;
    first_error.map_or(Ok(()), Err)
}

/// Chains of one `sample` run rebuilt from its files.
pub struct TraceSet {
    pub dir: PathBuf,
    pub algorithm: Algorithm,
    pub fix_parameters: bool,
    pub traces: Vec<Trace>,
}

impl TraceSet {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let manifest: Option<Manifest> = {
            let path = dir.join("manifest.json");
            if path.is_file() { Some(io::read_json(&path)?) } else { None }
        };
        if let Some(m) = &manifest {
            if m.format_version != FORMAT_VERSION {
                return Err(CliError::Validation(format!("{}: unsupported manifest format_version", dir.display())));
            }
            if m.status != "complete" {
                log::warn!("{}: run is flagged `{}`; using the chains that finished", dir.display(), m.status);
            }
        }
        let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
        let mut files: Vec<(usize, PathBuf)> = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| CliError::io(dir, e))?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if let Some(k) = name.strip_prefix("chain_").and_then(|n| n.strip_suffix(".trace.csv")) {
                let k = k.parse().map_err(|_| CliError::Validation(format!("bad trace file name {name}")))?;
                files.push((k, path));
            }
        }
        files.sort();
        if files.is_empty() {
            return Err(CliError::Validation(format!("{}: no chain_*.trace.csv files", dir.display())));
        }
        let mut traces = Vec::new();
        for (k, path) in &files {
            let file = io::read_trace(path)?;
            if file.chain != *k {
                return Err(CliError::Validation(format!("{}: holds chain {}", path.display(), file.chain)));
            }
            let hist_path = dir.join(io::histories_file_name(*k));
            let samples = if hist_path.is_file() { io::read_histories(&hist_path)? } else { Vec::new() };
            traces.push(rebuild_trace(file.algorithm, file.records, samples));
        }
        let algorithm = traces[0].algorithm;
        if traces.iter().any(|t| t.algorithm != algorithm) {
            return Err(CliError::Validation(format!("{}: traces mix algorithms", dir.display())));
        }
        if traces.iter().any(|t| t.iterations() != traces[0].iterations()) {
            return Err(CliError::Validation(format!("{}: traces differ in length", dir.display())));
        }
        let fix_parameters = match &manifest {
            Some(m) => m.fix_parameters,
            None => traces.iter().all(|t| t.records.windows(2).all(|w| w[0].params == w[1].params)),
        };
        Ok(Self { dir: dir.to_path_buf(), algorithm, fix_parameters, traces })
    }

    /// `with` when θ was sampled, `without` when it was held fixed.
    pub fn label(&self) -> &'static str {
        if self.fix_parameters { "without" } else { "with" }
    }

    fn pooled_samples(&self) -> Vec<CostedSample> {
        self.traces
            .iter()
            .flat_map(|t| {
                let cut = t.iterations() / 2;
                t.costed_samples().into_iter().filter(move |s| s.iteration > cut)
            })
            .collect()
    }

    pub fn num_targets_dist(&self) -> Option<WeightedIntDist> {
        num_targets_dist(&self.pooled_samples())
    }
}

/// The files hold iterations `1..=I`; iteration 0 is restored as a copy of
/// the first record with zero cost so that warmup cuts line up.
fn rebuild_trace(algorithm: Algorithm, records: Vec<IterationRecord>, samples: Vec<rbmcda::pmcmc::AssocSample>) -> Trace {
    let mut all = Vec::with_capacity(records.len() + 1);
    all.push(IterationRecord { iteration: 0, accepted: false, kalman_calls: 0, ..records[0] });
    all.extend(records);
    Trace { algorithm, records: all, samples, proposal_covs: Vec::new(), failed_evaluations: 0, warnings: Vec::new() }
}

#[derive(Debug, Serialize)]
struct MetricRow {
    metric: String,
    value: String,
    config: String,
}

#[derive(Debug, Serialize)]
struct PlotRow {
    series: String,
    config: String,
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize)]
struct ComparisonRow {
    config: String,
    chains: usize,
    iterations: usize,
    kalman_calls: u64,
    mean_num_targets: Option<f64>,
    p_true_num_targets: Option<f64>,
    mean_ospa: Option<f64>,
    kolmogorov_to_reference: Option<f64>,
}

struct SetReport {
    metrics: Vec<MetricRow>,
    plot: Vec<PlotRow>,
    table: ComparisonRow,
}

const PARAM_NAMES: [&str; 3] = ["sqrt_q", "lambda", "sigma"];

fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64)> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Vec::new();
    }
    if !(hi > lo) {
        return vec![(lo, 1.0)];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in values {
        counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
    }
    let n = values.len() as f64;
    counts.iter().enumerate().map(|(i, &c)| (lo + (i as f64 + 0.5) * width, c as f64 / (n * width))).collect()
}

/// Log-spaced budgets from the cheapest first sample to the shortest chain.
fn curve_cuts(set: &TraceSet, points: usize) -> Vec<u64> {
    let lo = set.traces.iter().filter_map(|t| t.samples.first().map(|s| s.kalman_calls)).min().unwrap_or(1).max(1);
    let hi = set.traces.iter().map(|t| t.kalman_calls()).min().unwrap_or(1).max(lo);
    if points == 1 || hi == lo {
        return vec![hi];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut cuts: Vec<u64> =
        (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp().round() as u64).collect();
    cuts.dedup();
    cuts
}

fn report(
    set: &TraceSet,
    label: String,
    cfg: &RunConfig,
    truth: Option<&GroundTruth>,
    reference: Option<&WeightedIntDist>,
) -> Result<SetReport, CliError> {
    let mut metrics = Vec::new();
    let mut plot = Vec::new();
    let mut push = |metric: &str, value: String| metrics.push(MetricRow { metric: metric.into(), value, config: label.clone() });

    let iterations = set.traces[0].iterations();
    let calls: u64 = set.traces.iter().map(|t| t.kalman_calls()).sum();
    push("chains", set.traces.len().to_string());
    push("iterations", iterations.to_string());
    push("kalman_calls", calls.to_string());
    let acc = set.traces.iter().map(|t| t.acceptance_rate()).sum::<f64>() / set.traces.len() as f64;
    push("acceptance_rate", acc.to_string());

    let coords: Vec<Vec<[f64; 3]>> = set.traces.iter().map(|t| t.coords_after_warmup()).collect();
    if set.traces.len() >= 2 {
        match psrf_columns(&coords) {
            Ok(r) => {
                for (name, v) in PARAM_NAMES.iter().zip(r) {
                    push(&format!("psrf_{name}"), v.to_string());
                }
            }
            Err(e) => push("note", format!("PSRF unavailable: {e}")),
        }
    } else {
        push("note", "PSRF needs at least two chains".into());
    }
    for (d, name) in PARAM_NAMES.iter().enumerate() {
        let values: Vec<f64> = coords.iter().flatten().map(|c| c[d]).collect();
        if values.is_empty() {
            continue;
        }
        push(&format!("posterior_mean_{name}"), (values.iter().sum::<f64>() / values.len() as f64).to_string());
        for (x, y) in histogram(&values, cfg.diagnose.histogram_bins) {
            plot.push(PlotRow { series: format!("posterior_{name}"), config: label.clone(), x, y });
        }
    }

    let dist = set.num_targets_dist();
    let mut mean_num_targets = None;
    let mut p_true = None;
    match &dist {
        Some(d) => {
            mean_num_targets = Some(d.mean());
            push("mean_num_targets", d.mean().to_string());
            for (&k, &w) in d.support.iter().zip(&d.weights) {
                push(&format!("p_num_targets_{k}"), w.to_string());
                plot.push(PlotRow { series: "num_targets".into(), config: label.clone(), x: k as f64, y: w });
            }
        }
        None => push("note", "no association samples; target-count posterior omitted".into()),
    }

    let mut mean_ospa = None;
    match truth {
        Some(truth) => {
            let true_count = truth.locations.len() as i64;
            if let Some(d) = &dist {
                p_true = Some(d.prob(true_count));
                push("p_true_num_targets", d.prob(true_count).to_string());
            }
            let final_locs = truth.final_locations();
            let mut vals = Vec::new();
            for t in &set.traces {
                if let Some(v) = t.mean_ospa(&final_locs, cfg.diagnose.ospa_cutoff, cfg.diagnose.ospa_order)? {
                    vals.push(v);
                }
            }
            if vals.is_empty() {
                push("note", "no recorded locations; OSPA omitted".into());
            } else {
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                mean_ospa = Some(m);
                push("mean_ospa", m.to_string());
            }
        }
        None => push("note", "no truth supplied; OSPA omitted".into()),
    }

    let mut k_ref = None;
    if let (Some(reference), Some(d)) = (reference, &dist) {
        let k = kolmogorov(d, reference);
        k_ref = Some(k);
        push("kolmogorov_to_reference", k.to_string());
        let chains: Vec<Vec<CostedSample>> = set.traces.iter().map(|t| t.costed_samples()).collect();
        for p in convergence_curve(&chains, reference, &curve_cuts(set, cfg.diagnose.curve_points)) {
            plot.push(PlotRow {
                series: "kolmogorov_curve".into(),
                config: label.clone(),
                x: p.kalman_calls as f64,
                y: p.distance,
            });
        }
    }

    let table = ComparisonRow {
        config: label.clone(),
        chains: set.traces.len(),
        iterations,
        kalman_calls: calls,
        mean_num_targets,
        p_true_num_targets: p_true,
        mean_ospa,
        kolmogorov_to_reference: k_ref,
    };
    Ok(SetReport { metrics, plot, table })
}

fn diagnose(
    cfg: &RunConfig,
    traces: &Path,
    baseline: Option<&Path>,
    reference: Option<&Path>,
    truth: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let truth = truth.map(|p| truth_from_csv(io::open(p)?).map_err(CliError::from)).transpose()?;
    let reference = match reference {
        Some(dir) => Some(
            TraceSet::load(dir)?
                .num_targets_dist()
                .ok_or_else(|| CliError::Validation(format!("{}: reference has no association samples", dir.display())))?,
        ),
        None => None,
    };
    let mut sets = vec![TraceSet::load(traces)?];
    if let Some(b) = baseline {
        sets.push(TraceSet::load(b)?);
        if sets[0].algorithm != sets[1].algorithm {
            log::warn!("comparing runs of different algorithms");
        }
    }
    let mut metrics = Vec::new();
    let mut plot = Vec::new();
    let mut table = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        let mut label = set.label().to_string();
        if i == 1 && label == sets[0].label() {
            label.push_str("_baseline");
        }
        let r = report(set, label, cfg, truth.as_ref(), reference.as_ref())?;
        metrics.extend(r.metrics);
        plot.extend(r.plot);
        table.push(r.table);
    }
    io::write_csv_rows(io::create(&out.join("metrics.csv"))?, "metrics", &metrics)?;
    io::write_csv_rows(io::create(&out.join("plot_data.csv"))?, "plot data", &plot)?;
    if baseline.is_some() {
        io::write_csv_rows(io::create(&out.join("comparison.csv"))?, "comparison", &table)?;
    }
    Ok(())
}
