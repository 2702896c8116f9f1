//! On-disk formats written and read by the commands. Every file carries a
//! `format_version`: CSV files in a leading `#` comment, JSON in a field.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rbmcda::model::ModelParams;
use rbmcda::pmcmc::{Algorithm, AssocSample, IterationRecord};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

pub const TRACE_COLUMNS: [&str; 12] = [
    "chain",
    "iteration",
    "sqrt_q",
    "q",
    "lambda",
    "sigma",
    "log_lik",
    "log_prior",
    "accepted",
    "alpha",
    "u",
    "kalman_calls",
];

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::io(path, e.into()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_reader(open(path)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    let mut buf = Vec::new();
    open(path)?.read_to_end(&mut buf).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&buf))
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub format_version: u32,
    pub command: String,
    pub version: String,
    pub argv: Vec<String>,
    pub seed: u64,
    pub config_hash: String,
    /// Resolved configuration as TOML, also written to `config.toml` next to this file.
    pub config: String,
    /// Input files with their SHA-256.
    pub inputs: Vec<InputFile>,
    /// Command line that reruns this exact run from the output directory.
    pub rerun: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Per-chain status of a `sample` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub algorithm: Algorithm,
    pub fix_parameters: bool,
    pub iterations: usize,
    pub seed: u64,
    /// `complete` or `failed`; a failed run keeps the files of the chains that finished.
    pub status: String,
    pub chains: Vec<ChainEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub chain: usize,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histories: Option<String>,
    pub kalman_calls: u64,
    pub acceptance_rate: f64,
}

pub fn trace_file_name(chain: usize) -> String {
    format!("chain_{chain}.trace.csv")
}

pub fn histories_file_name(chain: usize) -> String {
    format!("chain_{chain}.histories.jsonl")
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    chain: usize,
    iteration: usize,
    sqrt_q: f64,
    q: f64,
    lambda: f64,
    sigma: f64,
    log_lik: f64,
    log_prior: f64,
    accepted: u8,
    alpha: f64,
    u: f64,
    kalman_calls: u64,
}

/// One row per iteration `1..=I`; the initial state is not written.
pub fn write_trace<W: Write>(mut out: W, chain: usize, algorithm: Algorithm, records: &[IterationRecord]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::io(Path::new("<trace>"), e);
    writeln!(out, "# rbmcda trace format_version={FORMAT_VERSION} algorithm={}", algorithm.name()).map_err(fail)?;
    let mut wtr = csv::Writer::from_writer(out);
    for r in records.iter().filter(|r| r.iteration > 0) {
        wtr.serialize(TraceRow {
            chain,
            iteration: r.iteration,
            sqrt_q: r.params.sqrt_q(),
            q: r.params.q,
            lambda: r.params.lambda,
            sigma: r.params.sigma,
            log_lik: r.log_lik,
            log_prior: r.log_prior,
            accepted: r.accepted as u8,
            alpha: r.alpha,
            u: r.u,
            kalman_calls: r.kalman_calls,
        })
        .map_err(|e| fail(e.into()))?;
    }
    wtr.flush().map_err(fail)
}

/// A trace file read back: its algorithm tag and iteration records.
#[derive(Debug, Clone)]
pub struct TraceFile {
    pub algorithm: Algorithm,
    pub chain: usize,
    pub records: Vec<IterationRecord>,
}

fn schema_error(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{}: {msg}", path.display()))
}

pub fn read_trace(path: &Path) -> Result<TraceFile, CliError> {
    let mut reader = open(path)?;
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| CliError::io(path, e))?;
    let tags: Vec<(&str, &str)> =
        first.trim().strip_prefix("# rbmcda trace").unwrap_or("").split_whitespace().filter_map(|t| t.split_once('=')).collect();
    let tag = |k: &str| tags.iter().find(|(key, _)| *key == k).map(|(_, v)| *v);
    if tag("format_version") != Some(&FORMAT_VERSION.to_string()) {
        return Err(schema_error(path, format!("expected trace format_version={FORMAT_VERSION}")));
    }
    let algorithm = match tag("algorithm") {
        Some("pmmh") => Algorithm::Pmmh,
        Some("pgibbs") => Algorithm::Pgibbs,
        other => return Err(schema_error(path, format!("unknown algorithm {other:?}"))),
    };
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| schema_error(path, e))?;
    if !headers.iter().eq(TRACE_COLUMNS) {
        return Err(schema_error(path, format!("trace columns must be {}", TRACE_COLUMNS.join(","))));
    }
    let mut records = Vec::new();
    let mut chain = None;
    for row in rdr.deserialize::<TraceRow>() {
        let row = row.map_err(|e| schema_error(path, e))?;
        if *chain.get_or_insert(row.chain) != row.chain {
            return Err(schema_error(path, "rows from more than one chain"));
        }
        if row.iteration != records.len() + 1 {
            return Err(schema_error(path, format!("iteration {} out of sequence", row.iteration)));
        }
        records.push(IterationRecord {
            iteration: row.iteration,
            params: ModelParams { q: row.q, lambda: row.lambda, sigma: row.sigma },
            accepted: row.accepted != 0,
            alpha: row.alpha,
            log_lik: row.log_lik,
            log_prior: row.log_prior,
            u: row.u,
            kalman_calls: row.kalman_calls,
        });
    }
    let chain = chain.ok_or_else(|| schema_error(path, "empty trace"))?;
    Ok(TraceFile { algorithm, chain, records })
}

#[derive(Debug, Serialize, Deserialize)]
struct HistoryLine {
    format_version: u32,
    chain: usize,
    #[serde(flatten)]
    sample: AssocSample,
}

pub fn write_histories<W: Write>(mut out: W, chain: usize, samples: &[AssocSample]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::io(Path::new("<histories>"), e);
    for s in samples {
        let line = HistoryLine { format_version: FORMAT_VERSION, chain, sample: s.clone() };
        serde_json::to_writer(&mut out, &line).map_err(|e| fail(e.into()))?;
        writeln!(out).map_err(fail)?;
    }
    out.flush().map_err(fail)
}

pub fn read_histories(path: &Path) -> Result<Vec<AssocSample>, CliError> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: HistoryLine =
            serde_json::from_str(&line).map_err(|e| schema_error(path, format!("line {}: {e}", i + 1)))?;
        if parsed.format_version != FORMAT_VERSION {
            return Err(schema_error(path, format!("line {}: unsupported format_version {}", i + 1, parsed.format_version)));
        }
        out.push(parsed.sample);
    }
    Ok(out)
}

/// One output particle of the `filter` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleLine {
    pub format_version: u32,
    pub index: usize,
    pub log_weight: f64,
    pub weight: f64,
    pub cond_loglik: f64,
    pub num_targets: usize,
    pub num_alive: usize,
    pub history: Vec<u32>,
    /// Posterior mean locations of the visible targets.
    pub locations: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub n_particles: usize,
    pub n_obs: usize,
    pub log_marginal_lik: f64,
    pub ess: f64,
    pub resample_count: usize,
    pub kalman_calls: u64,
}

pub fn write_csv_rows<W: Write, T: Serialize>(mut out: W, kind: &str, rows: &[T]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::io(Path::new(kind), e);
    writeln!(out, "# rbmcda {kind} format_version={FORMAT_VERSION}").map_err(fail)?;
    let mut wtr = csv::Writer::from_writer(out);
    for r in rows {
        wtr.serialize(r).map_err(|e| fail(e.into()))?;
    }
    wtr.flush().map_err(fail)
}

pub fn read_summary(path: &Path) -> Result<FilterSummary, CliError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(open(path)?);
    let row = rdr.deserialize().next().ok_or_else(|| schema_error(path, "empty summary"))?;
    row.map_err(|e| schema_error(path, e))
}
