//! Parameter sweeps over modes, samplers, scale-down factors, path counts
//! and latency ranges, with per-run and aggregate CSV reports.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{run_online, utilization, EngineConfig, RunMetrics};
use crate::ingest::{
    build_ixp_multigraph, generate_synthetic, parse_locations, parse_membership, parse_prefix_counts, IngestError,
    SyntheticConfig, SyntheticDataset,
};
use crate::latency::{annotate_latencies, derive_catalog, generate_requests, LatencyError, LatencyModelParams, RequestParams};
use crate::metrics::{greedy_coverage_order, scale_down, MetricsError};
use crate::sampling::SamplerKind;
use crate::solver::{run_hybrid, solve_optflow, HybridConfig, SolverBudget};
use crate::topology::{Multigraph, Request};

pub const RESULTS_HEADER: &str =
    "run_id,mode,algo,sdf,k,lat_lo,lat_hi,n_requests,accepted,acceptance_ratio,utilization,mean_time_us,p99_time_us,seed";
pub const AGGREGATE_HEADER: &str = "mode,algo,sdf,k,lat_lo,lat_hi,n_requests,runs,accepted_mean,ar_mean,ar_std,\
utilization_mean,utilization_std,mean_time_us_mean,mean_time_us_std,p99_time_us_mean";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("`{0}` must not be empty")]
    EmptyList(&'static str),
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: IngestError },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Latency(#[from] LatencyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("writing {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Online,
    Hybrid,
    Offline,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Online => "online",
            Mode::Hybrid => "hybrid",
            Mode::Offline => "offline",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "online" => Ok(Mode::Online),
            "hybrid" => Ok(Mode::Hybrid),
            "offline" => Ok(Mode::Offline),
            other => Err(format!("unknown mode `{other}` (online, hybrid, offline)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    Synthetic { seed: u64 },
    Files {
        membership: PathBuf,
        locations: PathBuf,
        prefixes: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub modes: Vec<Mode>,
    pub algos: Vec<SamplerKind>,
    pub sdfs: Vec<usize>,
    pub ks: Vec<usize>,
    pub lat_ranges: Vec<(f64, f64)>,
    pub n_requests: usize,
    pub n_runs: usize,
    pub seed: u64,
    pub input: InputSource,
    pub out_dir: PathBuf,
    /// When off, time columns are written as 0 so reruns are byte-identical.
    pub timing: bool,
    /// Budget for hybrid reconfiguration and offline solving.
    pub solver_nodes: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            modes: vec![Mode::Online],
            algos: SamplerKind::ALL.to_vec(),
            sdfs: vec![8],
            ks: vec![20],
            lat_ranges: vec![(200.0, 250.0)],
            n_requests: 10_000,
            n_runs: 10,
            seed: 1,
            input: InputSource::Synthetic { seed: 1 },
            out_dir: PathBuf::from("results"),
            timing: true,
            solver_nodes: 200_000,
        }
    }
}

fn list<T, F>(raw: &str, f: F) -> Result<Vec<T>, String>
where
    F: Fn(&str) -> Result<T, String>,
{
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(f).collect()
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("`{s}` is not a valid number"))
}

pub fn parse_lat_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("`{s}` is not lo:hi"))?;
    let (lo, hi): (f64, f64) = (parse_num(lo)?, parse_num(hi)?);
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(format!("`{s}` must satisfy 0 < lo < hi"));
    }
    Ok((lo, hi))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => Err(format!("`{other}` is not a boolean")),
    }
}

impl ExperimentConfig {
    /// Sets one key; list-valued keys take comma-separated values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ExperimentError> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let bad = |reason: String| ExperimentError::InvalidValue {
            key: key.clone(),
            reason,
        };
        let file_input = |cfg: &mut Self| -> (PathBuf, PathBuf, PathBuf) {
            match &cfg.input {
                InputSource::Files {
                    membership,
                    locations,
                    prefixes,
                } => (membership.clone(), locations.clone(), prefixes.clone()),
                InputSource::Synthetic { .. } => Default::default(),
            }
        };
        match key.as_str() {
            "mode" => self.modes = list(value, |s| s.parse()).map_err(bad)?,
            "algo" => self.algos = list(value, |s| s.parse::<SamplerKind>()).map_err(bad)?,
            "sdf" => self.sdfs = list(value, parse_num).map_err(bad)?,
            "k" => self.ks = list(value, parse_num).map_err(bad)?,
            "lat_range" => self.lat_ranges = list(value, parse_lat_range).map_err(bad)?,
            "requests" => self.n_requests = parse_num(value).map_err(bad)?,
            "runs" => self.n_runs = parse_num(value).map_err(bad)?,
            "seed" => self.seed = parse_num(value).map_err(bad)?,
            "out" => self.out_dir = PathBuf::from(value.trim()),
            "timing" => self.timing = parse_bool(value).map_err(bad)?,
            "solver_nodes" => self.solver_nodes = parse_num(value).map_err(bad)?,
            "synthetic_seed" => {
                self.input = InputSource::Synthetic {
                    seed: parse_num(value).map_err(bad)?,
                }
            }
            "membership" | "locations" | "prefixes" => {
                let (mut m, mut l, mut p) = file_input(self);
                let v = PathBuf::from(value.trim());
                match key.as_str() {
                    "membership" => m = v,
                    "locations" => l = v,
                    _ => p = v,
                }
                self.input = InputSource::Files {
                    membership: m,
                    locations: l,
                    prefixes: p,
                };
            }
            _ => return Err(ExperimentError::UnknownKey(key)),
        }
        Ok(())
    }

    /// Flat `key = value` text; `#` starts a comment.
    pub fn parse_kv(text: &str) -> Result<Self, ExperimentError> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ExperimentError::Config {
                line: i + 1,
                reason: "expected key=value".into(),
            })?;
            cfg.set(k, v).map_err(|e| ExperimentError::Config {
                line: i + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |key: &str, reason: &str| ExperimentError::InvalidValue {
            key: key.into(),
            reason: reason.into(),
        };
        if self.modes.is_empty() {
            return Err(ExperimentError::EmptyList("mode"));
        }
        if self.algos.is_empty() {
            return Err(ExperimentError::EmptyList("algo"));
        }
        if self.sdfs.is_empty() {
            return Err(ExperimentError::EmptyList("sdf"));
        }
        if self.ks.is_empty() {
            return Err(ExperimentError::EmptyList("k"));
        }
        if self.lat_ranges.is_empty() {
            return Err(ExperimentError::EmptyList("lat_range"));
        }
        if self.sdfs.contains(&0) {
            return Err(invalid("sdf", "factors must be at least 1"));
        }
        if self.ks.contains(&0) {
            return Err(invalid("k", "path counts must be at least 1"));
        }
        if self.n_runs == 0 {
            return Err(invalid("runs", "must be at least 1"));
        }
        if self.n_requests == 0 {
            return Err(invalid("requests", "must be at least 1"));
        }
        if let InputSource::Files {
            membership,
            locations,
            prefixes,
        } = &self.input
        {
            for (name, p) in [("membership", membership), ("locations", locations), ("prefixes", prefixes)] {
                if p.as_os_str().is_empty() {
                    return Err(invalid(name, "file inputs need membership, locations and prefixes"));
                }
            }
        }
        Ok(())
    }
}

/// One row of results.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub run_id: usize,
    pub mode: Mode,
    pub algo: String,
    pub sdf: usize,
    pub k: usize,
    pub lat_lo: f64,
    pub lat_hi: f64,
    pub n_requests: usize,
    pub accepted: usize,
    pub acceptance_ratio: f64,
    pub utilization: f64,
    pub mean_time_us: f64,
    pub p99_time_us: f64,
    pub seed: u64,
}

impl RunRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.run_id,
            self.mode,
            self.algo,
            self.sdf,
            self.k,
            self.lat_lo,
            self.lat_hi,
            self.n_requests,
            self.accepted,
            self.acceptance_ratio,
            self.utilization,
            self.mean_time_us,
            self.p99_time_us,
            self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub mode: Mode,
    pub algo: String,
    pub sdf: usize,
    pub k: usize,
    pub lat_lo: f64,
    pub lat_hi: f64,
    pub n_requests: usize,
    pub runs: usize,
    pub accepted_mean: f64,
    pub ar_mean: f64,
    pub ar_std: f64,
    pub utilization_mean: f64,
    pub utilization_std: f64,
    pub mean_time_us_mean: f64,
    pub mean_time_us_std: f64,
    pub p99_time_us_mean: f64,
}

impl AggregateRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.mode,
            self.algo,
            self.sdf,
            self.k,
            self.lat_lo,
            self.lat_hi,
            self.n_requests,
            self.runs,
            self.accepted_mean,
            self.ar_mean,
            self.ar_std,
            self.utilization_mean,
            self.utilization_std,
            self.mean_time_us_mean,
            self.mean_time_us_std,
            self.p99_time_us_mean
        )
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by everything except run id and seed, in first-seen order.
pub fn aggregate(rows: &[RunRow]) -> Vec<AggregateRow> {
    type Key = (Mode, String, usize, usize, u64, u64, usize);
    let mut order: Vec<Key> = Vec::new();
    let mut groups: BTreeMap<Key, Vec<&RunRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.mode, r.algo.clone(), r.sdf, r.k, r.lat_lo.to_bits(), r.lat_hi.to_bits(), r.n_requests);
        groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        }).push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let col = |f: fn(&RunRow) -> f64| g.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (accepted_mean, _) = mean_std(&col(|r| r.accepted as f64));
            let (ar_mean, ar_std) = mean_std(&col(|r| r.acceptance_ratio));
            let (utilization_mean, utilization_std) = mean_std(&col(|r| r.utilization));
            let (mean_time_us_mean, mean_time_us_std) = mean_std(&col(|r| r.mean_time_us));
            let (p99_time_us_mean, _) = mean_std(&col(|r| r.p99_time_us));
            let first = g[0];
            AggregateRow {
                mode: first.mode,
                algo: first.algo.clone(),
                sdf: first.sdf,
                k: first.k,
                lat_lo: first.lat_lo,
                lat_hi: first.lat_hi,
                n_requests: first.n_requests,
                runs: g.len(),
                accepted_mean,
                ar_mean,
                ar_std,
                utilization_mean,
                utilization_std,
                mean_time_us_mean,
                mean_time_us_std,
                p99_time_us_mean,
            }
        })
        .collect()
}

fn output_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Output {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), ExperimentError> {
    let f = File::create(path).map_err(output_err(path))?;
    let mut w = BufWriter::new(f);
    w.write_all(content.as_bytes()).map_err(output_err(path))?;
    w.flush().map_err(output_err(path))
}

pub fn results_csv(rows: &[RunRow]) -> String {
    let mut s = format!("{RESULTS_HEADER}\n");
    for r in rows {
        s.push_str(&r.csv());
        s.push('\n');
    }
    s
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut s = format!("{AGGREGATE_HEADER}\n");
    for r in rows {
        s.push_str(&r.csv());
        s.push('\n');
    }
    s
}

/// Plain-text table over the plotted axes: AR, utilization and time per
/// request for each configuration.
pub fn summary_text(rows: &[AggregateRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<8} {:<8} {:>4} {:>4} {:>11} {:>6} {:>17} {:>17} {:>12}",
        "mode", "algo", "sdf", "k", "latency_ms", "runs", "AR (mean±std)", "util (mean±std)", "time_us"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<8} {:<8} {:>4} {:>4} {:>11} {:>6} {:>17} {:>17} {:>12.1}",
            r.mode.as_str(),
            r.algo,
            r.sdf,
            r.k,
            format!("{}-{}", r.lat_lo, r.lat_hi),
            r.runs,
            format!("{:.4}±{:.4}", r.ar_mean, r.ar_std),
            format!("{:.4}±{:.4}", r.utilization_mean, r.utilization_std),
            r.mean_time_us_mean
        );
    }
    s
}

/// Writes results.csv, aggregate.csv and summary.txt into `dir`.
pub fn emit_report(rows: &[RunRow], dir: &Path) -> Result<Vec<AggregateRow>, ExperimentError> {
    fs::create_dir_all(dir).map_err(output_err(dir))?;
    let agg = aggregate(rows);
    write_file(&dir.join("results.csv"), &results_csv(rows))?;
    write_file(&dir.join("aggregate.csv"), &aggregate_csv(&agg))?;
    write_file(&dir.join("summary.txt"), &summary_text(&agg))?;
    Ok(agg)
}

/// splitmix64 finalizer, used to derive independent per-run seeds.
pub fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5eed, |acc, &p| mix(acc ^ mix(p)))
}

/// Latency-annotated graph, scaled to each SDF, with its request catalog.
pub struct Scenario {
    pub sdf: usize,
    pub graph: Multigraph,
    pub catalog: crate::latency::EndpointCatalog,
}

fn load_dataset(input: &InputSource) -> Result<SyntheticDataset, ExperimentError> {
    match input {
        InputSource::Synthetic { seed } => Ok(generate_synthetic(&SyntheticConfig::euro_ix_like(*seed))?),
        InputSource::Files {
            membership,
            locations,
            prefixes,
        } => {
            let open = |p: &PathBuf| {
                File::open(p).map_err(|e| ExperimentError::Input {
                    path: p.clone(),
                    source: IngestError::Io(e),
                })
            };
            let wrap = |p: &PathBuf| {
                let p = p.clone();
                move |source| ExperimentError::Input { path: p, source }
            };
            Ok(SyntheticDataset {
                membership: parse_membership(open(membership)?).map_err(wrap(membership))?.value,
                locations: parse_locations(open(locations)?).map_err(wrap(locations))?.value,
                prefix_counts: parse_prefix_counts(open(prefixes)?).map_err(wrap(prefixes))?.value,
            })
        }
    }
}

pub fn build_scenarios(
    data: &SyntheticDataset,
    sdfs: &[usize],
    params: &LatencyModelParams,
    seed: u64,
) -> Result<Vec<Scenario>, ExperimentError> {
    let base = build_ixp_multigraph(&data.membership, &data.locations, &data.prefix_counts)?;
    let base = annotate_latencies(&base, params, derive_seed(&[seed, 0x1a7]))?;
    let order = greedy_coverage_order(&data.membership, &data.prefix_counts, None).order();
    let mut seen = HashSet::new();
    sdfs.iter()
        .filter(|s| seen.insert(**s))
        .map(|&sdf| {
            let graph = scale_down(&base, &order, sdf)?;
            let catalog = derive_catalog(&graph, &data.membership, &data.prefix_counts);
            Ok(Scenario { sdf, graph, catalog })
        })
        .collect()
}

struct Job {
    mode: Mode,
    algo: Option<SamplerKind>,
    sdf: usize,
    k: usize,
    range: usize,
    run: usize,
}

fn run_to_metrics(
    job: &Job,
    g: &Multigraph,
    reqs: &[Request],
    engine_seed: u64,
    cfg: &ExperimentConfig,
) -> RunMetrics {
    let budget = SolverBudget {
        max_nodes: cfg.solver_nodes,
        ..SolverBudget::default()
    };
    match job.mode {
        Mode::Online => run_online(g, reqs, &EngineConfig::new(job.algo.expect("sampler").sampler(), job.k, engine_seed)),
        Mode::Hybrid => run_hybrid(
            g,
            reqs,
            &EngineConfig::new(job.algo.expect("sampler").sampler(), job.k, engine_seed),
            &HybridConfig { k: job.k, budget },
        ),
        Mode::Offline => {
            let start = Instant::now();
            let sol = solve_optflow(g, reqs, &HashSet::new(), &budget).expect("generated requests are well formed");
            let per = start.elapsed().as_secs_f64() * 1e6 / reqs.len().max(1) as f64;
            let mut used = g.clone();
            for (r, p) in reqs.iter().zip(&sol.paths) {
                if let Some(p) = p {
                    let e = used.edge_indices(&p.edge_ids).expect("solver paths use graph edges");
                    used.reserve(&e, r.min_bandwidth).expect("solver respects capacities");
                }
            }
            let n = reqs.len();
            RunMetrics {
                accepted: sol.objective,
                rejected: n - sol.objective,
                acceptance_ratio: if n == 0 { 1.0 } else { sol.objective as f64 / n as f64 },
                empty_stream: n == 0,
                utilization: utilization(&used).unwrap_or(0.0),
                times_us: vec![per; n],
            }
        }
    }
}

/// Runs the full cross-product and writes the report into `cfg.out_dir`.
/// Offline runs solve the whole stream exactly, so they ignore sampler and
/// path count and appear once per SDF and latency range as `optflow`, k 0.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRow>, ExperimentError> {
    cfg.validate()?;
    let data = load_dataset(&cfg.input)?;
    let params = LatencyModelParams::default();
    let scenarios = build_scenarios(&data, &cfg.sdfs, &params, cfg.seed)?;
    let scenario = |sdf: usize| scenarios.iter().find(|s| s.sdf == sdf).expect("built for every sdf");

    // One request stream per (sdf, range, run), shared by every mode and
    // sampler so comparisons are paired.
    let mut stream_keys = Vec::new();
    for &sdf in &cfg.sdfs {
        for range in 0..cfg.lat_ranges.len() {
            for run in 0..cfg.n_runs {
                stream_keys.push((sdf, range, run));
            }
        }
    }
    stream_keys.sort_unstable();
    stream_keys.dedup();
    let streams: BTreeMap<(usize, usize, usize), (u64, Vec<Request>)> = stream_keys
        .par_iter()
        .map(|&(sdf, range, run)| {
            let (lo, hi) = cfg.lat_ranges[range];
            let seed = derive_seed(&[cfg.seed, sdf as u64, lo.to_bits(), hi.to_bits(), run as u64]);
            let s = scenario(sdf);
            let rp = RequestParams::unitary(cfg.n_requests, lo, hi, seed);
            generate_requests(&s.graph, &s.catalog, &params, &rp).map(|r| ((sdf, range, run), (seed, r)))
        })
        .collect::<Result<_, _>>()?;

    let mut jobs = Vec::new();
    for &mode in &cfg.modes {
        let algos: Vec<Option<SamplerKind>> = match mode {
            Mode::Offline => vec![None],
            _ => cfg.algos.iter().copied().map(Some).collect(),
        };
        for &algo in &algos {
            for &sdf in &cfg.sdfs {
                let ks = if mode == Mode::Offline { vec![0] } else { cfg.ks.clone() };
                for &k in &ks {
                    for range in 0..cfg.lat_ranges.len() {
                        for run in 0..cfg.n_runs {
                            jobs.push(Job {
                                mode,
                                algo,
                                sdf,
                                k,
                                range,
                                run,
                            });
                        }
                    }
                }
            }
        }
    }
    info!("running {} jobs", jobs.len());
    let rows: Vec<RunRow> = jobs
        .par_iter()
        .enumerate()
        .map(|(run_id, job)| {
            let (seed, reqs) = &streams[&(job.sdf, job.range, job.run)];
            let algo_tag = job.algo.map_or(0, |a| a as u64 + 1);
            let engine_seed = derive_seed(&[*seed, algo_tag, job.k as u64]);
            let m = run_to_metrics(job, &scenario(job.sdf).graph, reqs, engine_seed, cfg);
            let (lat_lo, lat_hi) = cfg.lat_ranges[job.range];
            let (mean_t, p99_t) = if cfg.timing {
                (m.mean_time_us(), m.p99_time_us())
            } else {
                (0.0, 0.0)
            };
            RunRow {
                run_id,
                mode: job.mode,
                algo: job.algo.map_or("optflow".to_string(), |a| a.as_str().to_string()),
                sdf: job.sdf,
                k: job.k,
                lat_lo,
                lat_hi,
                n_requests: reqs.len(),
                accepted: m.accepted,
                acceptance_ratio: m.acceptance_ratio,
                utilization: m.utilization,
                mean_time_us: mean_t,
                p99_time_us: p99_t,
                seed: *seed,
            }
        })
        .collect();
    emit_report(&rows, &cfg.out_dir)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: usize, ar: f64) -> RunRow {
        RunRow {
            run_id: id,
            mode: Mode::Online,
            algo: "gw".into(),
            sdf: 8,
            k: 20,
            lat_lo: 100.0,
            lat_hi: 150.0,
            n_requests: 10,
            accepted: (ar * 10.0).round() as usize,
            acceptance_ratio: ar,
            utilization: ar / 2.0,
            mean_time_us: 1.0,
            p99_time_us: 2.0,
            seed: id as u64,
        }
    }

    #[test]
    fn kv_config_and_overrides() {
        let text = "# sweep\nmode = online, hybrid\nalgo=pd,GW\nsdf=16,32\nk=5\nlat_range=100:150, 250:300\nrequests=50\nruns=3\nseed=9\ntiming=false\n";
        let mut c = ExperimentConfig::parse_kv(text).unwrap();
        assert_eq!(c.modes, vec![Mode::Online, Mode::Hybrid]);
        assert_eq!(c.algos, vec![SamplerKind::Pd, SamplerKind::Gw]);
        assert_eq!(c.sdfs, vec![16, 32]);
        assert_eq!(c.lat_ranges, vec![(100.0, 150.0), (250.0, 300.0)]);
        assert_eq!((c.n_requests, c.n_runs, c.seed, c.timing), (50, 3, 9, false));
        c.set("lat-range", "150:200").unwrap();
        assert_eq!(c.lat_ranges, vec![(150.0, 200.0)]);
        c.set("membership", "m.csv").unwrap();
        assert!(c.validate().is_err());
        c.set("locations", "l.csv").unwrap();
        c.set("prefixes", "p.csv").unwrap();
        c.validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(matches!(ExperimentConfig::parse_kv("nonsense"), Err(ExperimentError::Config { line: 1, .. })));
        assert!(ExperimentConfig::parse_kv("colour=red").is_err());
        assert!(ExperimentConfig::parse_kv("lat_range=300:100").is_err());
        let mut c = ExperimentConfig::default();
        c.n_runs = 0;
        assert!(c.validate().is_err());
        c = ExperimentConfig::default();
        c.set("k", "").unwrap();
        assert!(matches!(c.validate(), Err(ExperimentError::EmptyList("k"))));
    }

    #[test]
    fn aggregate_matches_recomputation() {
        let rows: Vec<RunRow> = (0..100).map(|i| row(i, (i % 7) as f64 / 7.0)).collect();
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 1);
        let ars: Vec<f64> = rows.iter().map(|r| r.acceptance_ratio).collect();
        let mean = ars.iter().sum::<f64>() / 100.0;
        let var = ars.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / 99.0;
        assert!((agg[0].ar_mean - mean).abs() < 1e-12);
        assert!((agg[0].ar_std - var.sqrt()).abs() < 1e-12);
        assert_eq!(agg[0].runs, 100);
    }

    #[test]
    fn single_row_and_empty_reports() {
        assert_eq!(results_csv(&[]), format!("{RESULTS_HEADER}\n"));
        assert_eq!(aggregate_csv(&aggregate(&[])), format!("{AGGREGATE_HEADER}\n"));
        let r = row(0, 0.5);
        let agg = aggregate(std::slice::from_ref(&r));
        assert_eq!((agg[0].ar_mean, agg[0].ar_std, agg[0].accepted_mean), (0.5, 0.0, 5.0));
        assert_eq!(results_csv(std::slice::from_ref(&r)).lines().nth(1).unwrap(), "0,online,gw,8,20,100,150,10,5,0.5,0.25,1,2,0");
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = derive_seed(&[1, 8, 0]);
        assert_eq!(a, derive_seed(&[1, 8, 0]));
        assert_ne!(a, derive_seed(&[1, 8, 1]));
        assert_ne!(derive_seed(&[1, 2]), derive_seed(&[2, 1]));
    }
}
