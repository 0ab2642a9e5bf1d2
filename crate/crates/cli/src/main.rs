use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use pathstitch::analysis::{analyze_snapshot, policy_csv, policy_diversity_table};
use pathstitch::experiment::{aggregate, run_experiment, summary_text, ExperimentConfig};
use pathstitch::ingest::{
    build_ixp_multigraph, generate_as_relationships, generate_synthetic, parse_as_relationships, parse_locations,
    parse_membership, parse_prefix_counts, rank_asns, AsRelGraph, Parsed, SyntheticConfig, SyntheticDataset,
};
use pathstitch::io::{
    read_graph, read_requests, write_as_relationships, write_graph, write_locations, write_membership,
    write_prefix_counts,
};
use pathstitch::latency::{annotate_latencies, derive_catalog, write_endpoint_catalog, LatencyModelParams};
use pathstitch::solver::{solve_optflow, SolverBudget};

#[derive(Parser)]
#[command(name = "pathstitch", version, about = "QoS path stitching over IXP pathlet multigraphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the IXP multigraph from snapshot files or a synthetic dataset.
    Ingest(IngestArgs),
    /// Topology statistics per scale-down factor.
    Analyze(AnalyzeArgs),
    /// Policy-constrained AS path diversity.
    PolicyDiv(PolicyArgs),
    /// Run an online / hybrid / offline sweep.
    Simulate(SimulateArgs),
    /// Solve a graph + request instance exactly.
    SolveOffline(SolveArgs),
}

#[derive(Args, Clone)]
struct SnapshotArgs {
    /// `ixp_id,asn` rows.
    #[arg(long)]
    membership: Option<PathBuf>,
    /// `ixp_id,name,lat_deg,lon_deg` rows.
    #[arg(long)]
    locations: Option<PathBuf>,
    /// `asn,ipv4_address_count` rows.
    #[arg(long)]
    prefixes: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    snapshot: SnapshotArgs,
    /// `as1|as2|rel` rows.
    #[arg(long)]
    relationships: Option<PathBuf>,
    /// Generate a Euro-IX-sized synthetic dataset instead of reading files.
    #[arg(long)]
    synthetic: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    snapshot: SnapshotArgs,
    /// Enables the one-hop coverage column.
    #[arg(long)]
    relationships: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8, 16, 32])]
    sdf: Vec<usize>,
    /// Ordered pairs used for the diversity distribution per SDF.
    #[arg(long, default_value_t = 2000)]
    diversity_pairs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PolicyArgs {
    #[arg(long)]
    relationships: PathBuf,
    #[arg(long)]
    membership: PathBuf,
    #[arg(long)]
    prefixes: PathBuf,
    #[arg(long, default_value_t = 200)]
    pairs: usize,
    /// Fractions of candidate IXP peerings to add as p2p links.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, 1.0])]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Flat key=value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    sdf: Option<String>,
    #[arg(long)]
    k: Option<String>,
    /// `lo:hi`, repeatable or comma-separated.
    #[arg(long = "lat-range")]
    lat_range: Vec<String>,
    #[arg(long)]
    requests: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    snapshot: SnapshotArgs,
    #[arg(long)]
    synthetic_seed: Option<u64>,
    /// Write 0 in the time columns so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    nodes: PathBuf,
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    requests: PathBuf,
    #[arg(long, default_value_t = SolverBudget::default().max_nodes)]
    max_nodes: u64,
    #[arg(long, default_value_t = SolverBudget::default().max_paths_per_request)]
    max_paths: usize,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

fn open(p: &Path) -> Result<File> {
    File::open(p).with_context(|| format!("cannot read {}", p.display()))
}

fn report<T>(p: &Path, parsed: Parsed<T>) -> T {
    for w in &parsed.warnings {
        warn!("{}:{}: {}", p.display(), w.line, w.reason);
    }
    parsed.value
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().with_context(|| format!("--{flag} is required"))
}

fn load_snapshot(s: &SnapshotArgs) -> Result<SyntheticDataset> {
    let m = required(&s.membership, "membership")?;
    let p = required(&s.prefixes, "prefixes")?;
    let membership = report(m, parse_membership(open(m)?).with_context(|| m.display().to_string())?);
    let prefix_counts = report(p, parse_prefix_counts(open(p)?).with_context(|| p.display().to_string())?);
    let locations = match &s.locations {
        Some(l) => report(l, parse_locations(open(l)?).with_context(|| l.display().to_string())?),
        None => Vec::new(),
    };
    Ok(SyntheticDataset {
        membership,
        locations,
        prefix_counts,
    })
}

fn load_relationships(p: &Path) -> Result<AsRelGraph> {
    Ok(report(p, parse_as_relationships(open(p)?).with_context(|| p.display().to_string())?))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let p = dir.join(name);
    Ok(BufWriter::new(File::create(&p).with_context(|| format!("cannot write {}", p.display()))?))
}

fn ingest(a: IngestArgs) -> Result<()> {
    let (data, rel) = if a.synthetic {
        let data = generate_synthetic(&SyntheticConfig::euro_ix_like(a.seed))?;
        let rel = generate_as_relationships(&rank_asns(&data.membership, &data.prefix_counts), a.seed);
        (data, Some(rel))
    } else {
        let rel = a.relationships.as_deref().map(load_relationships).transpose()?;
        (load_snapshot(&a.snapshot)?, rel)
    };
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    write_membership(&data.membership, create(&a.out, "membership.csv")?)?;
    write_locations(&data.locations, create(&a.out, "ixp_locations.csv")?)?;
    write_prefix_counts(&data.prefix_counts, create(&a.out, "prefix_counts.csv")?)?;
    if let Some(rel) = &rel {
        write_as_relationships(rel, create(&a.out, "as_rel.txt")?)?;
    }
    let g = build_ixp_multigraph(&data.membership, &data.locations, &data.prefix_counts)?;
    let g = if g.nodes().iter().all(|n| n.location.is_some()) {
        annotate_latencies(&g, &LatencyModelParams::default(), a.seed)?
    } else {
        warn!("some IXPs have no location; pathlet latencies left at 0");
        g
    };
    write_graph(&g, create(&a.out, "nodes.csv")?, create(&a.out, "edges.csv")?)?;
    let catalog = derive_catalog(&g, &data.membership, &data.prefix_counts);
    write_endpoint_catalog(&catalog, create(&a.out, "endpoint_catalog.csv")?)?;
    println!("{} IXPs, {} pathlets, {} endpoints -> {}", g.node_count(), g.edge_count(), catalog.len(), a.out.display());
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let data = load_snapshot(&a.snapshot)?;
    let rel = a.relationships.as_deref().map(load_relationships).transpose()?;
    let r = analyze_snapshot(
        &data.membership,
        &data.locations,
        &data.prefix_counts,
        rel.as_ref(),
        &a.sdf,
        a.diversity_pairs,
        a.seed,
    )?;
    r.write(&a.out)?;
    print!("{}", r.summary_csv());
    Ok(())
}

fn policy_div(a: PolicyArgs) -> Result<()> {
    let rel = load_relationships(&a.relationships)?;
    let m = report(&a.membership, parse_membership(open(&a.membership)?)?);
    let p = report(&a.prefixes, parse_prefix_counts(open(&a.prefixes)?)?);
    let (_, rows) = policy_diversity_table(&rel, &m, &p, &a.fractions, a.pairs, a.seed)?;
    let csv = policy_csv(&rows);
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&a.out, &csv).with_context(|| format!("cannot write {}", a.out.display()))?;
    print!("{csv}");
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            ExperimentConfig::parse_kv(&text).with_context(|| p.display().to_string())?
        }
        None => ExperimentConfig::default(),
    };
    let flags = [("mode", &a.mode), ("algo", &a.algo), ("sdf", &a.sdf), ("k", &a.k)];
    for (key, v) in flags {
        if let Some(v) = v {
            cfg.set(key, v)?;
        }
    }
    if !a.lat_range.is_empty() {
        cfg.set("lat_range", &a.lat_range.join(","))?;
    }
    if let Some(v) = a.requests {
        cfg.n_requests = v;
    }
    if let Some(v) = a.runs {
        cfg.n_runs = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.out {
        cfg.out_dir = v;
    }
    if let Some(v) = a.synthetic_seed {
        cfg.set("synthetic_seed", &v.to_string())?;
    }
    for (key, v) in [
        ("membership", &a.snapshot.membership),
        ("locations", &a.snapshot.locations),
        ("prefixes", &a.snapshot.prefixes),
    ] {
        if let Some(p) = v {
            cfg.set(key, &p.to_string_lossy())?;
        }
    }
    if a.no_timing {
        cfg.timing = false;
    }
    let rows = run_experiment(&cfg)?;
    info!("{} runs written to {}", rows.len(), cfg.out_dir.display());
    print!("{}", summary_text(&aggregate(&rows)));
    Ok(())
}

fn solve_offline(a: SolveArgs) -> Result<()> {
    let g = report(&a.edges, read_graph(open(&a.nodes)?, open(&a.edges)?)?);
    let reqs = report(&a.requests, read_requests(open(&a.requests)?)?);
    let mut ids = HashSet::new();
    if let Some(r) = reqs.iter().find(|r| !ids.insert(r.id)) {
        bail!("duplicate request id {}", r.id);
    }
    let budget = SolverBudget {
        max_nodes: a.max_nodes,
        max_paths_per_request: a.max_paths,
    };
    let sol = solve_optflow(&g, &reqs, &HashSet::new(), &budget)?;
    let mut out = BufWriter::new(File::create(&a.out).with_context(|| format!("cannot write {}", a.out.display()))?);
    writeln!(out, "request_id,accepted,edge_id_sequence")?;
    for (r, p) in reqs.iter().zip(&sol.paths) {
        let seq = p
            .as_ref()
            .map(|p| p.edge_ids.iter().map(u32::to_string).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        writeln!(out, "{},{},{}", r.id, u8::from(p.is_some()), seq)?;
    }
    out.flush()?;
    println!(
        "accepted {}/{} ({:?}, {} nodes)",
        sol.objective,
        reqs.len(),
        sol.status,
        sol.nodes_explored
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Ingest(a) => ingest(a),
        Command::Analyze(a) => analyze(a),
        Command::PolicyDiv(a) => policy_div(a),
        Command::Simulate(a) => simulate(a),
        Command::SolveOffline(a) => solve_offline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
