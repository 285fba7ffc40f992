//! Command-line front end: single runs, five-protocol comparisons, and
//! plot-ready aggregates. Configuration precedence is built-in defaults,
//! then WSNSIM_SEED, then the --config file, then explicit flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use wsnsim::engine::{mean_sd, run_simulation, EngineError, MetricsSeries, ScenarioConfig};
use wsnsim::keying::share_probability;
use wsnsim::protocols::ProtocolKind;

mod config;
use config::{apply_config_file, effective_config, parse_protocol};

#[derive(Debug)]
pub(crate) enum CliError {
    /// Bad flag or configuration value; exits with status 2 and names the key.
    Config { key: String, reason: String },
    /// Everything else; exits with status 1.
    Internal(String),
}

impl From<EngineError> for CliError {
    fn from(err: EngineError) -> Self {
        // validation failures all trace back to a configuration key the
        // user can fix; anything left is an engine bug
        let key = match &err {
            EngineError::Config { key, .. } => key,
            EngineError::Election(wsnsim::election::ElectionError::InvalidP(_)) => "p",
            EngineError::Election(wsnsim::election::ElectionError::InvalidTMin(_)) => "t_min",
            EngineError::Radio(wsnsim::radio::RadioError::InvalidParam { name, .. }) => name,
            EngineError::Model(wsnsim::model::ModelError::InvalidParam { name, .. }) => name,
            EngineError::Keying(wsnsim::keying::KeyingError::RingLargerThanPool { .. }) => {
                "ring_size"
            }
            EngineError::Keying(wsnsim::keying::KeyingError::EmptyPool) => "pool_size",
            _ => return CliError::Internal(err.to_string()),
        };
        let reason = match &err {
            EngineError::Config { reason, .. } => reason.clone(),
            other => other.to_string(),
        };
        CliError::Config { key: (*key).into(), reason }
    }
}

fn internal(err: impl std::fmt::Display) -> CliError {
    CliError::Internal(err.to_string())
}

#[derive(Parser)]
#[command(name = "wsnsim", version, about = "Round-based simulator for clustered sensor-network routing protocols")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and emit its per-round CSV
    Run(RunArgs),
    /// Run every protocol over several network sizes and summarize
    Compare(CompareArgs),
    /// Emit plot-ready per-figure aggregate CSV files
    Plotdata(PlotdataArgs),
}

#[derive(Args)]
struct RunArgs {
    /// leach | tcca | sec-leach | mod-leach | mod-sec-leach
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Flat `key = value` scenario file applied over the defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the CSV here instead of stdout, plus a .config sidecar
    /// recording the effective configuration
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Network sizes to run, comma separated
    #[arg(long, value_delimiter = ',', default_value = "100,1000")]
    sizes: Vec<usize>,
    /// Also run the 10000-node size
    #[arg(long)]
    big: bool,
    /// Seeds averaged per cell, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    seeds: Vec<u64>,
    #[arg(long)]
    rounds: Option<u32>,
    /// Flat `key = value` scenario file applied over the defaults
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    /// Directory for per-size long-form CSV plus summary.csv
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct PlotdataArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    /// Directory receiving energy.csv, overload.csv, and dead.csv
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Compare(args) => cmd_compare(args),
        Cmd::Plotdata(args) => cmd_plotdata(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config { key, reason }) => {
            eprintln!("error: config key `{key}`: {reason}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Defaults, then the WSNSIM_SEED fallback, then the config file, then flags.
fn build_scenario(args: &RunArgs) -> Result<ScenarioConfig, CliError> {
    let mut cfg = ScenarioConfig::default();
    if let Ok(value) = std::env::var("WSNSIM_SEED") {
        cfg.seed = value.parse().map_err(|_| CliError::Config {
            key: "WSNSIM_SEED".into(),
            reason: format!("cannot parse {value:?} as a seed"),
        })?;
    }
    if let Some(path) = &args.config {
        apply_config_file(&mut cfg, path)?;
    }
    if let Some(name) = &args.protocol {
        cfg.protocol = parse_protocol(name)?;
    }
    if let Some(nodes) = args.nodes {
        cfg.nodes = nodes;
    }
    if let Some(rounds) = args.rounds {
        cfg.rounds = rounds;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Advisory stderr notes: rounded epochs and the implied key-miss odds.
fn print_notes(cfg: &ScenarioConfig, keyed: bool) {
    if let Ok(params) = cfg.election_params() {
        if params.epoch_was_rounded() {
            eprintln!(
                "warning: 1/p = {:.6} is not a whole number of rounds; epoch length rounded to {}",
                1.0 / cfg.p,
                params.epoch_len
            );
        }
    }
    if keyed {
        let miss = 1.0 - share_probability(cfg.pool_size, cfg.ring_size);
        eprintln!(
            "note: key pool {} with ring {}: a node pair shares no key with probability {:.4}",
            cfg.pool_size, cfg.ring_size, miss
        );
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let cfg = build_scenario(&args)?;
    print_notes(&cfg, cfg.protocol.keyed());
    let series = run_simulation(&cfg)?;
    let rendered = wsnsim::csv::render_runs(&[&series]);
    match &args.out {
        Some(path) => {
            fs::write(path, &rendered).map_err(internal)?;
            let sidecar = PathBuf::from(format!("{}.config", path.display()));
            fs::write(&sidecar, effective_config(&cfg)).map_err(internal)?;
        }
        None => print!("{rendered}"),
    }
    Ok(())
}

fn sweep_sizes(sweep: &SweepArgs) -> Vec<usize> {
    let mut sizes = sweep.sizes.clone();
    if sweep.big {
        sizes.push(10_000);
    }
    sizes.sort_unstable();
    sizes.dedup();
    sizes
}

/// Runs every protocol over the requested sizes and seeds. Deployments are
/// shared per (size, seed) pair automatically: positions depend only on the
/// seed, never on the protocol. Returns runs sorted by (size, protocol,
/// seed) no matter how the parallel sweep scheduled them.
fn gather_runs(sweep: &SweepArgs) -> Result<(Vec<usize>, Vec<MetricsSeries>), CliError> {
    let mut base = ScenarioConfig::default();
    if let Some(path) = &sweep.config {
        apply_config_file(&mut base, path)?;
    }
    if let Some(rounds) = sweep.rounds {
        base.rounds = rounds;
    }
    if sweep.seeds.is_empty() {
        return Err(CliError::Config { key: "seeds".into(), reason: "needs at least one seed".into() });
    }
    let sizes = sweep_sizes(sweep);
    if sizes.is_empty() {
        return Err(CliError::Config { key: "sizes".into(), reason: "needs at least one size".into() });
    }
    let mut cells = Vec::new();
    for &nodes in &sizes {
        for protocol in ProtocolKind::ALL {
            for &seed in &sweep.seeds {
                let cfg = ScenarioConfig { protocol, nodes, seed, ..base.clone() };
                cfg.validate()?;
                cells.push(cfg);
            }
        }
    }
    print_notes(&base, true);
    let mut runs = cells
        .par_iter()
        .map(|cfg| run_simulation(cfg).map_err(CliError::from))
        .collect::<Result<Vec<_>, _>>()?;
    runs.sort_by(|a, b| {
        (a.nodes, a.protocol.name(), a.seed).cmp(&(b.nodes, b.protocol.name(), b.seed))
    });
    Ok((sizes, runs))
}

/// Final cumulative quantities per (size, protocol) cell, averaged over seeds.
struct Summary {
    nodes: usize,
    protocol: ProtocolKind,
    seeds: usize,
    energy: (f64, f64),
    overload: (f64, f64),
    dead: (f64, f64),
}

fn summarize(sizes: &[usize], runs: &[MetricsSeries]) -> Vec<Summary> {
    let mut rows = Vec::new();
    for &nodes in sizes {
        for protocol in ProtocolKind::ALL {
            let cell: Vec<&MetricsSeries> =
                runs.iter().filter(|r| r.nodes == nodes && r.protocol == protocol).collect();
            let stat = |f: &dyn Fn(&MetricsSeries) -> f64| {
                mean_sd(&cell.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            rows.push(Summary {
                nodes,
                protocol,
                seeds: cell.len(),
                energy: stat(&|r| r.total_energy_nj()),
                overload: stat(&|r| r.total_overload_bits() as f64),
                dead: stat(&|r| r.dead_final() as f64),
            });
        }
    }
    rows
}

const SUMMARY_HEADER: &str = "protocol,nodes,seeds,energy_total_nj_mean,energy_total_nj_sd,\
overload_bits_mean,overload_bits_sd,dead_final_mean,dead_final_sd";

fn render_summary(rows: &[Summary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.protocol,
            row.nodes,
            row.seeds,
            row.energy.0,
            row.energy.1,
            row.overload.0,
            row.overload.1,
            row.dead.0,
            row.dead.1,
        ));
    }
    out
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(internal)
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let (sizes, runs) = gather_runs(&args.sweep)?;
    let summary = render_summary(&summarize(&sizes, &runs));
    print!("{summary}");
    if let Some(dir) = &args.out_dir {
        ensure_dir(dir)?;
        for &nodes in &sizes {
            let slice: Vec<&MetricsSeries> = runs.iter().filter(|r| r.nodes == nodes).collect();
            let rendered = wsnsim::csv::render_runs(&slice);
            fs::write(dir.join(format!("runs_{nodes}.csv")), rendered).map_err(internal)?;
        }
        fs::write(dir.join("summary.csv"), summary).map_err(internal)?;
    }
    Ok(())
}

/// One size-by-protocol matrix of a summary quantity.
fn render_matrix(rows: &[Summary], pick: impl Fn(&Summary) -> f64) -> String {
    let mut out = String::from("nodes");
    for protocol in ProtocolKind::ALL {
        out.push(',');
        out.push_str(protocol.name());
    }
    out.push('\n');
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.nodes).collect();
    sizes.dedup();
    for nodes in sizes {
        out.push_str(&nodes.to_string());
        for protocol in ProtocolKind::ALL {
            let row = rows
                .iter()
                .find(|r| r.nodes == nodes && r.protocol == protocol)
                .expect("summarize covers every cell");
            out.push_str(&format!(",{}", pick(row)));
        }
        out.push('\n');
    }
    out
}

fn cmd_plotdata(args: PlotdataArgs) -> Result<(), CliError> {
    let (sizes, runs) = gather_runs(&args.sweep)?;
    let rows = summarize(&sizes, &runs);
    ensure_dir(&args.out)?;
    fs::write(args.out.join("energy.csv"), render_matrix(&rows, |r| r.energy.0))
        .map_err(internal)?;
    fs::write(args.out.join("overload.csv"), render_matrix(&rows, |r| r.overload.0))
        .map_err(internal)?;
    fs::write(args.out.join("dead.csv"), render_matrix(&rows, |r| r.dead.0)).map_err(internal)?;
    Ok(())
}
