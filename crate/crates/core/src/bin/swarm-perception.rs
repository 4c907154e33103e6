use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swarm_perception::runner::config::ConfigError;
use swarm_perception::runner::{analyze, run_sweep, Mode, SweepSpec};
use swarm_perception::sim_static::environment_rng;
use swarm_perception::Topology;

/// Overrides `base_seed` from the config file when set.
const SEED_ENV: &str = "SWARM_PERCEPTION_BASE_SEED";

#[derive(Parser)]
#[command(name = "swarm-perception", version, about = "Collective perception experiments with noisy robot sensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell and trial of a sweep.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        /// Overrides `mode` from the config.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Recompute summary tables from a sweep directory.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a config and print the number of runs it expands to.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Print a topology as an edge list.
    Graph {
        /// fully-connected, ring, line, scale-free or scale-free:<m>
        #[arg(long)]
        topology: Topology,
        #[arg(long)]
        nodes: usize,
        /// Trial seed; the graph matches the one a trial with this seed uses.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn load(config: &Path, mode: Option<Mode>) -> Result<SweepSpec, Failure> {
    let cfg_err = |e: ConfigError| Failure::Config(e.to_string());
    let mut spec = SweepSpec::read(config).map_err(cfg_err)?;
    if mode.is_some() {
        spec.mode = mode;
    }
    if let Ok(raw) = std::env::var(SEED_ENV) {
        spec.base_seed = raw
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("{SEED_ENV}=`{raw}` is not an unsigned 64-bit integer")))?;
    }
    spec.validate().map_err(cfg_err)?;
    Ok(spec)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            config,
            out,
            parallelism,
            mode,
        } => {
            let spec = load(&config, mode)?;
            let out = out
                .or_else(|| spec.output_dir.clone())
                .ok_or_else(|| Failure::Config("no output directory: pass --out or set output_dir".into()))?;
            let manifest = run_sweep(&spec, &out, parallelism).map_err(|e| Failure::Runtime(e.to_string()))?;
            println!(
                "{} runs ({} failed) written to {}",
                manifest.total_runs,
                manifest.failed_runs,
                out.display()
            );
            for entry in manifest.records.iter().filter(|e| e.error.is_some()) {
                eprintln!(
                    "cell {} trial {}: {}",
                    entry.cell,
                    entry.trial,
                    entry.error.as_deref().unwrap_or_default()
                );
            }
        }
        Command::Analyze { input, out } => {
            let summary = analyze(&input, &out).map_err(|e| Failure::Runtime(e.to_string()))?;
            println!("{} cells summarised into {}", summary.cells.len(), out.display());
        }
        Command::Validate { config, mode } => {
            let spec = load(&config, mode)?;
            let cells = spec.cells().map_err(|e| Failure::Config(e.to_string()))?;
            println!(
                "ok: {} cells x {} trials = {} runs",
                cells.len(),
                spec.trials_per_cell,
                cells.len() * spec.trials_per_cell
            );
        }
        Command::Graph { topology, nodes, seed } => {
            let graph = topology
                .build(nodes, &mut environment_rng(seed))
                .map_err(|e| Failure::Config(e.to_string()))?;
            print!("{}", graph.to_edge_list());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
