//! burstnet command line: run experiments, replay them bit-exactly, inspect
//! the episodic store, run replay consolidation, and project plot data.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use burstnet_core::harness::{
    emit_plotdata, exit_code_for, replay_dir, run_to_dir, PlotSeries, RunConfig, RunError,
    Simulation, STORE_FILE,
};

#[derive(Parser)]
#[command(name = "burstnet", version, about = "burst/tonic spiking-network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a configured run and write metrics, logs, and a snapshot.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-execute a run directory and verify the metrics are identical.
    Replay { run_dir: PathBuf },
    /// Print the episodic store dump of a run directory.
    Inspect {
        #[arg(long)]
        store: PathBuf,
    },
    /// Prime the store by running the configured task, then consolidate it
    /// through offline replay and print the report.
    Rem {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        cycles: u32,
    },
    /// Write a columnar plot file from a run directory.
    Plot {
        run_dir: PathBuf,
        #[arg(long)]
        which: String,
    },
}

fn init_logging() {
    let level = std::env::var("BURSTNET_LOG_LEVEL").unwrap_or_else(|_| "error".into());
    env_logger::Builder::new().parse_filters(&level).init();
}

fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let result = run_to_dir(&cfg, &out)?;
            println!(
                "run complete: {} windows, {} ensembles logged, store holds {} items",
                result.metrics.len(),
                result.ensembles.len(),
                result.store.item_count()
            );
            println!("wrote {}", out.display());
        }
        Command::Replay { run_dir } => {
            let metrics = replay_dir(&run_dir)?;
            println!("replay identical over {} windows", metrics.len());
        }
        Command::Inspect { store } => {
            let path = store.join(STORE_FILE);
            if !path.exists() {
                return Err(RunError::SnapshotMissing(store));
            }
            print!("{}", std::fs::read_to_string(path).map_err(RunError::Io)?);
        }
        Command::Rem { config, cycles } => {
            let cfg = RunConfig::load(&config)?;
            let mut sim = Simulation::from_config(cfg.clone())?;
            for _ in 0..cfg.windows {
                sim.step()?;
            }
            let report = sim.replay_consolidate(cycles)?;
            println!(
                "{}, {}, {}, {}",
                report.pattern_key,
                report.synapses_changed,
                report.bursting_before,
                report.bursting_after
            );
        }
        Command::Plot { run_dir, which } => {
            let series = PlotSeries::parse(&which).map_err(|e| {
                RunError::Config(burstnet_core::harness::ConfigError::Invalid(e.to_string()))
            })?;
            let path = emit_plotdata(&run_dir, series).map_err(|e| match e {
                burstnet_core::harness::PlotError::Io(io) => RunError::Io(io),
                other => {
                    RunError::Config(burstnet_core::harness::ConfigError::Invalid(other.to_string()))
                }
            })?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err) as u8)
        }
    }
}
