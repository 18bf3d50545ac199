//! CLI-facing layer: configuration, task environments, the deterministic
//! run loop, and plot-data projection.

pub mod config;
pub mod plot;
pub mod runner;
pub mod task;

pub use config::{ConfigError, EpisodicParams, LearningParams, RunConfig, TaskSpec, Thresholds};
pub use plot::{emit_plotdata, PlotError, PlotSeries};
pub use runner::{
    ensembles_to_text, exit_code_for, metrics_to_text, replay_dir, run_to_dir, EnsembleRecord,
    MetricsRecord, RunError, RunResult, Simulation, WindowOutcome, ENSEMBLES_FILE, METRICS_FILE,
    SNAPSHOT_FILE, STORE_FILE,
};
pub use task::{ActionValues, TaskState, WindowPlan};
