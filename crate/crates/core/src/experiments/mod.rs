//! Experiment configuration, algorithm presets, metrics and output files.

mod config;
mod emit;
mod metrics;
mod sweep;

pub use config::{
    Ablation, Algo, DomainConfig, DpSettings, ExperimentConfig, ObjectiveConfig, OutputConfig,
};
pub use emit::{
    emit, write_curve_csv, write_trace_csv, Emitted, SeedSummary, Stat, Summary, TRACE_HEADER,
};
pub use metrics::{
    mean_clip_fraction, mean_stderr, regret_curve, regrets_at, CurvePoint, RegretKind,
};
pub use sweep::{sweep, write_sweep_csv, SweepGrid, SweepPoint, SweepRow, SWEEP_HEADER};

use crate::protocol::{self, Problem, RunTrace};
use crate::Result;

/// A finished experiment: its configuration and one trace per seed.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub traces: Vec<RunTrace>,
}

impl ExperimentResult {
    pub fn summary(&self) -> Summary {
        Summary::from_result(self)
    }
}

/// Validates, builds the problem and runs every seed.
pub fn run_experiment(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ExperimentResult> {
    config.validate()?;
    let problem = config.build_problem()?;
    run_with_problem(config, &problem, threads)
}

/// Runs every seed on an already built problem.
pub fn run_with_problem(
    config: &ExperimentConfig,
    problem: &Problem,
    threads: Option<usize>,
) -> Result<ExperimentResult> {
    let traces = protocol::run(&config.protocol(), problem, &config.seeds, threads)?;
    Ok(ExperimentResult {
        config: config.clone(),
        traces,
    })
}
