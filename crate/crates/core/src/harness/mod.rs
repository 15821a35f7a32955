//! Experiment runner: exact per-episode regret, invariant diagnostics,
//! multi-run sweeps and regret-scaling analysis.

pub mod analysis;
pub mod config;
pub mod diagnostics;
pub mod regret;
pub mod run;
pub mod scaling;
pub mod sweep;

pub use analysis::{analyze, Analysis};
pub use config::{ExperimentConfig, Overrides};
pub use diagnostics::{
    decomposition_residual, optimism_monitor, DecompositionReport, DiagnosticsConfig,
    OptimismCount, OptimismReport, VisitRecord, DECOMPOSITION_TOLERANCE, OPTIMISM_TOLERANCE,
};
pub use regret::{
    CsvRegretWriter, EpisodeRegret, RegretRecord, RegretSink, RunMeta, RUN_CSV_HEADER,
};
pub use run::{run_single, run_with_agent, RunOptions, RunReport, StartRule, REGRET_TOLERANCE};
pub use scaling::{
    aggregate, aggregate_curves, fit_scaling, GroupAggregate, GroupSummary, RegretCurves,
    ScalingFit,
};
pub use sweep::{describe, run_sweep, RunOutcome, SweepReport};
