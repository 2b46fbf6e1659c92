//! Orchestration of the full outer/inner loop: initial sampling,
//! high-fidelity solves, surrogate fits, multi-objective rounds with infill,
//! BO and PDS rounds with validation, reparameterization, persistence and
//! reporting. Interrupted runs resume from the persisted state.

mod config;
mod report;
mod run;
mod state;

pub use config::{
    BoPhaseConfig, MooPhaseConfig, PdsPhaseConfig, PipelineConfig, ReparamConfig, SamplingConfig,
    StoppingConfig,
};
pub use report::{
    incumbent_summary, write_crossval, write_history_svg, write_reports, IncumbentSummary,
};
pub use run::{drive_phase, initial_sample, run, step, Cursor, PhaseFamily};
pub use state::{check_run_dir, init_run_dir, LedgerRow, RunManifest, RunState, StageSummary};
