//! Run configuration, orchestration, artifacts and engine comparison.

mod compare;
mod config;
mod oracle;
mod output;
mod run;

pub use compare::{compare, time_adjusted_mse, write_comparison_csv, ComparisonRow};
pub use config::{Engine, ModelSource, Overrides, RunConfig, TuningSettings};
pub use oracle::elliptical_oracle;
pub use output::{write_outputs, DIAGNOSTICS_FILE, REPORT_FILE, SAMPLES_FILE, TIMING_FILE};
pub use run::{
    run, tune_only, AllocationReport, ChainDiagnostics, CoordinateEstimate, EngineMeta, GibbsMeta, HmcMeta, McMeta,
    RunOutput, Timing, TunedParams, VAR_TUNING_DELTA,
};
