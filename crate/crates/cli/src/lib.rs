//! Experiment orchestration for the relaysim simulator: config files,
//! presets, sweeps, parallel run dispatch and CSV output.

pub mod config;
pub mod error;
pub mod experiment;
pub mod figures;
pub mod sweep;

pub use error::{CliError, Result};
pub use experiment::{
    run_digests, run_experiment, write_csv, ExperimentPlan, ResultRow, CSV_HEADER,
};
pub use figures::{emit_figure_data, read_table, write_series, FigureId, SeriesPoint};
pub use sweep::{SweepSpec, SweepVar};
