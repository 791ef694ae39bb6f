//! Configuration, orchestration and persistence of experiment runs.

pub mod bisect;
pub mod config;
pub mod results;
pub mod run;

pub use bisect::{threshold_bisect, threshold_bisect_with, ThresholdBracket};
pub use config::{DeltaSpec, ExperimentConfig, Method, ModelKind, Overrides};
pub use results::{
    csv_string, read_csv, sort_rows, write_csv, write_series, Metric, ResultRow, CSV_HEADER,
};
pub use run::{run, Budget, Crossing, RunOutput, Summary};
