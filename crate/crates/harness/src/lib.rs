//! Experiment orchestration on top of `ssgl`: simulation grids, the network
//! regression runner, metrics, result files and numerical self-checks.

pub mod config;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod oracle;
pub mod output;
pub mod svg;
pub mod uci;

pub use config::{apply_override, canonical_json, with_overrides, ExperimentConfig, PriorHyper, SimKind, StartValues};
pub use error::{HarnessError, Result};
pub use experiment::{run_cell, run_experiment, CellKey, CellOutput, ExperimentResult};
pub use metrics::{mae, mse, posterior_mean, selection_report, SelectionReport, SplitMetrics};
pub use oracle::{OracleOutcome, OracleSuite};
pub use uci::{run_uci, UciConfig, UciResult};

/// Path of the bundled 100-row synthetic regression CSV.
pub fn bundled_csv() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("synthetic_regression.csv")
}
