//! Sweep plans, the runners for each study, and the CSV tables they
//! produce: `records.csv` (one row per network), `summary.csv` (one row
//! per cell) and `hist.csv` (loss/accuracy histograms).

pub mod hist;
pub mod manifest;
pub mod plan;
pub mod records;
pub mod runner;

pub use hist::{bin_loss_accuracy, BinSpec, HistRow, LossMetric};
pub use manifest::RunManifest;
pub use plan::{parse_pair, Algorithm, Cell, CellKey, Study, SweepConfig, SweepPlan};
pub use records::{read_records, summarize, FitRecord, SummaryRow, SCHEMA_VERSION};
pub use runner::{
    load_pool, mean_test_accuracy, run_depth_sweep, run_epoch_trajectory, run_prior_sweep, run_sgd_from_gnc,
    run_sweep, run_width_sweep, SweepOutput,
};
