//! Training loop, cross-validation, ablations, sweeps, significance testing
//! and report files.

mod config;
mod cv;
mod report;
mod stats;
mod train;

pub use config::{Precision, RunConfig, KEYS};
pub use cv::{ablate, cross_validate, cross_validate_many, sweep, CvReport, CvRun, CvSettings, GridKind};
pub use report::{
    curve_csv, emit_reports, emit_train, read_summary, results_table, summary_json, sweep_csv, CSV_HEADER,
};
pub use stats::{mean, rank_sum_test, sample_std, EXACT_LIMIT};
pub use train::{accuracy, init_seed, minibatches, mix_seed, train_fold, AlphaStats, EpochRecord, TrainReport};
