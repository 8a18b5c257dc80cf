//! Config-driven experiment sweeps and their CSV output.

mod config;
mod experiment;
mod summary;

pub use config::{reference_adversary, reference_pool, ExperimentConfig, FinalEpochSize};
pub use experiment::{
    candidate_range, default_threads, format_sig9, read_csv, rows_to_csv, run_experiment, write_csv,
    PartialResults, ResultRow, CSV_HEADER, LEARNER_STREAM, THREADS_ENV,
};
pub use summary::{mean, sample_std, summarize, write_summary, SummaryRow};
