//! Both phases together: phase-1 occupancy prediction, phase-2 power
//! prediction, threshold correction of the predicted bits, and scoring.

mod integrated;
mod metrics;
mod suite;

pub use integrated::{block_starts, run_blocks, run_integrated, run_with_true_power};
pub use metrics::{correct_co, evaluate, BitCounts, Metrics, PredictionReport};
pub use suite::{
    generate_datasets, graph_traces, occupancy_training_set, run_suite, run_suite_on,
    sliding_windows, SuiteConfig, SuiteOutcome,
};
