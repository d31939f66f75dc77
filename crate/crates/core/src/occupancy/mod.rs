//! Phase 1: channel occupancy prediction. A single causal attention layer
//! over occupancy vectors exposes the common hopping period, and the value
//! rows of the last observed period are replayed to predict what follows.

mod baseline;
mod dataset;
mod model;
mod period;
mod train;

pub use baseline::StandardAttention;
pub use dataset::{
    bit_accuracy, brute_force_period, permute_channels, static_sample, static_samples,
    static_trace, window_sample,
};
pub use model::{
    bin_output, to_bits, OccupancyModel, OccupancyObjective, OccupancyPrediction, OccupancySample,
};
pub use period::{
    calculate_period, shift_indices, PeriodEstimate, DEFAULT_HIGH_WEIGHT_THRESHOLD,
    RELATIVE_HIGH_WEIGHT,
};
pub use train::{
    score_occupancy, score_standard, train_occupancy_model, train_standard_attention,
    OccupancyScore, OccupancyTraining,
};
