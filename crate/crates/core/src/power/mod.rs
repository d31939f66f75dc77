//! Phase 2: received power prediction. Multi-head causal self-attention
//! over a scalar power sequence predicts the next value, which is compared
//! with the interference threshold.

mod dataset;
mod model;
mod sequence;
mod train;

pub use dataset::{
    link_samples, link_series, mobile_trace, series_samples, trace_samples, LinkSeries,
};
pub use model::{
    positional_encoding, LastRowHead, PowerForward, PowerModel, PowerSample, PowerScaling,
    DEFAULT_D_MODEL, DEFAULT_INCREMENT_SCALE, DEFAULT_POWER_CEILING, DEFAULT_POWER_FLOOR,
};
pub use sequence::{
    classify_region, extract_sequences, is_silent, sequence_at, sequences_ending_at, PowerSequence,
    Region,
};
pub use train::{region_accuracy, train_power_model, train_power_model_observed, PowerTraining};
