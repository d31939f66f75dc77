//! Minimal dense numeric kernel: matrices, masked scaled dot-product
//! attention with hand-derived gradients, Adam, a minibatch trainer and a
//! checkpoint format.

mod adam;
mod attention;
pub mod checkpoint;
mod matrix;
mod trainer;

pub use adam::Adam;
pub use attention::{
    attention_head, attention_head_backward, masked_attention, AttentionParams, HeadForward,
    HeadGrads,
};
pub use matrix::{matmul, sigmoid, softmax_rows, Matrix};
pub use trainer::{
    finite_difference, fit, fit_observed, max_relative_error, TrainOptions, Trainable,
};
