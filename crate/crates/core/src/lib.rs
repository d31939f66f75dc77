//! Channel-hopping network simulation and two-phase attention-based
//! prediction of channel occupancy.
//!
//! * [`netsim`] builds random unit-disk networks with routed flows, moves the
//!   nodes, and records what an observer node sees on every channel.
//! * [`nn`] is a small dense-matrix kernel with masked attention, hand-written
//!   gradients and an Adam optimizer.
//! * [`occupancy`] finds the common hopping period from attention weights and
//!   continues the observed occupancy pattern (phase 1).
//! * [`power`] predicts the next received power level of a tracked
//!   transmitter with multi-head attention (phase 2).
//! * [`pipeline`] combines both phases, corrects stale occupancy bits, and
//!   scores the result.

pub mod error;
pub mod netsim;
pub mod nn;
pub mod occupancy;
pub mod pipeline;
pub mod power;

pub use error::{Error, Result};
