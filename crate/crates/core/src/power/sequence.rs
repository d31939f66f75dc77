use std::fmt;

use crate::netsim::{ObservationTrace, NOISE_FLOOR_DBM};
use crate::occupancy::PeriodEstimate;
use crate::{Error, Result};

/// Stride-spaced received power values on one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSequence {
    /// Oldest first, dBm.
    pub values: Vec<f64>,
    /// Slots between consecutive values.
    pub stride: usize,
    pub channel: usize,
    /// Absolute slot of the last value.
    pub anchor_slot: u64,
}

impl PowerSequence {
    /// Absolute slot the next value belongs to.
    pub fn target_slot(&self) -> u64 {
        self.anchor_slot + self.stride as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Inside,
    Outside,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Inside => "inside",
            Region::Outside => "outside",
        })
    }
}

/// Inside the interference region iff `pred >= theta`.
pub fn classify_region(pred: f64, theta: f64) -> Region {
    if pred >= theta {
        Region::Inside
    } else {
        Region::Outside
    }
}

/// Every value sits at the noise floor: no transmitter was sensed.
pub fn is_silent(values: &[f64]) -> bool {
    values.iter().all(|&v| v <= NOISE_FLOOR_DBM)
}

/// The `window` values on `channel` spaced `stride` apart and ending at row
/// `end` of the trace.
pub fn sequence_at(
    trace: &ObservationTrace,
    channel: usize,
    end: usize,
    stride: usize,
    window: usize,
) -> Result<PowerSequence> {
    let needed = (window - 1) * stride + 1;
    if stride == 0 || window == 0 || end >= trace.len() || end + 1 < needed {
        return Err(Error::InsufficientHistory {
            needed,
            available: (end + 1).min(trace.len()),
        });
    }
    let first = end + 1 - needed;
    Ok(PowerSequence {
        values: (0..window)
            .map(|k| trace.rp[first + k * stride][channel])
            .collect(),
        stride,
        channel,
        anchor_slot: trace.start_slot + end as u64,
    })
}

/// One sequence per channel, spaced `stride` apart and ending at row `end`,
/// skipping channels that stay at the noise floor throughout.
pub fn sequences_ending_at(
    trace: &ObservationTrace,
    end: usize,
    stride: usize,
    window: usize,
) -> Result<Vec<PowerSequence>> {
    let mut out = Vec::new();
    for ch in 0..trace.channels {
        let seq = sequence_at(trace, ch, end, stride, window)?;
        if !is_silent(&seq.values) {
            out.push(seq);
        }
    }
    Ok(out)
}

/// Stride-`est.period` sequences ending at the trace's last slot. Values of
/// one sequence share a congruence class modulo the period and therefore
/// come from the same transmitter.
pub fn extract_sequences(
    trace: &ObservationTrace,
    est: &PeriodEstimate,
    window: usize,
) -> Result<Vec<PowerSequence>> {
    let needed = window * est.period;
    if trace.len() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            available: trace.len(),
        });
    }
    sequences_ending_at(trace, trace.len() - 1, est.period, window)
}
