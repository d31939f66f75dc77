use super::metrics::{correct_co, evaluate, PredictionReport};
use crate::netsim::{ObservationTrace, NOISE_FLOOR_DBM};
use crate::occupancy::OccupancyModel;
use crate::power::{is_silent, sequence_at, PowerModel};
use crate::{Error, Result};

/// Row ranges of the prediction blocks that fit in a trace: block `k`
/// reads rows `k·T .. k·T + ℓ` and predicts the `T` rows after them.
pub fn block_starts(trace_len: usize, input_len: usize, horizon: usize) -> Vec<usize> {
    (0..)
        .map(|k| k * horizon)
        .take_while(|&a| a + input_len + horizon <= trace_len)
        .collect()
}

/// Runs phase 1 on every block of `trace` and corrects each predicted bit
/// with the power `power(row, channel, period)` returns for it, if any.
pub fn run_blocks<F>(
    trace: &ObservationTrace,
    m1: &OccupancyModel,
    mut power: F,
) -> Result<PredictionReport>
where
    F: FnMut(usize, usize, usize) -> Result<Option<f64>>,
{
    let (ell, horizon) = (m1.input_len, m1.horizon);
    let mut truth = Vec::new();
    let mut raw = Vec::new();
    let mut corrected = Vec::new();
    let mut unpredictable = 0;
    for a in block_starts(trace.len(), ell, horizon) {
        let pred = match m1.predict_bits(&trace.co[a..a + ell]) {
            Ok(p) => p,
            Err(Error::NoPeriod) => {
                unpredictable += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        for (i, row) in pred.bits.into_iter().enumerate() {
            let s = a + ell + i;
            let mut fixed = row.clone();
            for (ch, bit) in fixed.iter_mut().enumerate() {
                if let Some(p) = power(s, ch, pred.estimate.period)? {
                    *bit = correct_co(*bit, p, trace.theta);
                }
            }
            truth.push(trace.co[s].clone());
            raw.push(row);
            corrected.push(fixed);
        }
    }
    let mut report = evaluate(truth, raw, corrected)?;
    report.unpredictable_blocks = unpredictable;
    Ok(report)
}

/// Both phases over every block of `trace`.
///
/// The bit for slot `s` on channel `ch` is corrected with the phase-2
/// prediction from the `W` values of `ch` at `s - L̂, s - 2L̂, ...`, which the
/// observer has sensed by the time slot `s` arrives. A sequence silent
/// throughout has no transmitter to track and counts as a noise-floor
/// prediction.
pub fn run_integrated(
    trace: &ObservationTrace,
    m1: &OccupancyModel,
    m2: &PowerModel,
) -> Result<PredictionReport> {
    let window = m2.window();
    run_blocks(trace, m1, |s, ch, period| {
        if s < period * window {
            return Ok(None);
        }
        let seq = sequence_at(trace, ch, s - period, period, window)?;
        if is_silent(&seq.values) {
            return Ok(Some(NOISE_FLOOR_DBM));
        }
        m2.predict(&seq.values).map(Some)
    })
}

/// Phase 1 corrected with the true power of every slot instead of a
/// phase-2 prediction.
pub fn run_with_true_power(
    trace: &ObservationTrace,
    m1: &OccupancyModel,
) -> Result<PredictionReport> {
    run_blocks(trace, m1, |s, ch, _| Ok(Some(trace.rp[s][ch])))
}
