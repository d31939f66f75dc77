use rand::seq::SliceRandom;
use rand::Rng;

use super::model::OccupancySample;
use crate::netsim::{generate_network, observe, simulate, Mobility, ObservationTrace, SimConfig};
use crate::nn::Matrix;
use crate::{Error, Result};

/// Latest absolute slot a random window may start at.
const MAX_START_SLOT: u64 = 10_000;

/// Static trace of `slots` slots: a fresh random network whose hopping
/// sequences all have length `period`, seen by a random active node from a
/// random start slot.
pub fn static_trace<R: Rng + ?Sized>(
    base: &SimConfig,
    period: usize,
    slots: usize,
    rng: &mut R,
) -> Result<ObservationTrace> {
    let cfg = SimConfig {
        period,
        ..base.clone()
    };
    cfg.validate()?;
    let mut net = generate_network(&cfg, rng)?;
    let observer = *net
        .active_ids()
        .choose(rng)
        .ok_or_else(|| Error::InvalidConfig("network has no active node".into()))?;
    let start = rng.gen_range(0..MAX_START_SLOT);
    let hist = simulate(&mut net, Mobility::Static, &cfg, start, slots, rng);
    Ok(observe(&hist, observer, &cfg))
}

/// Splits a trace into the first `input_len` rows and the rest.
pub fn window_sample(
    trace: &ObservationTrace,
    input_len: usize,
    period: usize,
) -> Result<OccupancySample> {
    if input_len == 0 || input_len >= trace.len() {
        return Err(Error::InsufficientHistory {
            needed: input_len + 1,
            available: trace.len(),
        });
    }
    Ok(OccupancySample {
        x: Matrix::from_bits(&trace.co[..input_len]),
        y: Matrix::from_bits(&trace.co[input_len..]),
        period,
    })
}

/// One static window from [`static_trace`].
pub fn static_sample<R: Rng + ?Sized>(
    base: &SimConfig,
    period: usize,
    input_len: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<OccupancySample> {
    let trace = static_trace(base, period, input_len + horizon, rng)?;
    window_sample(&trace, input_len, period)
}

/// `count` static windows with the periods taking equal shares in turn.
pub fn static_samples<R: Rng + ?Sized>(
    base: &SimConfig,
    periods: &[usize],
    count: usize,
    input_len: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<OccupancySample>> {
    if periods.is_empty() {
        return Err(Error::InvalidConfig("no periods given".into()));
    }
    (0..count)
        .map(|i| static_sample(base, periods[i % periods.len()], input_len, horizon, rng))
        .collect()
}

/// `copies` relabelings of every sample, each with its own uniformly random
/// permutation of the channel columns. Hopping sequences draw channels
/// uniformly, so a relabeled window is as likely as the original.
pub fn permute_channels<R: Rng + ?Sized>(
    samples: &[OccupancySample],
    copies: usize,
    rng: &mut R,
) -> Vec<OccupancySample> {
    let mut out = Vec::with_capacity(samples.len() * copies);
    for s in samples {
        for _ in 0..copies {
            let mut perm: Vec<usize> = (0..s.x.cols()).collect();
            perm.shuffle(rng);
            let relabel = |m: &Matrix| {
                let mut r = Matrix::zeros(m.rows(), m.cols());
                for i in 0..m.rows() {
                    for (c, &p) in perm.iter().enumerate() {
                        r[(i, p)] = m[(i, c)];
                    }
                }
                r
            };
            out.push(OccupancySample {
                x: relabel(&s.x),
                y: relabel(&s.y),
                period: s.period,
            });
        }
    }
    out
}

/// Smallest `p` in `1..=rows/2` with `row[t] == row[t + p]` for every valid
/// `t`, or `None` when the rows never repeat that way.
pub fn brute_force_period<T: PartialEq>(rows: &[T]) -> Option<usize> {
    (1..=rows.len() / 2).find(|&p| (0..rows.len() - p).all(|t| rows[t] == rows[t + p]))
}

/// Fraction of equal entries between two same-shape 0/1 matrices.
pub fn bit_accuracy(pred: &[Vec<bool>], truth: &Matrix) -> f64 {
    let mut hits = 0usize;
    for (r, row) in pred.iter().enumerate() {
        for (c, &b) in row.iter().enumerate() {
            hits += usize::from(b == (truth[(r, c)] > 0.5));
        }
    }
    hits as f64 / truth.data().len().max(1) as f64
}
