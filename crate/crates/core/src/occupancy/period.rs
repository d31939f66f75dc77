use crate::nn::Matrix;
use crate::{Error, Result};

/// Earlier columns within this fraction of a row's largest earlier weight
/// count as high weights of that row.
pub const RELATIVE_HIGH_WEIGHT: f64 = 0.5;

pub const DEFAULT_HIGH_WEIGHT_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodEstimate {
    pub period: usize,
    /// `ℓ mod period`.
    pub offset: usize,
    /// Fraction of the rows that could vote for `period` that did.
    pub confidence: f64,
}

/// Reads the common period off a causal attention-weight matrix.
///
/// For every row `r >= 1` the high weights are the strictly earlier columns
/// within [`RELATIVE_HIGH_WEIGHT`] of the row's largest earlier weight. A row
/// abstains when its high weights hold less than `threshold` of the row's
/// mass (it mostly attends to itself, i.e. it has no earlier match). Each
/// remaining row votes for every lag `r - c` to one of its high columns.
/// Lag `p` can collect at most `ℓ - p` votes; the period is the smallest lag
/// with the highest vote ratio, searched over `1..=ℓ/2`.
pub fn calculate_period(weights: &Matrix, threshold: f64) -> Result<PeriodEstimate> {
    let ell = weights.rows();
    if weights.cols() != ell {
        return Err(Error::Shape {
            op: "calculate_period",
            left: weights.shape(),
            right: (ell, ell),
        });
    }
    let max_lag = ell / 2;
    let mut votes = vec![0usize; max_lag + 1];
    let mut any = false;
    for r in 1..ell {
        let earlier = &weights.row(r)[..r];
        let top = earlier.iter().copied().fold(0.0, f64::max);
        if top <= 0.0 {
            continue;
        }
        let cut = RELATIVE_HIGH_WEIGHT * top;
        let mass: f64 = earlier.iter().filter(|&&w| w >= cut).sum();
        if mass < threshold {
            continue;
        }
        for (c, &w) in earlier.iter().enumerate() {
            let lag = r - c;
            if w >= cut && lag <= max_lag {
                votes[lag] += 1;
                any = true;
            }
        }
    }
    if !any {
        return Err(Error::NoPeriod);
    }
    let mut best: Option<(usize, f64)> = None;
    for (lag, &v) in votes.iter().enumerate().skip(1) {
        let ratio = v as f64 / (ell - lag) as f64;
        if ratio > 0.0 && best.is_none_or(|(_, b)| ratio > b + 1e-12) {
            best = Some((lag, ratio));
        }
    }
    let (period, confidence) = best.ok_or(Error::NoPeriod)?;
    Ok(PeriodEstimate {
        period,
        offset: ell % period,
        confidence,
    })
}

/// Row indices of the value matrix that continue a period-`period` pattern
/// for `horizon` steps past an `ell`-row window: output row `i` takes the
/// row of the last observed period congruent to `ell + i`.
pub fn shift_indices(ell: usize, period: usize, horizon: usize) -> Vec<usize> {
    assert!(
        period >= 1 && period <= ell,
        "period {period} outside 1..={ell}"
    );
    (0..horizon).map(|i| ell - period + i % period).collect()
}
