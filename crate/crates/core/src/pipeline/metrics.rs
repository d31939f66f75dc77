use crate::netsim::Mobility;
use crate::{Error, Result};

/// Applies a phase-2 power prediction to one predicted occupancy bit: a
/// predicted occupant below `theta` has left, a predicted free channel with
/// power at or above `theta` has been entered.
pub fn correct_co(co_pred: bool, rp_pred: f64, theta: f64) -> bool {
    match (co_pred, rp_pred >= theta) {
        (true, false) => false,
        (false, true) => true,
        _ => co_pred,
    }
}

/// Bit tallies behind every reported fraction. Tallies from several
/// reports add up, which gives the bit-weighted aggregate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BitCounts {
    pub total: usize,
    /// Raw prediction equals the truth.
    pub correct_raw: usize,
    /// Raw prediction 1, truth 0.
    pub false_pos: usize,
    /// Raw prediction 0, truth 1.
    pub false_neg: usize,
    /// False positives the correction fixed.
    pub fp_fixed: usize,
    /// False negatives the correction fixed.
    pub fn_fixed: usize,
    /// Correct raw bits the correction broke.
    pub broken: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl BitCounts {
    pub fn tally(truth: &[Vec<bool>], raw: &[Vec<bool>], corrected: &[Vec<bool>]) -> Result<Self> {
        let shape = |m: &[Vec<bool>]| (m.len(), m.first().map_or(0, Vec::len));
        for (m, op) in [(raw, "raw prediction"), (corrected, "corrected prediction")] {
            if shape(m) != shape(truth) || m.iter().zip(truth).any(|(a, b)| a.len() != b.len()) {
                return Err(Error::Shape {
                    op,
                    left: shape(m),
                    right: shape(truth),
                });
            }
        }
        let mut c = BitCounts::default();
        for ((t, r), k) in truth.iter().zip(raw).zip(corrected) {
            for ((&t, &r), &k) in t.iter().zip(r).zip(k) {
                c.total += 1;
                match (r == t, r) {
                    (true, _) => {
                        c.correct_raw += 1;
                        c.broken += usize::from(k != t);
                    }
                    (false, true) => {
                        c.false_pos += 1;
                        c.fp_fixed += usize::from(k == t);
                    }
                    (false, false) => {
                        c.false_neg += 1;
                        c.fn_fixed += usize::from(k == t);
                    }
                }
            }
        }
        Ok(c)
    }

    pub fn add(&mut self, other: &BitCounts) {
        self.total += other.total;
        self.correct_raw += other.correct_raw;
        self.false_pos += other.false_pos;
        self.false_neg += other.false_neg;
        self.fp_fixed += other.fp_fixed;
        self.fn_fixed += other.fn_fixed;
        self.broken += other.broken;
    }

    pub fn correct_corrected(&self) -> usize {
        self.correct_raw - self.broken + self.fp_fixed + self.fn_fixed
    }

    pub fn metrics(&self) -> Metrics {
        let t = self.total.max(1) as f64;
        Metrics {
            accuracy_raw: self.correct_raw as f64 / t,
            fp_rate: self.false_pos as f64 / t,
            fn_rate: self.false_neg as f64 / t,
            accuracy_corrected: self.correct_corrected() as f64 / t,
            fp_correction: ratio(self.fp_fixed, self.false_pos),
            fn_correction: ratio(self.fn_fixed, self.false_neg),
            correction_error: ratio(self.broken, self.correct_raw),
        }
    }
}

/// Reported fractions. A correction ratio is `None` when its denominator is
/// zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy_raw: f64,
    pub fp_rate: f64,
    pub fn_rate: f64,
    pub accuracy_corrected: f64,
    pub fp_correction: Option<f64>,
    pub fn_correction: Option<f64>,
    pub correction_error: Option<f64>,
}

impl Metrics {
    /// Unweighted mean over several metric sets; ratios average over the
    /// sets where they are defined.
    pub fn mean(all: &[Metrics]) -> Option<Metrics> {
        if all.is_empty() {
            return None;
        }
        let n = all.len() as f64;
        let avg = |f: fn(&Metrics) -> f64| all.iter().map(f).sum::<f64>() / n;
        let avg_opt = |f: fn(&Metrics) -> Option<f64>| {
            let v: Vec<f64> = all.iter().filter_map(f).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        Some(Metrics {
            accuracy_raw: avg(|m| m.accuracy_raw),
            fp_rate: avg(|m| m.fp_rate),
            fn_rate: avg(|m| m.fn_rate),
            accuracy_corrected: avg(|m| m.accuracy_corrected),
            fp_correction: avg_opt(|m| m.fp_correction),
            fn_correction: avg_opt(|m| m.fn_correction),
            correction_error: avg_opt(|m| m.correction_error),
        })
    }
}

/// Predictions, ground truth and scores of one integrated run.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionReport {
    pub co_truth: Vec<Vec<bool>>,
    pub co_pred_raw: Vec<Vec<bool>>,
    pub co_pred_corrected: Vec<Vec<bool>>,
    pub counts: BitCounts,
    pub metrics: Metrics,
    pub mobility: Option<Mobility>,
    pub bounded: Option<bool>,
    /// Prediction blocks skipped because no period was found.
    pub unpredictable_blocks: usize,
}

/// Scores raw and corrected predictions against the truth.
pub fn evaluate(
    co_truth: Vec<Vec<bool>>,
    co_pred_raw: Vec<Vec<bool>>,
    co_pred_corrected: Vec<Vec<bool>>,
) -> Result<PredictionReport> {
    let counts = BitCounts::tally(&co_truth, &co_pred_raw, &co_pred_corrected)?;
    Ok(PredictionReport {
        co_truth,
        co_pred_raw,
        co_pred_corrected,
        metrics: counts.metrics(),
        counts,
        mobility: None,
        bounded: None,
        unpredictable_blocks: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correction_rule() {
        let theta = -60.0;
        assert!(!correct_co(true, theta - 5.0, theta));
        assert!(correct_co(false, theta + 5.0, theta));
        assert!(correct_co(true, theta, theta));
        assert!(!correct_co(false, theta - 0.1, theta));
    }

    #[test]
    fn perfect_prediction() {
        let truth = vec![vec![true, false], vec![false, false]];
        let r = evaluate(truth.clone(), truth.clone(), truth).unwrap();
        assert_eq!(r.metrics.accuracy_raw, 1.0);
        assert_eq!(r.metrics.fp_correction, None);
        assert_eq!(r.metrics.fn_correction, None);
        assert_eq!(r.metrics.correction_error, Some(0.0));
    }

    #[test]
    fn hand_counted_example() {
        // truth 1100, raw 1010 (one FN, one FP), corrected 0100.
        let truth = vec![vec![true, true, false, false]];
        let raw = vec![vec![true, false, true, false]];
        let corrected = vec![vec![false, true, false, false]];
        let r = evaluate(truth, raw, corrected).unwrap();
        let m = r.metrics;
        assert_eq!(m.accuracy_raw, 0.5);
        assert_eq!(m.fp_rate, 0.25);
        assert_eq!(m.fn_rate, 0.25);
        assert_eq!(m.fp_correction, Some(1.0));
        assert_eq!(m.fn_correction, Some(1.0));
        assert_eq!(m.correction_error, Some(0.5));
        assert_eq!(m.accuracy_corrected, 0.75);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let truth = vec![vec![true, true]];
        assert!(evaluate(truth.clone(), vec![vec![true]], truth).is_err());
    }
}
