use std::path::Path;

use rand::Rng;

use super::period::{
    calculate_period, shift_indices, PeriodEstimate, DEFAULT_HIGH_WEIGHT_THRESHOLD,
};
use crate::nn::{
    attention_head, attention_head_backward, checkpoint, sigmoid, AttentionParams, Matrix,
    Trainable,
};
use crate::{Error, Result};

const CHECKPOINT_TAG: f64 = 1.0;

/// Phase-1 predictor: single-head causal self-attention over occupancy
/// vectors. The attention weights expose the common hopping period, and the
/// value rows of the last observed period are replayed through the output
/// projection to predict the next `horizon` vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyModel {
    /// One head; every projection is `|U| × |U|`.
    pub params: AttentionParams,
    pub high_weight_threshold: f64,
    pub input_len: usize,
    pub horizon: usize,
}

/// One training/testing window.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancySample {
    /// `ℓ × |U|` observed occupancy.
    pub x: Matrix,
    /// `T × |U|` occupancy that followed.
    pub y: Matrix,
    /// Hopping period the window was generated with.
    pub period: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyPrediction {
    pub bits: Vec<Vec<bool>>,
    pub estimate: PeriodEstimate,
    pub weights: Matrix,
}

/// Thresholds every entry at 0.5: strictly above becomes 1, the rest 0.
pub fn bin_output(m: &Matrix) -> Matrix {
    m.map(|v| if v > 0.5 { 1.0 } else { 0.0 })
}

pub fn to_bits(m: &Matrix) -> Vec<Vec<bool>> {
    (0..m.rows())
        .map(|r| m.row(r).iter().map(|&v| v > 0.5).collect())
        .collect()
}

/// Numerically stable mean binary cross-entropy of `sigmoid(logits)`
/// against 0/1 targets, with its gradient at the logits.
pub(crate) fn bce_with_logits(logits: &Matrix, targets: &Matrix) -> (f64, Matrix) {
    let n = logits.data().len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    for ((&z, &y), g) in logits
        .data()
        .iter()
        .zip(targets.data())
        .zip(grad.data_mut())
    {
        loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        *g = (sigmoid(z) - y) / n;
    }
    (loss / n, grad)
}

impl OccupancyModel {
    pub fn new<R: Rng + ?Sized>(
        channels: usize,
        input_len: usize,
        horizon: usize,
        rng: &mut R,
    ) -> Self {
        OccupancyModel {
            params: AttentionParams::random(1, channels, channels, channels, rng),
            high_weight_threshold: DEFAULT_HIGH_WEIGHT_THRESHOLD,
            input_len,
            horizon,
        }
    }

    pub fn channels(&self) -> usize {
        self.params.d_model()
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.channels() || x.rows() < 2 {
            return Err(Error::Shape {
                op: "occupancy input",
                left: x.shape(),
                right: (self.input_len, self.channels()),
            });
        }
        Ok(())
    }

    pub fn attention(&self, x: &Matrix) -> Result<crate::nn::HeadForward> {
        self.check_input(x)?;
        crate::nn::masked_attention(x, &self.params, 0)
    }

    /// Predicts the `horizon` occupancy vectors that follow `x`.
    pub fn predict(&self, x: &Matrix) -> Result<OccupancyPrediction> {
        let fwd = self.attention(x)?;
        let estimate = calculate_period(&fwd.weights, self.high_weight_threshold)?;
        let idx = shift_indices(x.rows(), estimate.period, self.horizon);
        let shifted = fwd.v.gather_rows(&idx);
        let probs = shifted.dot(&self.params.w_o).map(sigmoid);
        Ok(OccupancyPrediction {
            bits: to_bits(&bin_output(&probs)),
            estimate,
            weights: fwd.weights,
        })
    }

    pub fn predict_bits(&self, x: &[Vec<bool>]) -> Result<OccupancyPrediction> {
        self.predict(&Matrix::from_bits(x))
    }

    /// Training loss on one sample and gradients for `[w_q, w_k, w_v, w_o]`.
    ///
    /// The main term is the per-bit cross-entropy of the shifted-value
    /// prediction, which only reaches `w_v` and `w_o`. With
    /// `align_weight > 0` an alignment term `-ln(mass)` per row, where `mass`
    /// is the attention on columns at multiples of the true period (lag 0
    /// included), trains `w_q` and `w_k`.
    pub fn loss_and_grads(&self, s: &OccupancySample, align_weight: f64) -> (f64, Vec<Matrix>) {
        let p = &self.params;
        let (wq, wk, wv, wo) = (&p.w_q[0], &p.w_k[0], &p.w_v[0], &p.w_o);
        let ell = s.x.rows();
        let fwd = attention_head(&s.x, wq, wk, wv, true);
        let idx = shift_indices(ell, s.period.min(ell), s.y.rows());
        let shifted = fwd.v.gather_rows(&idx);
        let logits = shifted.dot(wo);
        let (mut loss, d_logits) = bce_with_logits(&logits, &s.y);

        let d_wo = shifted.dot_tn(&d_logits);
        let d_shifted = d_logits.dot_nt(wo);
        let mut d_v = Matrix::zeros(ell, wv.cols());
        for (i, &r) in idx.iter().enumerate() {
            for (a, b) in d_v.row_mut(r).iter_mut().zip(d_shifted.row(i)) {
                *a += b;
            }
        }
        let d_wv = s.x.dot_tn(&d_v);

        let (d_wq, d_wk) = if align_weight > 0.0 {
            let mut d_weights = Matrix::zeros(ell, ell);
            let mut align = 0.0;
            for r in 0..ell {
                let cols: Vec<usize> = (0..=r).rev().step_by(s.period).collect();
                let mass: f64 = cols
                    .iter()
                    .map(|&c| fwd.weights[(r, c)])
                    .sum::<f64>()
                    .max(1e-300);
                align -= mass.ln();
                for &c in &cols {
                    d_weights[(r, c)] = -align_weight / (ell as f64 * mass);
                }
            }
            loss += align_weight * align / ell as f64;
            let zero = Matrix::zeros(ell, wv.cols());
            let g = attention_head_backward(&s.x, wq, wk, wv, &fwd, &zero, Some(&d_weights));
            (g.d_wq, g.d_wk)
        } else {
            (
                Matrix::zeros(wq.rows(), wq.cols()),
                Matrix::zeros(wk.rows(), wk.cols()),
            )
        };
        (loss, vec![d_wq, d_wk, d_wv, d_wo])
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        self.params.matrices_mut()
    }

    pub fn to_matrices(&self) -> Vec<Matrix> {
        let hyper = Matrix::from_rows(&[[
            CHECKPOINT_TAG,
            self.input_len as f64,
            self.horizon as f64,
            self.high_weight_threshold,
        ]]);
        std::iter::once(hyper)
            .chain(self.params.matrices().into_iter().cloned())
            .collect()
    }

    pub fn from_matrices(mut mats: Vec<Matrix>) -> Result<Self> {
        if mats.len() != 5 || mats[0].shape() != (1, 4) || mats[0][(0, 0)] != CHECKPOINT_TAG {
            return Err(Error::Checkpoint(
                "not an occupancy model checkpoint".into(),
            ));
        }
        let hyper = mats.remove(0);
        let w_o = mats.pop().unwrap();
        let w_v = mats.pop().unwrap();
        let w_k = mats.pop().unwrap();
        let w_q = mats.pop().unwrap();
        let params = AttentionParams {
            w_q: vec![w_q],
            w_k: vec![w_k],
            w_v: vec![w_v],
            w_o,
        };
        params.validate()?;
        if params.d_model() != params.d_head() || params.d_out() != params.d_model() {
            return Err(Error::Checkpoint(
                "occupancy projections must be square".into(),
            ));
        }
        Ok(OccupancyModel {
            params,
            input_len: hyper[(0, 1)] as usize,
            horizon: hyper[(0, 2)] as usize,
            high_weight_threshold: hyper[(0, 3)],
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mats = self.to_matrices();
        checkpoint::save(path, &mats.iter().collect::<Vec<_>>())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_matrices(checkpoint::load(path)?)
    }
}

/// Binds a model to its training objective.
pub struct OccupancyObjective<'a> {
    pub model: &'a mut OccupancyModel,
    pub align_weight: f64,
}

impl Trainable for OccupancyObjective<'_> {
    type Sample = OccupancySample;

    fn loss_and_grads(&self, s: &OccupancySample) -> (f64, Vec<Matrix>) {
        self.model.loss_and_grads(s, self.align_weight)
    }

    fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        self.model.parameters_mut()
    }
}
