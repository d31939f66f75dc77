use std::path::Path;

use rand::Rng;

use super::model::{bce_with_logits, bin_output, to_bits};
use crate::nn::{
    attention_head, attention_head_backward, checkpoint, sigmoid, AttentionParams, Matrix,
    Trainable,
};
use crate::{Error, Result};

const CHECKPOINT_TAG: f64 = 3.0;

/// Ablation comparator: the same causal attention layer with the period
/// read-out and row shift removed. The last `horizon` context rows go
/// straight through the output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardAttention {
    pub params: AttentionParams,
    pub horizon: usize,
}

impl StandardAttention {
    pub fn new<R: Rng + ?Sized>(channels: usize, horizon: usize, rng: &mut R) -> Self {
        StandardAttention {
            params: AttentionParams::random(1, channels, channels, channels, rng),
            horizon,
        }
    }

    fn logits(&self, x: &Matrix) -> Result<(crate::nn::HeadForward, Vec<usize>, Matrix)> {
        let p = &self.params;
        if x.cols() != p.d_model() || x.rows() < self.horizon {
            return Err(Error::Shape {
                op: "standard attention input",
                left: x.shape(),
                right: (self.horizon, p.d_model()),
            });
        }
        let fwd = attention_head(x, &p.w_q[0], &p.w_k[0], &p.w_v[0], true);
        let rows: Vec<usize> = (x.rows() - self.horizon..x.rows()).collect();
        let logits = fwd.context.gather_rows(&rows).dot(&p.w_o);
        Ok((fwd, rows, logits))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<Vec<bool>>> {
        let (_, _, logits) = self.logits(x)?;
        Ok(to_bits(&bin_output(&logits.map(sigmoid))))
    }

    pub fn channels(&self) -> usize {
        self.params.d_model()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let hyper = Matrix::from_rows(&[[CHECKPOINT_TAG, self.horizon as f64]]);
        let mut mats = vec![&hyper];
        mats.extend(self.params.matrices());
        checkpoint::save(path, &mats)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut mats = checkpoint::load(path)?;
        if mats.len() != 5 || mats[0].shape() != (1, 2) || mats[0][(0, 0)] != CHECKPOINT_TAG {
            return Err(Error::Checkpoint(
                "not a standard attention checkpoint".into(),
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
        Ok(StandardAttention {
            params,
            horizon: hyper[(0, 1)] as usize,
        })
    }
}

impl Trainable for StandardAttention {
    type Sample = super::OccupancySample;

    fn loss_and_grads(&self, s: &Self::Sample) -> (f64, Vec<Matrix>) {
        let p = &self.params;
        let (fwd, rows, logits) = self.logits(&s.x).expect("sample shape matches model");
        let (loss, d_logits) = bce_with_logits(&logits, &s.y);
        let d_wo = fwd.context.gather_rows(&rows).dot_tn(&d_logits);
        let d_rows = d_logits.dot_nt(&p.w_o);
        let mut d_context = Matrix::zeros(s.x.rows(), p.d_head());
        for (i, &r) in rows.iter().enumerate() {
            d_context.row_mut(r).copy_from_slice(d_rows.row(i));
        }
        let g = attention_head_backward(
            &s.x, &p.w_q[0], &p.w_k[0], &p.w_v[0], &fwd, &d_context, None,
        );
        (loss, vec![g.d_wq, g.d_wk, g.d_wv, d_wo])
    }

    fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        self.params.matrices_mut()
    }
}
