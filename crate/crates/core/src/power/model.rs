use std::path::Path;

use rand::Rng;

use crate::nn::{attention_head, checkpoint, AttentionParams, HeadForward, Matrix, Trainable};
use crate::{Error, Result};

const CHECKPOINT_TAG: f64 = 2.0;

pub const DEFAULT_D_MODEL: usize = 16;

/// Inputs and targets are clipped from below to this level, dBm: one dB
/// under the weakest power sensed at the default sensing radius. The noise
/// floor would otherwise dominate the squared error whenever a transmitter
/// enters or leaves the sensing region.
pub const DEFAULT_POWER_FLOOR: f64 = -60.83;

/// Inputs and targets are clipped from above to this level, dBm. Only
/// levels near the interference threshold decide a classification, and
/// close passes would otherwise dominate the squared error.
pub const DEFAULT_POWER_CEILING: f64 = -50.0;

/// Default scale of the increment scaling, dB.
pub const DEFAULT_INCREMENT_SCALE: f64 = 5.0;

/// How raw dBm values are mapped to and from the network's working range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerScaling {
    /// `z = (v - mean) / std`, one pair for the whole corpus.
    Corpus { mean: f64, std: f64 },
    /// `z = (v - v_last) / scale`, relative to the newest value of each
    /// sequence. The network predicts the change from the last value.
    Anchored { scale: f64 },
    /// Tokens are the `W - 1` increments `(v[t] - v[t-1]) / scale`; the
    /// output is the next increment, added to the newest value.
    Increments { scale: f64 },
}

impl Default for PowerScaling {
    fn default() -> Self {
        PowerScaling::Corpus {
            mean: 0.0,
            std: 1.0,
        }
    }
}

impl PowerScaling {
    /// Corpus statistics over every input and target value.
    pub fn fit_corpus(samples: &[PowerSample]) -> Self {
        let vals = || {
            samples
                .iter()
                .flat_map(|s| s.values.iter().copied().chain(std::iter::once(s.target)))
        };
        let n = vals().count().max(1) as f64;
        let mean = vals().sum::<f64>() / n;
        let var = vals().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        PowerScaling::Corpus {
            mean,
            std: var.sqrt().max(1e-9),
        }
    }

    /// Network input tokens for clipped `values`.
    fn tokens(&self, values: &[f64]) -> Vec<f64> {
        if let PowerScaling::Increments { scale } = *self {
            return values.windows(2).map(|w| (w[1] - w[0]) / scale).collect();
        }
        let (center, spread) = self.center_and_spread(values);
        values.iter().map(|v| (v - center) / spread).collect()
    }

    fn center_and_spread(&self, values: &[f64]) -> (f64, f64) {
        match *self {
            PowerScaling::Corpus { mean, std } => (mean, std),
            PowerScaling::Anchored { scale } | PowerScaling::Increments { scale } => {
                (*values.last().expect("non-empty sequence"), scale)
            }
        }
    }

    fn code(&self) -> [f64; 3] {
        match *self {
            PowerScaling::Corpus { mean, std } => [0.0, mean, std],
            PowerScaling::Anchored { scale } => [1.0, scale, 0.0],
            PowerScaling::Increments { scale } => [2.0, scale, 0.0],
        }
    }

    fn from_code(code: &[f64]) -> Result<Self> {
        match code[0] as i64 {
            0 => Ok(PowerScaling::Corpus {
                mean: code[1],
                std: code[2],
            }),
            1 => Ok(PowerScaling::Anchored { scale: code[1] }),
            2 => Ok(PowerScaling::Increments { scale: code[1] }),
            k => Err(Error::Checkpoint(format!("unknown power scaling kind {k}"))),
        }
    }
}

/// `W` past values and the value that followed them.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSample {
    pub values: Vec<f64>,
    pub target: f64,
}

/// Phase-2 predictor: multi-head causal self-attention over a received
/// power sequence, read out at the last position.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerModel {
    /// `H` heads, `d_model × d_model` projections, `w_o: (H·d_model) × 1`.
    pub params: AttentionParams,
    /// Row 0 multiplies the scaled value, row 1 is added.
    pub embed: Matrix,
    /// `1 × 1` readout bias.
    pub bias: Matrix,
    window: usize,
    pub scaling: PowerScaling,
    pub floor: f64,
    pub ceiling: f64,
    /// Positional code for `window` rows, derived from the shape.
    pe: Matrix,
}

/// Attention of the last position of one head.
#[derive(Debug, Clone)]
pub struct LastRowHead {
    /// Query of the last position.
    pub q: Vec<f64>,
    /// `w_k · q`, so that the scores are `x · kq / √d`.
    pub kq: Vec<f64>,
    /// Weights over all `W` positions.
    pub weights: Vec<f64>,
    /// Weighted mean of the embedded rows.
    pub xbar: Vec<f64>,
    /// `xbar · w_v`.
    pub context: Vec<f64>,
}

/// Cached forward pass.
#[derive(Debug, Clone)]
pub struct PowerForward {
    pub z: Vec<f64>,
    /// Embedded input, `W × d_model`.
    pub x: Matrix,
    pub heads: Vec<LastRowHead>,
    /// Last-position head outputs side by side, width `H·d_model`.
    pub concat: Vec<f64>,
    /// Raw output before unscaling.
    pub out: f64,
}

/// Sinusoidal position code, `rows × d`.
pub fn positional_encoding(rows: usize, d: usize) -> Matrix {
    let mut pe = Matrix::zeros(rows, d);
    for pos in 0..rows {
        for i in 0..d {
            let freq = 10000f64.powf(-((i / 2 * 2) as f64) / d as f64);
            let a = pos as f64 * freq;
            pe[(pos, i)] = if i % 2 == 0 { a.sin() } else { a.cos() };
        }
    }
    pe
}

fn vec_mat(v: &[f64], m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for (r, &a) in v.iter().enumerate() {
        for (o, &b) in out.iter_mut().zip(m.row(r)) {
            *o += a * b;
        }
    }
    out
}

/// `m · v` for a column vector `v`.
fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..m.rows())
        .map(|r| m.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Outer product `a ⊗ b`.
fn outer(a: &[f64], b: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(a.len(), b.len());
    for (r, &x) in a.iter().enumerate() {
        for (o, &y) in m.row_mut(r).iter_mut().zip(b) {
            *o = x * y;
        }
    }
    m
}

impl PowerModel {
    /// Random projections and embedding with a zero readout, so the raw
    /// output starts at 0.
    pub fn new<R: Rng + ?Sized>(window: usize, heads: usize, d_model: usize, rng: &mut R) -> Self {
        assert!(
            window >= 2 && heads >= 1 && d_model >= 1,
            "power model needs window >= 2 and one head"
        );
        let mut params = AttentionParams::random(heads, d_model, d_model, 1, rng);
        params.w_o = Matrix::zeros(heads * d_model, 1);
        PowerModel {
            params,
            embed: Matrix::random_uniform(2, d_model, 1.0, rng),
            bias: Matrix::zeros(1, 1),
            window,
            scaling: PowerScaling::default(),
            floor: DEFAULT_POWER_FLOOR,
            ceiling: DEFAULT_POWER_CEILING,
            pe: positional_encoding(window, d_model),
        }
    }

    pub fn heads(&self) -> usize {
        self.params.heads()
    }

    /// Number of values per input sequence.
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn d_model(&self) -> usize {
        self.params.d_model()
    }

    fn clip(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .map(|v| v.clamp(self.floor, self.ceiling))
            .collect()
    }

    fn check(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.window {
            return Err(Error::Shape {
                op: "power sequence",
                left: (values.len(), 1),
                right: (self.window, 1),
            });
        }
        Ok(())
    }

    fn embed_values(&self, values: &[f64]) -> (Vec<f64>, Matrix) {
        let z = self.scaling.tokens(&self.clip(values));
        let rows: Vec<usize> = (0..z.len()).collect();
        let mut x = self.pe.gather_rows(&rows);
        for (t, &zt) in z.iter().enumerate() {
            for (i, xi) in x.row_mut(t).iter_mut().enumerate() {
                *xi += zt * self.embed[(0, i)] + self.embed[(1, i)];
            }
        }
        (z, x)
    }

    fn forward_unchecked(&self, values: &[f64]) -> PowerForward {
        let (z, x) = self.embed_values(values);
        let p = &self.params;
        let last = x.rows() - 1;
        let scale = 1.0 / (p.d_head() as f64).sqrt();
        let heads: Vec<LastRowHead> = (0..p.heads())
            .map(|h| {
                let q = vec_mat(x.row(last), &p.w_q[h]);
                let kq = mat_vec(&p.w_k[h], &q);
                let scores: Vec<f64> = mat_vec(&x, &kq).into_iter().map(|s| s * scale).collect();
                let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
                let sum: f64 = e.iter().sum();
                let weights: Vec<f64> = e.iter().map(|a| a / sum).collect();
                let xbar = vec_mat(&weights, &x);
                let context = vec_mat(&xbar, &p.w_v[h]);
                LastRowHead {
                    q,
                    kq,
                    weights,
                    xbar,
                    context,
                }
            })
            .collect();
        let concat: Vec<f64> = heads
            .iter()
            .flat_map(|f| f.context.iter().copied())
            .collect();
        let out = concat
            .iter()
            .zip(p.w_o.data())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + self.bias[(0, 0)];
        PowerForward {
            z,
            x,
            heads,
            concat,
            out,
        }
    }

    /// Forward pass of the last position, which is all the readout uses.
    pub fn forward(&self, values: &[f64]) -> Result<PowerForward> {
        self.check(values)?;
        Ok(self.forward_unchecked(values))
    }

    /// Full attention of every head over the embedded sequence, with or
    /// without the causal mask.
    pub fn attention_maps(&self, values: &[f64], causal: bool) -> Result<Vec<HeadForward>> {
        self.check(values)?;
        let (_, x) = self.embed_values(values);
        let p = &self.params;
        Ok((0..p.heads())
            .map(|h| attention_head(&x, &p.w_q[h], &p.w_k[h], &p.w_v[h], causal))
            .collect())
    }

    /// Maps a raw network output back to dBm.
    pub fn unscale(&self, values: &[f64], out: f64) -> f64 {
        let (center, spread) = self.scaling.center_and_spread(&self.clip(values));
        center + spread * out
    }

    /// Predicted power one stride after the last value, dBm.
    pub fn predict(&self, values: &[f64]) -> Result<f64> {
        let f = self.forward(values)?;
        Ok(self.unscale(values, f.out))
    }

    /// Squared error in scaled units and gradients for
    /// `[w_q.., w_k.., w_v.., w_o, embed, bias]`.
    ///
    /// A target below `floor` (the transmitter left the sensing region) is
    /// censored: its true level is only known to be under the floor, so a
    /// prediction under the floor costs nothing.
    pub fn loss_and_grads(&self, s: &PowerSample) -> (f64, Vec<Matrix>) {
        let f = self.forward_unchecked(&s.values);
        let (center, spread) = self.scaling.center_and_spread(&self.clip(&s.values));
        let target = (s.target.clamp(self.floor, self.ceiling) - center) / spread;
        let err = if s.target < self.floor {
            (f.out - target).max(0.0)
        } else {
            f.out - target
        };
        let g = 2.0 * err;
        let p = &self.params;
        let (h, d, w) = (p.heads(), self.d_model(), f.z.len());
        let scale = 1.0 / (p.d_head() as f64).sqrt();
        let last = w - 1;

        let d_wo = Matrix::from_vec(h * d, 1, f.concat.iter().map(|c| c * g).collect())
            .expect("concat width");
        let mut d_x = Matrix::zeros(w, d);
        let mut d_wq = Vec::with_capacity(h);
        let mut d_wk = Vec::with_capacity(h);
        let mut d_wv = Vec::with_capacity(h);
        for (hi, fwd) in f.heads.iter().enumerate() {
            let d_ctx: Vec<f64> = (0..d).map(|i| g * p.w_o[(hi * d + i, 0)]).collect();
            d_wv.push(outer(&fwd.xbar, &d_ctx));
            let d_xbar = mat_vec(&p.w_v[hi], &d_ctx);
            let d_weights = mat_vec(&f.x, &d_xbar);
            let inner: f64 = fwd.weights.iter().zip(&d_weights).map(|(a, b)| a * b).sum();
            let d_scores: Vec<f64> = fwd
                .weights
                .iter()
                .zip(&d_weights)
                .map(|(a, b)| a * (b - inner) * scale)
                .collect();
            for (t, (&wt, &st)) in fwd.weights.iter().zip(&d_scores).enumerate() {
                for ((a, &b), &c) in d_x.row_mut(t).iter_mut().zip(&d_xbar).zip(&fwd.kq) {
                    *a += wt * b + st * c;
                }
            }
            let d_kq = vec_mat(&d_scores, &f.x);
            d_wk.push(outer(&d_kq, &fwd.q));
            let d_q = vec_mat(&d_kq, &p.w_k[hi]);
            d_wq.push(outer(f.x.row(last), &d_q));
            let d_xq = mat_vec(&p.w_q[hi], &d_q);
            for (a, b) in d_x.row_mut(last).iter_mut().zip(&d_xq) {
                *a += b;
            }
        }
        let mut d_embed = Matrix::zeros(2, d);
        for (t, &zt) in f.z.iter().enumerate() {
            for i in 0..d {
                d_embed[(0, i)] += zt * d_x[(t, i)];
                d_embed[(1, i)] += d_x[(t, i)];
            }
        }
        let mut grads = d_wq;
        grads.extend(d_wk);
        grads.extend(d_wv);
        grads.push(d_wo);
        grads.push(d_embed);
        grads.push(Matrix::filled(1, 1, g));
        (err * err, grads)
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = self.params.matrices_mut();
        v.push(&mut self.embed);
        v.push(&mut self.bias);
        v
    }

    pub fn to_matrices(&self) -> Vec<Matrix> {
        let s = self.scaling.code();
        let hyper = Matrix::from_rows(&[[
            CHECKPOINT_TAG,
            self.window as f64,
            self.heads() as f64,
            self.floor,
            self.ceiling,
            s[0],
            s[1],
            s[2],
        ]]);
        let mut out = vec![hyper];
        out.extend(self.params.matrices().into_iter().cloned());
        out.push(self.embed.clone());
        out.push(self.bias.clone());
        out
    }

    pub fn from_matrices(mut mats: Vec<Matrix>) -> Result<Self> {
        let bad = || Error::Checkpoint("not a power model checkpoint".into());
        if mats.is_empty() || mats[0].shape() != (1, 8) || mats[0][(0, 0)] != CHECKPOINT_TAG {
            return Err(bad());
        }
        let hyper = mats.remove(0);
        let heads = hyper[(0, 2)] as usize;
        if heads == 0 || mats.len() != 3 * heads + 3 {
            return Err(bad());
        }
        let bias = mats.pop().unwrap();
        let embed = mats.pop().unwrap();
        let w_o = mats.pop().unwrap();
        let w_v = mats.split_off(2 * heads);
        let w_k = mats.split_off(heads);
        let params = AttentionParams {
            w_q: mats,
            w_k,
            w_v,
            w_o,
        };
        params.validate()?;
        if embed.shape() != (2, params.d_model()) || bias.shape() != (1, 1) || params.d_out() != 1 {
            return Err(bad());
        }
        let window = hyper[(0, 1)] as usize;
        if window < 2 {
            return Err(bad());
        }
        Ok(PowerModel {
            pe: positional_encoding(window, params.d_model()),
            params,
            embed,
            bias,
            window,
            floor: hyper[(0, 3)],
            ceiling: hyper[(0, 4)],
            scaling: PowerScaling::from_code(&hyper.row(0)[5..])?,
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

impl Trainable for PowerModel {
    type Sample = PowerSample;

    fn loss_and_grads(&self, s: &PowerSample) -> (f64, Vec<Matrix>) {
        PowerModel::loss_and_grads(self, s)
    }

    fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        PowerModel::parameters_mut(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{finite_difference, max_relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_model(scaling: PowerScaling, seed: u64) -> (PowerModel, PowerSample) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = PowerModel::new(6, 2, 4, &mut rng);
        m.params.w_o = Matrix::random_uniform(8, 1, 1.0, &mut rng);
        m.bias = Matrix::filled(1, 1, 0.3);
        m.scaling = scaling;
        let values: Vec<f64> = (0..6).map(|_| rng.gen_range(-62.0..-52.0)).collect();
        let s = PowerSample {
            values,
            target: rng.gen_range(-62.0..-52.0),
        };
        (m, s)
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (i, scaling) in [
            PowerScaling::Corpus {
                mean: -57.0,
                std: 3.0,
            },
            PowerScaling::Anchored { scale: 2.0 },
            PowerScaling::Increments { scale: 3.0 },
        ]
        .into_iter()
        .enumerate()
        {
            let (mut m, s) = random_model(scaling, i as u64);
            let (_, analytic) = m.loss_and_grads(&s);
            let numeric = finite_difference(&mut m, 1e-5, |m| m.loss_and_grads(&s).0);
            let err = max_relative_error(&analytic, &numeric, 1e-6);
            assert!(err < 1e-4, "{scaling:?}: {err}");
        }
    }
}
