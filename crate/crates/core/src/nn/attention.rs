use rand::Rng;

use super::matrix::{softmax_rows, Matrix};
use crate::{Error, Result};

/// Projection matrices of a (multi-head) attention layer.
///
/// `w_q[h]`, `w_k[h]`, `w_v[h]` are `d_model × d_head`; `w_o` maps the
/// concatenated heads (`heads·d_head`) to `d_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_q: Vec<Matrix>,
    pub w_k: Vec<Matrix>,
    pub w_v: Vec<Matrix>,
    pub w_o: Matrix,
}

impl AttentionParams {
    pub fn random<R: Rng + ?Sized>(
        heads: usize,
        d_model: usize,
        d_head: usize,
        d_out: usize,
        rng: &mut R,
    ) -> Self {
        let mut draw = || Matrix::xavier(d_model, d_head, rng);
        let w_q = (0..heads).map(|_| draw()).collect();
        let w_k = (0..heads).map(|_| draw()).collect();
        let w_v = (0..heads).map(|_| draw()).collect();
        AttentionParams {
            w_q,
            w_k,
            w_v,
            w_o: Matrix::xavier(heads * d_head, d_out, rng),
        }
    }

    pub fn heads(&self) -> usize {
        self.w_q.len()
    }

    pub fn d_model(&self) -> usize {
        self.w_q[0].rows()
    }

    pub fn d_head(&self) -> usize {
        self.w_q[0].cols()
    }

    pub fn d_out(&self) -> usize {
        self.w_o.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.heads();
        if h == 0 || self.w_k.len() != h || self.w_v.len() != h {
            return Err(Error::InvalidConfig(
                "attention needs the same non-zero head count for Q, K and V".into(),
            ));
        }
        let want = (self.d_model(), self.d_head());
        for m in self.w_q.iter().chain(&self.w_k).chain(&self.w_v) {
            if m.shape() != want {
                return Err(Error::Shape {
                    op: "attention params",
                    left: want,
                    right: m.shape(),
                });
            }
        }
        if self.w_o.rows() != h * self.d_head() {
            return Err(Error::Shape {
                op: "attention output projection",
                left: (h * self.d_head(), self.d_out()),
                right: self.w_o.shape(),
            });
        }
        Ok(())
    }

    /// All matrices in declaration order: every `w_q`, every `w_k`, every
    /// `w_v`, then `w_o`.
    pub fn matrices(&self) -> Vec<&Matrix> {
        self.w_q
            .iter()
            .chain(&self.w_k)
            .chain(&self.w_v)
            .chain(std::iter::once(&self.w_o))
            .collect()
    }

    pub fn matrices_mut(&mut self) -> Vec<&mut Matrix> {
        self.w_q
            .iter_mut()
            .chain(self.w_k.iter_mut())
            .chain(self.w_v.iter_mut())
            .chain(std::iter::once(&mut self.w_o))
            .collect()
    }
}

/// Cached forward pass of one attention head.
#[derive(Debug, Clone)]
pub struct HeadForward {
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    pub weights: Matrix,
    pub context: Matrix,
}

#[derive(Debug, Clone)]
pub struct HeadGrads {
    pub d_wq: Matrix,
    pub d_wk: Matrix,
    pub d_wv: Matrix,
    pub d_x: Matrix,
    pub d_scores: Matrix,
}

/// Scaled dot-product attention for one head. With `causal`, row `r` only
/// sees columns `c <= r`.
pub fn attention_head(
    x: &Matrix,
    w_q: &Matrix,
    w_k: &Matrix,
    w_v: &Matrix,
    causal: bool,
) -> HeadForward {
    let q = x.dot(w_q);
    let k = x.dot(w_k);
    let v = x.dot(w_v);
    let scale = 1.0 / (w_q.cols() as f64).sqrt();
    let mut scores = q.dot_nt(&k);
    scores.scale(scale);
    if causal {
        for r in 0..scores.rows() {
            for c in (r + 1)..scores.cols() {
                scores[(r, c)] = f64::NEG_INFINITY;
            }
        }
    }
    let weights = softmax_rows(&scores);
    let context = weights.dot(&v);
    HeadForward {
        q,
        k,
        v,
        weights,
        context,
    }
}

/// Causal attention for head `head` of `p` over the rows of `x`.
pub fn masked_attention(x: &Matrix, p: &AttentionParams, head: usize) -> Result<HeadForward> {
    if head >= p.heads() {
        return Err(Error::InvalidConfig(format!(
            "head {head} out of range for {} heads",
            p.heads()
        )));
    }
    if x.cols() != p.d_model() {
        return Err(Error::Shape {
            op: "masked_attention",
            left: x.shape(),
            right: p.w_q[head].shape(),
        });
    }
    Ok(attention_head(
        x,
        &p.w_q[head],
        &p.w_k[head],
        &p.w_v[head],
        true,
    ))
}

/// Back-propagates through one head. `d_context` is the loss gradient at the
/// context output; `d_weights` optionally adds a gradient taken directly at
/// the attention weights.
pub fn attention_head_backward(
    x: &Matrix,
    w_q: &Matrix,
    w_k: &Matrix,
    w_v: &Matrix,
    fwd: &HeadForward,
    d_context: &Matrix,
    d_weights: Option<&Matrix>,
) -> HeadGrads {
    let n = x.rows();
    let mut d_w = d_context.dot_nt(&fwd.v);
    if let Some(extra) = d_weights {
        d_w.add_scaled(extra, 1.0);
    }
    let d_v = fwd.weights.dot_tn(d_context);

    let scale = 1.0 / (w_q.cols() as f64).sqrt();
    let mut d_scores = Matrix::zeros(n, n);
    for r in 0..n {
        let w = fwd.weights.row(r);
        let g = d_w.row(r);
        let inner: f64 = w.iter().zip(g).map(|(a, b)| a * b).sum();
        for c in 0..n {
            // Masked entries carry zero weight, hence zero gradient.
            d_scores[(r, c)] = w[c] * (g[c] - inner);
        }
    }
    let mut d_q = d_scores.dot(&fwd.k);
    d_q.scale(scale);
    let mut d_k = d_scores.dot_tn(&fwd.q);
    d_k.scale(scale);

    let d_wq = x.dot_tn(&d_q);
    let d_wk = x.dot_tn(&d_k);
    let d_wv = x.dot_tn(&d_v);
    let mut d_x = d_q.dot_nt(w_q);
    d_x.add_scaled(&d_k.dot_nt(w_k), 1.0);
    d_x.add_scaled(&d_v.dot_nt(w_v), 1.0);
    HeadGrads {
        d_wq,
        d_wk,
        d_wv,
        d_x,
        d_scores,
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn params(d: usize, seed: u64) -> AttentionParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AttentionParams::random(1, d, d, d, &mut rng)
    }

    #[test]
    fn single_token_attends_to_itself() {
        let p = params(4, 0);
        let x = Matrix::from_rows(&[[1.0, 0.0, 1.0, 0.5]]);
        let f = masked_attention(&x, &p, 0).unwrap();
        assert_eq!(f.weights, Matrix::from_rows(&[[1.0]]));
        assert_eq!(f.context, f.v);
    }

    #[test]
    fn causal_mask_zeroes_future() {
        let p = params(3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Matrix::random_uniform(6, 3, 1.0, &mut rng);
        let f = masked_attention(&x, &p, 0).unwrap();
        for r in 0..6 {
            for c in (r + 1)..6 {
                assert_eq!(f.weights[(r, c)], 0.0);
            }
            let total: f64 = f.weights.row(r).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_upstream_gradient_gives_zero() {
        let p = params(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Matrix::random_uniform(5, 3, 1.0, &mut rng);
        let f = masked_attention(&x, &p, 0).unwrap();
        let g = attention_head_backward(
            &x,
            &p.w_q[0],
            &p.w_k[0],
            &p.w_v[0],
            &f,
            &Matrix::zeros(5, 3),
            None,
        );
        for m in [&g.d_wq, &g.d_wk, &g.d_wv, &g.d_x, &g.d_scores] {
            assert_eq!(m.max_abs(), 0.0);
        }
    }

    #[test]
    fn masked_scores_get_no_gradient() {
        let p = params(3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = Matrix::random_uniform(5, 3, 1.0, &mut rng);
        let f = masked_attention(&x, &p, 0).unwrap();
        let up = Matrix::random_uniform(5, 3, 1.0, &mut rng);
        let extra = Matrix::random_uniform(5, 5, 1.0, &mut rng);
        let g = attention_head_backward(&x, &p.w_q[0], &p.w_k[0], &p.w_v[0], &f, &up, Some(&extra));
        for r in 0..5 {
            for c in (r + 1)..5 {
                assert_eq!(g.d_scores[(r, c)], 0.0);
            }
        }
    }

    #[test]
    fn head_gradients_match_finite_differences() {
        // Loss = <G, context> + <H, weights> for fixed random G, H.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, d, dh) = (5, 4, 3);
        let x = Matrix::random_uniform(n, d, 1.0, &mut rng);
        let wq = Matrix::random_uniform(d, dh, 1.0, &mut rng);
        let wk = Matrix::random_uniform(d, dh, 1.0, &mut rng);
        let wv = Matrix::random_uniform(d, dh, 1.0, &mut rng);
        let g_ctx = Matrix::random_uniform(n, dh, 1.0, &mut rng);
        let g_w = Matrix::random_uniform(n, n, 1.0, &mut rng);
        let loss = |x: &Matrix, wq: &Matrix, wk: &Matrix, wv: &Matrix| {
            let f = attention_head(x, wq, wk, wv, true);
            let a: f64 = f
                .context
                .data()
                .iter()
                .zip(g_ctx.data())
                .map(|(p, q)| p * q)
                .sum();
            let b: f64 = f
                .weights
                .data()
                .iter()
                .zip(g_w.data())
                .map(|(p, q)| p * q)
                .sum();
            a + b
        };
        let f = attention_head(&x, &wq, &wk, &wv, true);
        let g = attention_head_backward(&x, &wq, &wk, &wv, &f, &g_ctx, Some(&g_w));
        let h = 1e-5;
        let check = |analytic: &Matrix, which: usize| {
            for i in 0..analytic.data().len() {
                let mut mats = [x.clone(), wq.clone(), wk.clone(), wv.clone()];
                mats[which].data_mut()[i] += h;
                let up = loss(&mats[0], &mats[1], &mats[2], &mats[3]);
                mats[which].data_mut()[i] -= 2.0 * h;
                let down = loss(&mats[0], &mats[1], &mats[2], &mats[3]);
                let numeric = (up - down) / (2.0 * h);
                let a = analytic.data()[i];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
                assert!(
                    rel < 1e-4 || (a - numeric).abs() < 1e-9,
                    "param {which} idx {i}: {a} vs {numeric}"
                );
            }
        };
        check(&g.d_x, 0);
        check(&g.d_wq, 1);
        check(&g.d_wk, 2);
        check(&g.d_wv, 3);
    }

    #[test]
    fn params_shape_validation() {
        let mut p = params(4, 8);
        assert!(p.validate().is_ok());
        p.w_o = Matrix::zeros(3, 4);
        assert!(matches!(p.validate(), Err(Error::Shape { .. })));
        let x = Matrix::zeros(2, 5);
        assert!(masked_attention(&x, &params(4, 8), 0).is_err());
        assert!(masked_attention(&Matrix::zeros(2, 4), &params(4, 8), 1).is_err());
    }
}
