use super::matrix::Matrix;
use crate::{Error, Result};

/// Adam optimizer state: per-parameter first and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Default for Adam {
    fn default() -> Self {
        Adam::new(1e-3)
    }
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Moment buffers are allocated on the first call
    /// and must keep matching the parameter shapes afterwards.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[Matrix]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::InvalidConfig(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.m.is_empty() {
            self.m = grads
                .iter()
                .map(|g| Matrix::zeros(g.rows(), g.cols()))
                .collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::InvalidConfig(
                "parameter count changed between steps".into(),
            ));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != g.shape() || m.shape() != g.shape() {
                return Err(Error::Shape {
                    op: "adam step",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let pd = p.data_mut();
            let md = m.data_mut();
            let vd = v.data_mut();
            for (i, &gi) in g.data().iter().enumerate() {
                md[i] = self.beta1 * md[i] + (1.0 - self.beta1) * gi;
                vd[i] = self.beta2 * vd[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = md[i] / bc1;
                let v_hat = vd[i] / bc2;
                pd[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Matrix::from_rows(&[[1.5, -2.0]]);
        let before = p.clone();
        let mut opt = Adam::default();
        for _ in 0..5 {
            opt.step(&mut [&mut p], &[Matrix::zeros(1, 2)]).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = v̂ = g on step one, so the update is lr·g/(|g| + eps).
        let mut p = Matrix::from_rows(&[[0.0]]);
        let mut opt = Adam::default();
        opt.step(&mut [&mut p], &[Matrix::from_rows(&[[1.0]])])
            .unwrap();
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((p[(0, 0)] - expected).abs() < 1e-15);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let mut p = Matrix::random_uniform(3, 3, 1.0, &mut rng);
            let mut opt = Adam::new(0.01);
            for _ in 0..10 {
                let g = p.map(|v| 2.0 * v - 0.3);
                opt.step(&mut [&mut p], &[g]).unwrap();
            }
            p
        };
        let a = run();
        let b = run();
        assert!(a
            .data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = Matrix::zeros(2, 2);
        let mut opt = Adam::default();
        assert!(opt.step(&mut [&mut p], &[Matrix::zeros(2, 3)]).is_err());
        assert!(opt.step(&mut [&mut p], &[]).is_err());
    }
}
