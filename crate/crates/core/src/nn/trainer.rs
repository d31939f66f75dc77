use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Adam, Matrix};
use crate::{Error, Result};

/// A model trained by minibatch Adam on a fixed sample type.
pub trait Trainable: Sync {
    type Sample: Sync;

    /// Loss on one sample and the gradient for every parameter, in the
    /// order of [`Trainable::parameters_mut`].
    fn loss_and_grads(&self, sample: &Self::Sample) -> (f64, Vec<Matrix>);

    fn parameters_mut(&mut self) -> Vec<&mut Matrix>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 100,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Runs `opts.epochs` passes over `samples` in a seeded shuffled order and
/// returns the mean pre-update loss of every epoch. Per-sample gradients are
/// computed in parallel but summed in sample order, so results do not depend
/// on the thread count.
pub fn fit<M: Trainable>(
    model: &mut M,
    samples: &[M::Sample],
    opts: &TrainOptions,
) -> Result<Vec<f64>> {
    fit_observed(model, samples, opts, |_, _| {})
}

/// [`fit`] that hands the model to `on_epoch` after every epoch, with the
/// 1-based epoch number.
pub fn fit_observed<M, F>(
    model: &mut M,
    samples: &[M::Sample],
    opts: &TrainOptions,
    mut on_epoch: F,
) -> Result<Vec<f64>>
where
    M: Trainable,
    F: FnMut(usize, &M),
{
    if opts.batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be >= 1".into()));
    }
    if samples.is_empty() {
        return Ok(vec![f64::NAN; opts.epochs]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut adam = Adam::new(opts.learning_rate);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = Vec::with_capacity(opts.epochs);
    for _ in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(opts.batch_size) {
            let results: Vec<(f64, Vec<Matrix>)> = {
                let m: &M = model;
                batch
                    .par_iter()
                    .map(|&i| m.loss_and_grads(&samples[i]))
                    .collect()
            };
            let mut iter = results.into_iter();
            let (mut loss, mut grads) = iter.next().expect("non-empty batch");
            for (l, g) in iter {
                loss += l;
                for (acc, gi) in grads.iter_mut().zip(&g) {
                    acc.add_scaled(gi, 1.0);
                }
            }
            let inv = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| g.scale(inv));
            epoch_loss += loss;
            let mut params = model.parameters_mut();
            adam.step(&mut params, &grads)?;
        }
        log.push(epoch_loss / samples.len() as f64);
        on_epoch(log.len(), model);
    }
    Ok(log)
}

/// Central finite-difference gradient of `loss` with respect to every entry
/// of every parameter. Test helper for checking analytic gradients.
pub fn finite_difference<M, F>(model: &mut M, h: f64, loss: F) -> Vec<Matrix>
where
    M: Trainable,
    F: Fn(&M) -> f64,
{
    let shapes: Vec<(usize, usize)> = model.parameters_mut().iter().map(|p| p.shape()).collect();
    let mut out = Vec::with_capacity(shapes.len());
    for (pi, &(r, c)) in shapes.iter().enumerate() {
        let mut g = Matrix::zeros(r, c);
        for i in 0..r * c {
            let orig = model.parameters_mut()[pi].data()[i];
            model.parameters_mut()[pi].data_mut()[i] = orig + h;
            let up = loss(model);
            model.parameters_mut()[pi].data_mut()[i] = orig - h;
            let down = loss(model);
            model.parameters_mut()[pi].data_mut()[i] = orig;
            g.data_mut()[i] = (up - down) / (2.0 * h);
        }
        out.push(g);
    }
    out
}

/// Largest relative error between two gradient lists, with an absolute floor
/// for entries that are both near zero.
pub fn max_relative_error(analytic: &[Matrix], numeric: &[Matrix], floor: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        for (&x, &y) in a.data().iter().zip(n.data()) {
            let denom = x.abs().max(y.abs()).max(floor);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Least squares on y = 3x - 1.
    struct Line {
        w: Matrix,
    }

    impl Trainable for Line {
        type Sample = (f64, f64);

        fn loss_and_grads(&self, &(x, y): &(f64, f64)) -> (f64, Vec<Matrix>) {
            let pred = self.w[(0, 0)] * x + self.w[(0, 1)];
            let e = pred - y;
            (e * e, vec![Matrix::from_rows(&[[2.0 * e * x, 2.0 * e]])])
        }

        fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
            vec![&mut self.w]
        }
    }

    #[test]
    fn fits_a_line_deterministically() {
        let samples: Vec<(f64, f64)> = (0..20)
            .map(|i| (i as f64 / 10.0, 3.0 * i as f64 / 10.0 - 1.0))
            .collect();
        let opts = TrainOptions {
            epochs: 400,
            batch_size: 4,
            learning_rate: 0.05,
            seed: 1,
        };
        let mut a = Line {
            w: Matrix::zeros(1, 2),
        };
        let log = fit(&mut a, &samples, &opts).unwrap();
        assert!(log.last().unwrap() < &1e-4, "final loss {:?}", log.last());
        assert!((a.w[(0, 0)] - 3.0).abs() < 0.05);
        let mut b = Line {
            w: Matrix::zeros(1, 2),
        };
        fit(&mut b, &samples, &opts).unwrap();
        assert_eq!(a.w, b.w);
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let mut m = Line {
            w: Matrix::filled(1, 2, 0.25),
        };
        let opts = TrainOptions {
            epochs: 0,
            ..TrainOptions::default()
        };
        assert!(fit(&mut m, &[(1.0, 1.0)], &opts).unwrap().is_empty());
        assert_eq!(m.w, Matrix::filled(1, 2, 0.25));
    }

    #[test]
    fn observer_sees_every_epoch() {
        let samples = [(0.5, 0.5), (1.0, 2.0)];
        let opts = TrainOptions {
            epochs: 5,
            ..TrainOptions::default()
        };
        let mut seen = Vec::new();
        let mut m = Line {
            w: Matrix::zeros(1, 2),
        };
        fit_observed(&mut m, &samples, &opts, |e, m: &Line| {
            seen.push((e, m.w.clone()))
        })
        .unwrap();
        assert_eq!(
            seen.iter().map(|(e, _)| *e).collect::<Vec<_>>(),
            vec![1, 2, 3, 4, 5]
        );
        assert_eq!(seen.last().unwrap().1, m.w);
        let mut plain = Line {
            w: Matrix::zeros(1, 2),
        };
        fit(&mut plain, &samples, &opts).unwrap();
        assert_eq!(plain.w, m.w);
    }

    #[test]
    fn finite_difference_agrees_on_quadratic() {
        let mut m = Line {
            w: Matrix::from_rows(&[[0.3, -0.2]]),
        };
        let s = (1.5, 2.0);
        let analytic = m.loss_and_grads(&s).1;
        let numeric = finite_difference(&mut m, 1e-5, |m| m.loss_and_grads(&s).0);
        assert!(max_relative_error(&analytic, &numeric, 1e-8) < 1e-6);
    }
}
