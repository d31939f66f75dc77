use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{
    PowerModel, PowerSample, PowerScaling, DEFAULT_D_MODEL, DEFAULT_INCREMENT_SCALE,
};
use super::sequence::classify_region;
use crate::nn::{fit_observed, TrainOptions};
use crate::{Error, Result};

/// Shape and training schedule of the power model.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTraining {
    pub heads: usize,
    pub d_model: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub scaling: PowerScaling,
    pub seed: u64,
}

impl Default for PowerTraining {
    fn default() -> Self {
        PowerTraining {
            heads: 3,
            d_model: DEFAULT_D_MODEL,
            epochs: 500,
            batch_size: 16,
            learning_rate: 3e-3,
            scaling: PowerScaling::Increments {
                scale: DEFAULT_INCREMENT_SCALE,
            },
            seed: 0,
        }
    }
}

/// Fresh model with the samples' window length, trained on them. Returns
/// the model and the per-epoch mean loss.
pub fn train_power_model(
    samples: &[PowerSample],
    opts: &PowerTraining,
) -> Result<(PowerModel, Vec<f64>)> {
    train_power_model_observed(samples, opts, |_, _| {})
}

/// [`train_power_model`] that hands the model to `on_epoch` after every
/// epoch.
pub fn train_power_model_observed<F>(
    samples: &[PowerSample],
    opts: &PowerTraining,
    on_epoch: F,
) -> Result<(PowerModel, Vec<f64>)>
where
    F: FnMut(usize, &PowerModel),
{
    let window = samples
        .first()
        .ok_or_else(|| Error::InvalidConfig("empty power dataset".into()))?
        .values
        .len();
    if window < 2 || opts.heads == 0 || opts.d_model == 0 {
        return Err(Error::InvalidConfig(
            "power model needs window >= 2 and one head".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut model = PowerModel::new(window, opts.heads, opts.d_model, &mut rng);
    model.scaling = opts.scaling;
    let log = fit_observed(
        &mut model,
        samples,
        &TrainOptions {
            epochs: opts.epochs,
            batch_size: opts.batch_size,
            learning_rate: opts.learning_rate,
            seed: opts.seed,
        },
        on_epoch,
    )?;
    Ok((model, log))
}

/// Fraction of samples whose predicted in/out classification matches the
/// classification of the true next value.
pub fn region_accuracy(model: &PowerModel, samples: &[PowerSample], theta: f64) -> Result<f64> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut hits = 0usize;
    for s in samples {
        let pred = model.predict(&s.values)?;
        hits += usize::from(classify_region(pred, theta) == classify_region(s.target, theta));
    }
    Ok(hits as f64 / samples.len() as f64)
}
