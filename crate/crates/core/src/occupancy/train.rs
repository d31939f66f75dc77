use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::baseline::StandardAttention;
use super::dataset::bit_accuracy;
use super::model::{OccupancyModel, OccupancyObjective, OccupancySample};
use crate::nn::{fit, TrainOptions};
use crate::{Error, Result};

/// Training schedule of the occupancy model.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyTraining {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Weight of the attention alignment term; 0 trains the value path only.
    pub align_weight: f64,
    pub seed: u64,
}

impl Default for OccupancyTraining {
    fn default() -> Self {
        OccupancyTraining {
            epochs: 100,
            batch_size: 8,
            learning_rate: 1e-2,
            align_weight: 1.0,
            seed: 0,
        }
    }
}

impl OccupancyTraining {
    fn options(&self) -> TrainOptions {
        TrainOptions {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed: self.seed,
        }
    }
}

fn sample_shape(samples: &[OccupancySample]) -> Result<(usize, usize, usize)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidConfig("empty occupancy dataset".into()))?;
    Ok((first.x.cols(), first.x.rows(), first.y.rows()))
}

/// Fresh model shaped after the samples, trained on them. Returns the model
/// and the per-epoch mean loss.
pub fn train_occupancy_model(
    samples: &[OccupancySample],
    opts: &OccupancyTraining,
) -> Result<(OccupancyModel, Vec<f64>)> {
    let (channels, ell, horizon) = sample_shape(samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut model = OccupancyModel::new(channels, ell, horizon, &mut rng);
    let mut obj = OccupancyObjective {
        model: &mut model,
        align_weight: opts.align_weight,
    };
    let log = fit(&mut obj, samples, &opts.options())?;
    Ok((model, log))
}

pub fn train_standard_attention(
    samples: &[OccupancySample],
    opts: &OccupancyTraining,
) -> Result<(StandardAttention, Vec<f64>)> {
    let (channels, _, horizon) = sample_shape(samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut model = StandardAttention::new(channels, horizon, &mut rng);
    let log = fit(&mut model, samples, &opts.options())?;
    Ok((model, log))
}

/// Per-bit accuracy tally over a set of windows.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OccupancyScore {
    pub windows: usize,
    /// Windows for which no period was found; all their bits count as wrong.
    pub no_period: usize,
    /// Sum of per-window accuracies.
    accuracy_sum: f64,
}

impl OccupancyScore {
    /// Mean per-bit accuracy over the windows.
    pub fn accuracy(&self) -> f64 {
        if self.windows == 0 {
            return f64::NAN;
        }
        self.accuracy_sum / self.windows as f64
    }
}

pub fn score_occupancy(
    model: &OccupancyModel,
    samples: &[OccupancySample],
) -> Result<OccupancyScore> {
    let mut s = OccupancyScore::default();
    for sample in samples {
        s.windows += 1;
        match model.predict(&sample.x) {
            Ok(p) => s.accuracy_sum += bit_accuracy(&p.bits, &sample.y),
            Err(Error::NoPeriod) => s.no_period += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(s)
}

pub fn score_standard(
    model: &StandardAttention,
    samples: &[OccupancySample],
) -> Result<OccupancyScore> {
    let mut s = OccupancyScore::default();
    for sample in samples {
        s.windows += 1;
        s.accuracy_sum += bit_accuracy(&model.predict(&sample.x)?, &sample.y);
    }
    Ok(s)
}
