use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::integrated::run_integrated;
use super::metrics::{BitCounts, Metrics, PredictionReport};
use crate::netsim::{
    generate_network, init_mobility, observe, simulate, Mobility, ObservationTrace, SimConfig,
};
use crate::nn::Matrix;
use crate::occupancy::{
    permute_channels, train_occupancy_model, OccupancyModel, OccupancySample, OccupancyTraining,
};
use crate::power::{
    trace_samples, train_power_model, PowerModel, PowerScaling, PowerTraining, DEFAULT_D_MODEL,
    DEFAULT_INCREMENT_SCALE,
};
use crate::{Error, Result};

/// Everything that defines one integrated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub sim: SimConfig,
    pub mobility: Mobility,
    pub graphs: usize,
    pub observers: usize,
    pub slots: usize,
    pub input_len: usize,
    pub horizon: usize,
    pub window: usize,
    pub heads: usize,
    pub d_model: usize,
    pub epochs_occupancy: usize,
    pub epochs_power: usize,
    pub lr_occupancy: f64,
    pub lr_power: f64,
    pub batch_size: usize,
    pub batch_power: usize,
    pub align_weight: f64,
    pub scaling: PowerScaling,
    /// Channel-relabeled copies added per phase-1 training window.
    pub relabel_copies: usize,
    pub periodic_only: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            sim: SimConfig {
                nodes: 200,
                period: 4,
                ..SimConfig::default()
            },
            mobility: Mobility::Fixed,
            graphs: 100,
            observers: 5,
            slots: 160,
            input_len: 40,
            horizon: 40,
            window: 10,
            heads: 4,
            d_model: DEFAULT_D_MODEL,
            epochs_occupancy: 100,
            epochs_power: 500,
            lr_occupancy: 1e-2,
            lr_power: 3e-3,
            batch_size: 8,
            batch_power: 8,
            align_weight: 1.0,
            scaling: PowerScaling::Increments {
                scale: DEFAULT_INCREMENT_SCALE,
            },
            relabel_copies: 3,
            periodic_only: false,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.graphs == 0 || self.observers == 0 {
            return bad("graphs and observers must be >= 1");
        }
        if self.input_len < 2 * self.sim.period || self.horizon == 0 {
            return bad("input length must cover two periods and the horizon must be >= 1");
        }
        if self.slots < self.input_len + self.horizon {
            return bad("slots must cover one input window and one horizon");
        }
        if self.window < 2 || self.heads == 0 || self.d_model == 0 {
            return bad("power window must be >= 2 with at least one head");
        }
        if self.batch_size == 0 || self.batch_power == 0 {
            return bad("batch size must be >= 1");
        }
        Ok(())
    }

    /// RNG seed of graph `g`.
    pub fn graph_seed(&self, g: usize) -> u64 {
        self.sim
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(g as u64)
    }
}

/// One graph's traces: up to `observers` distinct active observers of the
/// same network run.
pub fn graph_traces(cfg: &SuiteConfig, g: usize) -> Result<Vec<ObservationTrace>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.graph_seed(g));
    let mut net = generate_network(&cfg.sim, &mut rng)?;
    init_mobility(&mut net, cfg.mobility, &mut rng);
    let mut active = net.active_ids();
    active.shuffle(&mut rng);
    active.truncate(cfg.observers);
    let hist = simulate(&mut net, cfg.mobility, &cfg.sim, 0, cfg.slots, &mut rng);
    Ok(active
        .into_iter()
        .map(|o| observe(&hist, o, &cfg.sim))
        .collect())
}

/// All datasets of the suite, graph by graph.
pub fn generate_datasets(cfg: &SuiteConfig) -> Result<Vec<ObservationTrace>> {
    cfg.validate()?;
    let per_graph: Vec<Vec<ObservationTrace>> = (0..cfg.graphs)
        .into_par_iter()
        .map(|g| graph_traces(cfg, g))
        .collect::<Result<_>>()?;
    Ok(per_graph.into_iter().flatten().collect())
}

/// Sliding occupancy windows of a trace; with `periodic_only`, just those
/// whose input repeats exactly with the configured period.
pub fn sliding_windows(trace: &ObservationTrace, cfg: &SuiteConfig) -> Vec<OccupancySample> {
    let (ell, t, p) = (cfg.input_len, cfg.horizon, cfg.sim.period);
    (0..=trace.len().saturating_sub(ell + t))
        .filter(|&a| !cfg.periodic_only || (a..a + ell - p).all(|r| trace.co[r] == trace.co[r + p]))
        .map(|a| OccupancySample {
            x: Matrix::from_bits(&trace.co[a..a + ell]),
            y: Matrix::from_bits(&trace.co[a + ell..a + ell + t]),
            period: p,
        })
        .collect()
}

impl SuiteConfig {
    pub fn occupancy_training(&self) -> OccupancyTraining {
        OccupancyTraining {
            epochs: self.epochs_occupancy,
            batch_size: self.batch_size,
            learning_rate: self.lr_occupancy,
            align_weight: self.align_weight,
            seed: self.sim.seed,
        }
    }

    pub fn power_training(&self) -> PowerTraining {
        PowerTraining {
            heads: self.heads,
            d_model: self.d_model,
            epochs: self.epochs_power,
            batch_size: self.batch_power,
            learning_rate: self.lr_power,
            scaling: self.scaling,
            seed: self.sim.seed,
        }
    }
}

/// Phase-1 training set from one trace: its sliding windows labelled with
/// the configured period, plus channel-relabeled copies.
pub fn occupancy_training_set(trace: &ObservationTrace, cfg: &SuiteConfig) -> Vec<OccupancySample> {
    let windows = sliding_windows(trace, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sim.seed ^ 0x5EED);
    let mut samples = permute_channels(&windows, cfg.relabel_copies, &mut rng);
    samples.extend(windows);
    samples
}

/// Result of one integrated suite.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    /// Index of the dataset both models were trained on.
    pub train_index: usize,
    pub occupancy: OccupancyModel,
    pub power: PowerModel,
    pub occupancy_loss: Vec<f64>,
    pub power_loss: Vec<f64>,
    /// One report per test dataset, in dataset order.
    pub reports: Vec<PredictionReport>,
}

impl SuiteOutcome {
    /// Tallies over every bit of every test dataset.
    pub fn totals(&self) -> BitCounts {
        let mut c = BitCounts::default();
        for r in &self.reports {
            c.add(&r.counts);
        }
        c
    }

    /// Bit-weighted metrics, the headline aggregate.
    pub fn bit_weighted(&self) -> Metrics {
        self.totals().metrics()
    }

    /// Mean of the per-dataset metrics over datasets with at least one
    /// predicted block.
    pub fn per_dataset(&self) -> Option<Metrics> {
        let m: Vec<Metrics> = self
            .reports
            .iter()
            .filter(|r| r.counts.total > 0)
            .map(|r| r.metrics)
            .collect();
        Metrics::mean(&m)
    }

    pub fn unpredictable_blocks(&self) -> usize {
        self.reports.iter().map(|r| r.unpredictable_blocks).sum()
    }
}

/// Trains both models on dataset `train_index` and runs the pipeline on
/// all the others.
pub fn run_suite_on(
    cfg: &SuiteConfig,
    datasets: &[ObservationTrace],
    train_index: usize,
) -> Result<SuiteOutcome> {
    cfg.validate()?;
    let train = datasets
        .get(train_index)
        .ok_or_else(|| Error::InvalidConfig(format!("no dataset {train_index} to train on")))?;
    let samples = occupancy_training_set(train, cfg);
    if samples.is_empty() {
        return Err(Error::InvalidConfig(
            "training dataset yields no occupancy window".into(),
        ));
    }
    let (occupancy, occupancy_loss) = train_occupancy_model(&samples, &cfg.occupancy_training())?;
    let power_samples = trace_samples(train, cfg.sim.period, cfg.window)?;
    let (power, power_loss) = train_power_model(&power_samples, &cfg.power_training())?;
    let reports = datasets
        .par_iter()
        .enumerate()
        .filter(|&(i, _)| i != train_index)
        .map(|(_, t)| {
            let mut r = run_integrated(t, &occupancy, &power)?;
            r.mobility = Some(cfg.mobility);
            r.bounded = Some(cfg.sim.bounded);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteOutcome {
        train_index,
        occupancy,
        power,
        occupancy_loss,
        power_loss,
        reports,
    })
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    run_suite_on(cfg, &generate_datasets(cfg)?, 0)
}
