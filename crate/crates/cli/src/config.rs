use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use chanpred::netsim::{Mobility, SimConfig};
use chanpred::pipeline::SuiteConfig;
use chanpred::power::{PowerScaling, PowerTraining, DEFAULT_D_MODEL, DEFAULT_INCREMENT_SCALE};

/// Name of the resolved configuration `gen` stores in the output directory.
pub const STORED_CONFIG: &str = "experiment.conf";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// Static windows with seen and unseen hopping periods.
    Occupancy,
    /// Per-link power series of mobile networks.
    Power,
    /// Both phases on mobile observation traces.
    Integrated,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Occupancy => "occupancy",
            Experiment::Power => "power",
            Experiment::Integrated => "integrated",
        })
    }
}

impl FromStr for Experiment {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "occupancy" => Ok(Experiment::Occupancy),
            "power" => Ok(Experiment::Power),
            "integrated" => Ok(Experiment::Integrated),
            other => {
                bail!("unknown experiment '{other}' (expected occupancy, power or integrated)")
            }
        }
    }
}

/// Every setting of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub out: PathBuf,
    pub workers: usize,
    pub sim: SimConfig,
    pub mobility: Mobility,
    /// Test graphs (power) or all graphs (integrated).
    pub graphs: usize,
    /// Training graphs of the power experiment.
    pub train_graphs: usize,
    pub observers: usize,
    pub slots: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub train_periods: Vec<usize>,
    pub unseen_periods: Vec<usize>,
    pub input_len: usize,
    pub horizon: usize,
    pub window: usize,
    pub heads: usize,
    pub d_model: usize,
    pub epochs_occupancy: usize,
    pub epochs_power: usize,
    pub lr_occupancy: f64,
    pub lr_power: f64,
    pub batch_occupancy: usize,
    pub batch_power: usize,
    pub align_weight: f64,
    pub increment_scale: f64,
    pub relabel_copies: usize,
    pub periodic_only: bool,
}

/// Configuration keys, in the order they are listed and stored.
pub const KEYS: &[(&str, &str)] = &[
    ("experiment", "occupancy, power or integrated"),
    ("out", "output directory"),
    ("seed", "master RNG seed"),
    ("workers", "worker threads"),
    ("nodes", "nodes per graph"),
    (
        "density",
        "expected neighbors within the transmission radius",
    ),
    ("tx-radius", "transmission radius, m"),
    ("interference-radius", "interference radius, m"),
    ("sensing-radius", "sensing radius, m"),
    ("channels", "channel count"),
    ("period", "hopping period of mobile networks, slots"),
    ("smoothness", "smooth random waypoint ratio"),
    ("flows", "routed flows per graph"),
    ("bounded", "nodes stop at the region boundary"),
    ("slot-dt", "seconds per slot"),
    ("mobility", "fm, rwp, srwp or static"),
    ("graphs", "test graphs (power) or graphs (integrated)"),
    ("train-graphs", "training graphs (power)"),
    ("observers", "observers per graph (integrated)"),
    ("slots", "slots per trace"),
    ("train-samples", "training windows (occupancy)"),
    ("test-samples", "test windows per split (occupancy)"),
    (
        "train-periods",
        "comma-separated training periods (occupancy)",
    ),
    (
        "unseen-periods",
        "comma-separated unseen test periods (occupancy)",
    ),
    ("input-len", "observed occupancy rows"),
    ("horizon", "predicted occupancy rows"),
    ("window", "power sequence length"),
    ("heads", "power model heads"),
    ("d-model", "power model width"),
    ("epochs-occupancy", "phase-1 epochs"),
    ("epochs-power", "phase-2 epochs"),
    ("lr-occupancy", "phase-1 learning rate"),
    ("lr-power", "phase-2 learning rate"),
    ("batch-occupancy", "phase-1 batch size"),
    ("batch-power", "phase-2 batch size"),
    (
        "align-weight",
        "weight of the phase-1 attention alignment loss",
    ),
    ("increment-scale", "phase-2 increment scale, dB"),
    (
        "relabel-copies",
        "channel-relabeled copies per phase-1 window (integrated)",
    ),
    (
        "periodic-only",
        "train phase 1 on exactly periodic windows only (integrated)",
    ),
];

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = ExperimentConfig {
            experiment,
            out: PathBuf::from("out"),
            workers: 1,
            sim: SimConfig::default(),
            mobility: Mobility::Fixed,
            graphs: 20,
            train_graphs: 5,
            observers: 1,
            slots: 60,
            train_samples: 200,
            test_samples: 200,
            train_periods: vec![5, 7, 9],
            unseen_periods: vec![3, 4, 6, 8],
            input_len: 40,
            horizon: 40,
            window: 30,
            heads: 3,
            d_model: DEFAULT_D_MODEL,
            epochs_occupancy: 100,
            epochs_power: 500,
            lr_occupancy: 1e-2,
            lr_power: 3e-3,
            batch_occupancy: 8,
            batch_power: 16,
            align_weight: 1.0,
            increment_scale: DEFAULT_INCREMENT_SCALE,
            relabel_copies: 3,
            periodic_only: false,
        };
        if experiment == Experiment::Integrated {
            let suite = SuiteConfig::default();
            c.sim = suite.sim;
            c.graphs = suite.graphs;
            c.observers = suite.observers;
            c.slots = suite.slots;
            c.window = suite.window;
            c.heads = suite.heads;
            c.batch_power = suite.batch_power;
        }
        c
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| anyhow!("bad value '{value}' for '{key}'"))
        }
        fn list(key: &str, value: &str) -> Result<Vec<usize>> {
            value.split(',').map(|v| num(key, v.trim())).collect()
        }
        let v = value.trim();
        match key {
            "experiment" => self.experiment = v.parse()?,
            "out" => self.out = PathBuf::from(v),
            "seed" => self.sim.seed = num(key, v)?,
            "workers" => self.workers = num(key, v)?,
            "nodes" => self.sim.nodes = num(key, v)?,
            "density" => self.sim.density = num(key, v)?,
            "tx-radius" => self.sim.tx_radius = num(key, v)?,
            "interference-radius" => self.sim.interference_radius = num(key, v)?,
            "sensing-radius" => self.sim.sensing_radius = num(key, v)?,
            "channels" => self.sim.channels = num(key, v)?,
            "period" => self.sim.period = num(key, v)?,
            "smoothness" => self.sim.smoothness = num(key, v)?,
            "flows" => self.sim.flows = num(key, v)?,
            "bounded" => self.sim.bounded = num(key, v)?,
            "slot-dt" => self.sim.slot_dt = num(key, v)?,
            "mobility" => self.mobility = v.parse()?,
            "graphs" => self.graphs = num(key, v)?,
            "train-graphs" => self.train_graphs = num(key, v)?,
            "observers" => self.observers = num(key, v)?,
            "slots" => self.slots = num(key, v)?,
            "train-samples" => self.train_samples = num(key, v)?,
            "test-samples" => self.test_samples = num(key, v)?,
            "train-periods" => self.train_periods = list(key, v)?,
            "unseen-periods" => self.unseen_periods = list(key, v)?,
            "input-len" => self.input_len = num(key, v)?,
            "horizon" => self.horizon = num(key, v)?,
            "window" => self.window = num(key, v)?,
            "heads" => self.heads = num(key, v)?,
            "d-model" => self.d_model = num(key, v)?,
            "epochs-occupancy" => self.epochs_occupancy = num(key, v)?,
            "epochs-power" => self.epochs_power = num(key, v)?,
            "lr-occupancy" => self.lr_occupancy = num(key, v)?,
            "lr-power" => self.lr_power = num(key, v)?,
            "batch-occupancy" => self.batch_occupancy = num(key, v)?,
            "batch-power" => self.batch_power = num(key, v)?,
            "align-weight" => self.align_weight = num(key, v)?,
            "increment-scale" => self.increment_scale = num(key, v)?,
            "relabel-copies" => self.relabel_copies = num(key, v)?,
            "periodic-only" => self.periodic_only = num(key, v)?,
            other => bail!("unknown configuration key '{other}'"),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> String {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        match key {
            "experiment" => self.experiment.to_string(),
            "out" => self.out.display().to_string(),
            "seed" => self.sim.seed.to_string(),
            "workers" => self.workers.to_string(),
            "nodes" => self.sim.nodes.to_string(),
            "density" => self.sim.density.to_string(),
            "tx-radius" => self.sim.tx_radius.to_string(),
            "interference-radius" => self.sim.interference_radius.to_string(),
            "sensing-radius" => self.sim.sensing_radius.to_string(),
            "channels" => self.sim.channels.to_string(),
            "period" => self.sim.period.to_string(),
            "smoothness" => self.sim.smoothness.to_string(),
            "flows" => self.sim.flows.to_string(),
            "bounded" => self.sim.bounded.to_string(),
            "slot-dt" => self.sim.slot_dt.to_string(),
            "mobility" => self.mobility.to_string(),
            "graphs" => self.graphs.to_string(),
            "train-graphs" => self.train_graphs.to_string(),
            "observers" => self.observers.to_string(),
            "slots" => self.slots.to_string(),
            "train-samples" => self.train_samples.to_string(),
            "test-samples" => self.test_samples.to_string(),
            "train-periods" => join(&self.train_periods),
            "unseen-periods" => join(&self.unseen_periods),
            "input-len" => self.input_len.to_string(),
            "horizon" => self.horizon.to_string(),
            "window" => self.window.to_string(),
            "heads" => self.heads.to_string(),
            "d-model" => self.d_model.to_string(),
            "epochs-occupancy" => self.epochs_occupancy.to_string(),
            "epochs-power" => self.epochs_power.to_string(),
            "lr-occupancy" => self.lr_occupancy.to_string(),
            "lr-power" => self.lr_power.to_string(),
            "batch-occupancy" => self.batch_occupancy.to_string(),
            "batch-power" => self.batch_power.to_string(),
            "align-weight" => self.align_weight.to_string(),
            "increment-scale" => self.increment_scale.to_string(),
            "relabel-copies" => self.relabel_copies.to_string(),
            "periodic-only" => self.periodic_only.to_string(),
            other => unreachable!("unlisted key {other}"),
        }
    }

    /// Builds a configuration from ordered settings; later settings win.
    /// The experiment named last picks the defaults.
    pub fn from_settings(settings: &[(String, String)]) -> Result<Self> {
        let experiment = match settings.iter().rev().find(|(k, _)| k == "experiment") {
            Some((_, v)) => v.trim().parse()?,
            None => Experiment::Integrated,
        };
        let mut c = ExperimentConfig::defaults(experiment);
        for (k, v) in settings {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// `key = value` lines of every setting.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|(k, _)| format!("{k} = {}\n", self.get(k)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if self.workers == 0 {
            bail!("workers must be >= 1");
        }
        match self.experiment {
            Experiment::Occupancy => {
                if self.train_periods.is_empty()
                    || self
                        .train_periods
                        .iter()
                        .chain(&self.unseen_periods)
                        .any(|&p| p == 0)
                {
                    bail!("occupancy periods must be non-empty and >= 1");
                }
                let longest = self
                    .train_periods
                    .iter()
                    .chain(&self.unseen_periods)
                    .max()
                    .copied()
                    .unwrap_or(1);
                if self.input_len < 2 * longest || self.horizon == 0 {
                    bail!(
                        "input length {} must cover two of the longest period {longest}",
                        self.input_len
                    );
                }
                if self.batch_occupancy == 0 {
                    bail!("batch size must be >= 1");
                }
            }
            Experiment::Power => {
                if self.window < 2 || self.heads == 0 || self.d_model == 0 || self.batch_power == 0
                {
                    bail!("power model needs window >= 2, heads, width and batch size >= 1");
                }
                if self.slots <= self.window {
                    bail!("slots must exceed the window length");
                }
            }
            Experiment::Integrated => self.suite().validate()?,
        }
        Ok(())
    }

    pub fn scaling(&self) -> PowerScaling {
        PowerScaling::Increments {
            scale: self.increment_scale,
        }
    }

    pub fn suite(&self) -> SuiteConfig {
        SuiteConfig {
            sim: self.sim.clone(),
            mobility: self.mobility,
            graphs: self.graphs,
            observers: self.observers,
            slots: self.slots,
            input_len: self.input_len,
            horizon: self.horizon,
            window: self.window,
            heads: self.heads,
            d_model: self.d_model,
            epochs_occupancy: self.epochs_occupancy,
            epochs_power: self.epochs_power,
            lr_occupancy: self.lr_occupancy,
            lr_power: self.lr_power,
            batch_size: self.batch_occupancy,
            batch_power: self.batch_power,
            align_weight: self.align_weight,
            scaling: self.scaling(),
            relabel_copies: self.relabel_copies,
            periodic_only: self.periodic_only,
        }
    }

    pub fn power_training(&self) -> PowerTraining {
        PowerTraining {
            heads: self.heads,
            d_model: self.d_model,
            epochs: self.epochs_power,
            batch_size: self.batch_power,
            learning_rate: self.lr_power,
            scaling: self.scaling(),
            seed: self.sim.seed,
        }
    }
}

/// Settings of a `key = value` file. Blank lines and `#` comments are
/// skipped; keys may use `-` or `_`.
pub fn read_settings(path: &Path) -> Result<Vec<(String, String)>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_settings(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn parse_settings(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
        let key = k.trim().replace('_', "-");
        if !KEYS.iter().any(|(name, _)| *name == key) {
            bail!("line {}: unknown key '{}'", i + 1, k.trim());
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}
