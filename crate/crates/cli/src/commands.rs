use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chanpred::netsim::{
    read_trace, received_power, write_trace, Mobility, ObservationTrace, SimConfig, TraceMeta,
    NOISE_FLOOR_DBM,
};
use chanpred::nn::Matrix;
use chanpred::occupancy::{
    score_occupancy, score_standard, static_trace, train_occupancy_model, train_standard_attention,
    window_sample, OccupancyModel, OccupancySample, OccupancyTraining, StandardAttention,
};
use chanpred::pipeline::{
    graph_traces, occupancy_training_set, run_integrated, BitCounts, Metrics, PredictionReport,
};
use chanpred::power::{
    link_series, region_accuracy, series_samples, trace_samples, train_power_model, PowerModel,
    PowerSample,
};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig, STORED_CONFIG};
use crate::manifest::{Entry, Manifest, MANIFEST};

pub const PHASE1_CHECKPOINT: &str = "phase1.ckpt";
pub const PHASE2_CHECKPOINT: &str = "phase2.ckpt";
pub const BASELINE_CHECKPOINT: &str = "baseline.ckpt";

/// Window length and period of the attention heatmap dump.
const HEATMAP_LEN: usize = 20;
const HEATMAP_PERIOD: usize = 7;

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    write_file(path, w.into_inner()?)
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

/// Generates the experiment's data under `cfg.out` and returns the manifest.
pub fn cmd_gen(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    let dir = &cfg.out;
    create_dir(dir)?;
    let manifest = match cfg.experiment {
        Experiment::Occupancy => gen_occupancy(cfg, dir)?,
        Experiment::Power => gen_power(cfg, dir)?,
        Experiment::Integrated => gen_integrated(cfg, dir)?,
    };
    write_file(&dir.join(STORED_CONFIG), cfg.to_text())?;
    write_file(&dir.join(MANIFEST), manifest.to_csv()?)?;
    info!(
        "generated {} files in {}",
        manifest.entries.len(),
        dir.display()
    );
    Ok(manifest)
}

fn gen_occupancy(cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    create_dir(&dir.join("windows"))?;
    let slots = cfg.input_len + cfg.horizon;
    let splits = [
        ("train", &cfg.train_periods, cfg.train_samples),
        ("seen", &cfg.train_periods, cfg.test_samples),
        ("unseen", &cfg.unseen_periods, cfg.test_samples),
    ];
    let mut entries = Vec::new();
    for (stream, (split, periods, count)) in splits.into_iter().enumerate() {
        if periods.is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.sim.seed);
        rng.set_stream(stream as u64 + 1);
        for i in 0..count {
            let period = periods[i % periods.len()];
            let trace = static_trace(&cfg.sim, period, slots, &mut rng)?;
            let sim = SimConfig {
                period,
                ..cfg.sim.clone()
            };
            let mut meta = TraceMeta::describe(&sim, Mobility::Static, &trace);
            meta.set("split", split);
            let rel = PathBuf::from(format!("windows/{split}_{i:04}.csv"));
            write_trace(&dir.join(&rel), &trace, &meta)?;
            entries.push(Entry {
                path: rel,
                split: split.to_string(),
                mobility: Mobility::Static.to_string(),
                bounded: cfg.sim.bounded,
                graph: i,
                observer: trace.observer,
                period,
            });
        }
    }
    Ok(Manifest { entries })
}

fn gen_power(cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    create_dir(&dir.join("series"))?;
    let suite = cfg.suite();
    let total = cfg.train_graphs + cfg.graphs;
    let all: Vec<_> = (0..total)
        .into_par_iter()
        .map(|g| {
            let mut rng = ChaCha8Rng::seed_from_u64(suite.graph_seed(g));
            link_series(&cfg.sim, cfg.mobility, g, cfg.slots, &mut rng)
        })
        .collect::<chanpred::Result<_>>()?;
    let mut entries = Vec::new();
    for (g, series) in all.into_iter().enumerate() {
        let rel = PathBuf::from(format!("series/g{g:03}.csv"));
        let rows: Vec<Vec<String>> = series
            .iter()
            .flat_map(|s| {
                s.values
                    .iter()
                    .enumerate()
                    .map(|(k, v)| vec![s.transmitter.to_string(), k.to_string(), v.to_string()])
            })
            .collect();
        write_csv(&dir.join(&rel), &["transmitter", "slot", "dbm"], &rows)?;
        entries.push(Entry {
            path: rel,
            split: if g < cfg.train_graphs {
                "train"
            } else {
                "test"
            }
            .to_string(),
            mobility: cfg.mobility.to_string(),
            bounded: cfg.sim.bounded,
            graph: g,
            observer: series.first().map_or(0, |s| s.observer),
            period: 1,
        });
    }
    Ok(Manifest { entries })
}

fn gen_integrated(cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    create_dir(&dir.join("traces"))?;
    let suite = cfg.suite();
    let per_graph: Vec<Vec<ObservationTrace>> = (0..cfg.graphs)
        .into_par_iter()
        .map(|g| graph_traces(&suite, g))
        .collect::<chanpred::Result<_>>()?;
    let mut entries = Vec::new();
    for (g, traces) in per_graph.into_iter().enumerate() {
        for (k, trace) in traces.into_iter().enumerate() {
            let split = if entries.is_empty() { "train" } else { "test" };
            let mut meta = TraceMeta::describe(&cfg.sim, cfg.mobility, &trace);
            meta.set("graph", g);
            meta.set("split", split);
            let rel = PathBuf::from(format!("traces/g{g:03}_o{k}.csv"));
            write_trace(&dir.join(&rel), &trace, &meta)?;
            entries.push(Entry {
                path: rel,
                split: split.to_string(),
                mobility: cfg.mobility.to_string(),
                bounded: cfg.sim.bounded,
                graph: g,
                observer: trace.observer,
                period: cfg.sim.period,
            });
        }
    }
    Ok(Manifest { entries })
}

fn read_entry_trace(dir: &Path, e: &Entry) -> Result<ObservationTrace> {
    let path = dir.join(&e.path);
    Ok(read_trace(&path)
        .with_context(|| format!("loading {}", path.display()))?
        .0)
}

/// Power series of one file, per transmitter in file order.
fn read_series(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        let bad = || format!("{} line {}: bad record", path.display(), i + 2);
        if rec.len() != 3 {
            bail!("{}", bad());
        }
        let tx: usize = rec[0].parse().with_context(bad)?;
        let v: f64 = rec[2].parse().with_context(bad)?;
        match out.last_mut() {
            Some((t, vals)) if *t == tx => vals.push(v),
            _ => out.push((tx, vec![v])),
        }
    }
    Ok(out)
}

fn split_samples(
    cfg: &ExperimentConfig,
    dir: &Path,
    manifest: &Manifest,
    split: &str,
) -> Result<Vec<OccupancySample>> {
    manifest
        .split(split)
        .map(|e| {
            Ok(window_sample(
                &read_entry_trace(dir, e)?,
                cfg.input_len,
                e.period,
            )?)
        })
        .collect()
}

fn power_samples(
    cfg: &ExperimentConfig,
    dir: &Path,
    manifest: &Manifest,
    split: &str,
) -> Result<Vec<PowerSample>> {
    let mut out = Vec::new();
    for e in manifest.split(split) {
        for (_, values) in read_series(&dir.join(&e.path))? {
            out.extend(series_samples(&values, cfg.window));
        }
    }
    Ok(out)
}

fn write_loss(path: &Path, log: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = log
        .iter()
        .enumerate()
        .map(|(i, l)| vec![(i + 1).to_string(), num(*l)])
        .collect();
    write_csv(path, &["epoch", "loss"], &rows)
}

fn occupancy_training(cfg: &ExperimentConfig) -> OccupancyTraining {
    OccupancyTraining {
        epochs: cfg.epochs_occupancy,
        batch_size: cfg.batch_occupancy,
        learning_rate: cfg.lr_occupancy,
        align_weight: cfg.align_weight,
        seed: cfg.sim.seed,
    }
}

fn train_trace(dir: &Path, manifest: &Manifest) -> Result<ObservationTrace> {
    let entry = manifest
        .split("train")
        .next()
        .with_context(|| format!("{} lists no training dataset", dir.join(MANIFEST).display()))?;
    read_entry_trace(dir, entry)
}

/// Trains one model on the training split and writes its checkpoint and
/// loss log. Returns the checkpoint path.
pub fn cmd_train(cfg: &ExperimentConfig, phase: u8, baseline: bool) -> Result<PathBuf> {
    cfg.validate()?;
    let dir = &cfg.out;
    let manifest = Manifest::read(dir)?;
    if baseline && (phase != 1 || cfg.experiment != Experiment::Occupancy) {
        bail!(
            "the standard-attention baseline exists for phase 1 of the occupancy experiment only"
        );
    }
    let (ckpt, loss_path) = match (baseline, phase) {
        (true, _) => (BASELINE_CHECKPOINT, "baseline_loss.csv"),
        (false, 1) => (PHASE1_CHECKPOINT, "phase1_loss.csv"),
        (false, 2) => (PHASE2_CHECKPOINT, "phase2_loss.csv"),
        _ => bail!("phase must be 1 or 2, got {phase}"),
    };
    let ckpt = dir.join(ckpt);
    let log = match (cfg.experiment, phase) {
        (Experiment::Occupancy, 1) => {
            let samples = split_samples(cfg, dir, &manifest, "train")?;
            if samples.is_empty() {
                bail!("{} lists no training window", dir.join(MANIFEST).display());
            }
            if baseline {
                let (m, log) = train_standard_attention(&samples, &occupancy_training(cfg))?;
                m.save(&ckpt)?;
                log
            } else {
                let (m, log) = train_occupancy_model(&samples, &occupancy_training(cfg))?;
                m.save(&ckpt)?;
                log
            }
        }
        (Experiment::Integrated, 1) => {
            let suite = cfg.suite();
            let samples = occupancy_training_set(&train_trace(dir, &manifest)?, &suite);
            if samples.is_empty() {
                bail!("the training dataset is shorter than one occupancy window");
            }
            let (m, log) = train_occupancy_model(&samples, &suite.occupancy_training())?;
            m.save(&ckpt)?;
            log
        }
        (Experiment::Integrated, 2) => {
            let suite = cfg.suite();
            let samples = trace_samples(&train_trace(dir, &manifest)?, cfg.sim.period, cfg.window)?;
            let (m, log) = train_power_model(&samples, &suite.power_training())?;
            m.save(&ckpt)?;
            log
        }
        (Experiment::Power, 2) => {
            let samples = power_samples(cfg, dir, &manifest, "train")?;
            if samples.is_empty() {
                bail!(
                    "the training split of {} holds no power sample",
                    dir.join(MANIFEST).display()
                );
            }
            let (m, log) = train_power_model(&samples, &cfg.power_training())?;
            m.save(&ckpt)?;
            log
        }
        (e, p) => bail!("the {e} experiment has no phase-{p} model"),
    };
    write_loss(&dir.join(loss_path), &log)?;
    info!("trained {} for {} epochs", ckpt.display(), log.len());
    Ok(ckpt)
}

fn load_occupancy(cfg: &ExperimentConfig, path: &Path) -> Result<OccupancyModel> {
    let m = OccupancyModel::load(path).with_context(|| format!("loading {}", path.display()))?;
    if m.channels() != cfg.sim.channels || m.input_len != cfg.input_len || m.horizon != cfg.horizon
    {
        bail!(
            "{} holds a model for {} channels, input {} and horizon {}, but the configuration asks for {}, {} and {}",
            path.display(),
            m.channels(),
            m.input_len,
            m.horizon,
            cfg.sim.channels,
            cfg.input_len,
            cfg.horizon
        );
    }
    Ok(m)
}

fn load_power(cfg: &ExperimentConfig, path: &Path) -> Result<PowerModel> {
    let m = PowerModel::load(path).with_context(|| format!("loading {}", path.display()))?;
    if m.window() != cfg.window {
        bail!(
            "{} holds a model for window {}, but the configuration asks for {}",
            path.display(),
            m.window(),
            cfg.window
        );
    }
    Ok(m)
}

/// Scores the trained models on the test splits and writes the result
/// tables and figure data. Returns the files written.
pub fn cmd_eval(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let dir = &cfg.out;
    let manifest = Manifest::read(dir)?;
    match cfg.experiment {
        Experiment::Occupancy => eval_occupancy(cfg, dir, &manifest),
        Experiment::Power => eval_power(cfg, dir, &manifest),
        Experiment::Integrated => eval_integrated(cfg, dir, &manifest),
    }
}

fn eval_occupancy(cfg: &ExperimentConfig, dir: &Path, manifest: &Manifest) -> Result<Vec<PathBuf>> {
    let model = load_occupancy(cfg, &dir.join(PHASE1_CHECKPOINT))?;
    let baseline_path = dir.join(BASELINE_CHECKPOINT);
    let baseline = if baseline_path.exists() {
        Some(
            StandardAttention::load(&baseline_path)
                .with_context(|| format!("loading {}", baseline_path.display()))?,
        )
    } else {
        None
    };
    let splits = ["train", "seen", "unseen"];
    let mut windows = Vec::new();
    let mut p1 = Vec::new();
    let mut std = Vec::new();
    for split in splits {
        let samples = split_samples(cfg, dir, manifest, split)?;
        for (e, s) in manifest.split(split).zip(&samples) {
            let (estimate, acc) = match model.predict(&s.x) {
                Ok(p) => (
                    p.estimate.period.to_string(),
                    chanpred::occupancy::bit_accuracy(&p.bits, &s.y),
                ),
                Err(chanpred::Error::NoPeriod) => (String::new(), 0.0),
                Err(err) => return Err(err.into()),
            };
            windows.push(vec![
                e.path.display().to_string(),
                split.to_string(),
                e.period.to_string(),
                estimate,
                num(acc),
            ]);
        }
        p1.push(score_occupancy(&model, &samples)?);
        if let Some(b) = &baseline {
            std.push(score_standard(b, &samples)?);
        }
    }
    let windows_path = dir.join("windows.csv");
    write_csv(
        &windows_path,
        &["path", "split", "period", "estimated_period", "accuracy"],
        &windows,
    )?;
    let header = [
        "model",
        "train_accuracy",
        "seen_accuracy",
        "unseen_accuracy",
        "no_period_windows",
    ];
    let row = |name: &str, scores: &[chanpred::occupancy::OccupancyScore]| {
        let mut r = vec![name.to_string()];
        r.extend(scores.iter().map(|s| num(s.accuracy())));
        r.push(
            scores
                .iter()
                .map(|s| s.no_period)
                .sum::<usize>()
                .to_string(),
        );
        r
    };
    let mut rows = vec![row("attention_period", &p1)];
    if baseline.is_some() {
        rows.push(row("standard_attention", &std));
    }
    let table = dir.join("occupancy_accuracy.csv");
    write_csv(&table, &header, &rows)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sim.seed);
    rng.set_stream(99);
    let trace = static_trace(&cfg.sim, HEATMAP_PERIOD, HEATMAP_LEN, &mut rng)?;
    let heat = model.attention(&Matrix::from_bits(&trace.co))?.weights;
    let heat_header: Vec<String> = (0..HEATMAP_LEN).map(|c| format!("c{c}")).collect();
    let heat_rows: Vec<Vec<String>> = (0..heat.rows())
        .map(|r| heat.row(r).iter().map(|v| num(*v)).collect())
        .collect();
    let heatmap = dir.join("heatmap.csv");
    write_csv(
        &heatmap,
        &heat_header.iter().map(String::as_str).collect::<Vec<_>>(),
        &heat_rows,
    )?;
    Ok(vec![table, windows_path, heatmap])
}

fn eval_power(cfg: &ExperimentConfig, dir: &Path, manifest: &Manifest) -> Result<Vec<PathBuf>> {
    let model = load_power(cfg, &dir.join(PHASE2_CHECKPOINT))?;
    let theta = received_power(cfg.sim.interference_radius);
    let train = power_samples(cfg, dir, manifest, "train")?;
    let test = power_samples(cfg, dir, manifest, "test")?;
    let table = dir.join("power_accuracy.csv");
    write_csv(
        &table,
        &[
            "mobility",
            "bounded",
            "train_accuracy",
            "test_accuracy",
            "train_samples",
            "test_samples",
        ],
        &[vec![
            cfg.mobility.to_string(),
            cfg.sim.bounded.to_string(),
            num(region_accuracy(&model, &train, theta)?),
            num(region_accuracy(&model, &test, theta)?),
            train.len().to_string(),
            test.len().to_string(),
        ]],
    )?;
    let mut rows = Vec::new();
    if let Some(e) = manifest.split("test").next() {
        let w = cfg.window;
        for (tx, values) in read_series(&dir.join(&e.path))? {
            for end in w - 1..values.len().saturating_sub(1) {
                let seq = &values[end + 1 - w..=end];
                if seq.iter().any(|&v| v <= NOISE_FLOOR_DBM) {
                    continue;
                }
                rows.push(vec![
                    e.graph.to_string(),
                    tx.to_string(),
                    (end + 1).to_string(),
                    num(values[end + 1]),
                    num(model.predict(seq)?),
                    num(theta),
                ]);
            }
        }
    }
    let traj = dir.join("trajectories.csv");
    write_csv(
        &traj,
        &[
            "graph",
            "transmitter",
            "slot",
            "true_dbm",
            "predicted_dbm",
            "theta",
        ],
        &rows,
    )?;
    Ok(vec![table, traj])
}

fn metric_row(agg: &str, cfg: &ExperimentConfig, m: Option<Metrics>) -> Vec<String> {
    let mut r = vec![
        agg.to_string(),
        cfg.mobility.to_string(),
        cfg.sim.bounded.to_string(),
    ];
    match m {
        Some(m) => r.extend([
            num(m.accuracy_raw),
            num(m.fp_rate),
            num(m.fn_rate),
            num(m.accuracy_corrected),
            opt(m.fp_correction),
            opt(m.fn_correction),
            opt(m.correction_error),
        ]),
        None => r.extend(std::iter::repeat_n(String::new(), 7)),
    }
    r
}

const METRIC_COLUMNS: [&str; 7] = [
    "accuracy",
    "fp",
    "fn",
    "accuracy_corrected",
    "fp_correction",
    "fn_correction",
    "correction_error",
];

fn eval_integrated(
    cfg: &ExperimentConfig,
    dir: &Path,
    manifest: &Manifest,
) -> Result<Vec<PathBuf>> {
    let m1 = load_occupancy(cfg, &dir.join(PHASE1_CHECKPOINT))?;
    let m2 = load_power(cfg, &dir.join(PHASE2_CHECKPOINT))?;
    let tests: Vec<&Entry> = manifest.split("test").collect();
    let reports: Vec<PredictionReport> = tests
        .par_iter()
        .map(|e| Ok(run_integrated(&read_entry_trace(dir, e)?, &m1, &m2)?))
        .collect::<Result<_>>()?;

    let mut header = vec!["path", "graph", "observer", "bits", "unpredictable_blocks"];
    header.extend(METRIC_COLUMNS);
    let rows: Vec<Vec<String>> = tests
        .iter()
        .zip(&reports)
        .map(|(e, r)| {
            let m = r.metrics;
            vec![
                e.path.display().to_string(),
                e.graph.to_string(),
                e.observer.to_string(),
                r.counts.total.to_string(),
                r.unpredictable_blocks.to_string(),
                num(m.accuracy_raw),
                num(m.fp_rate),
                num(m.fn_rate),
                num(m.accuracy_corrected),
                opt(m.fp_correction),
                opt(m.fn_correction),
                opt(m.correction_error),
            ]
        })
        .collect();
    let datasets = dir.join("datasets.csv");
    write_csv(&datasets, &header, &rows)?;

    let mut totals = BitCounts::default();
    for r in &reports {
        totals.add(&r.counts);
    }
    let bit_weighted = (totals.total > 0).then(|| totals.metrics());
    let per_dataset: Vec<Metrics> = reports
        .iter()
        .filter(|r| r.counts.total > 0)
        .map(|r| r.metrics)
        .collect();
    let mut header = vec!["aggregation", "mobility", "bounded"];
    header.extend(METRIC_COLUMNS);
    let table = dir.join("integrated_accuracy.csv");
    write_csv(
        &table,
        &header,
        &[
            metric_row("bits", cfg, bit_weighted),
            metric_row("datasets", cfg, Metrics::mean(&per_dataset)),
        ],
    )?;
    Ok(vec![table, datasets])
}

/// Result tables `report` collects from run directories.
pub const TABLES: [&str; 3] = [
    "occupancy_accuracy.csv",
    "power_accuracy.csv",
    "integrated_accuracy.csv",
];

/// One merged table: file name, header and rows.
pub type Table = (String, Vec<String>, Vec<Vec<String>>);

/// Concatenates the result tables of several run directories, prefixed by
/// a `run` column. Returns `(file name, header, rows)` per table found.
pub fn cmd_report(dirs: &[PathBuf]) -> Result<Vec<Table>> {
    let mut tables: BTreeMap<&str, (Vec<String>, Vec<Vec<String>>)> = BTreeMap::new();
    for dir in dirs {
        if !dir.is_dir() {
            bail!("{} is not a directory", dir.display());
        }
        for name in TABLES {
            let path = dir.join(name);
            if !path.exists() {
                continue;
            }
            let mut r = csv::Reader::from_path(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let mut header = vec!["run".to_string()];
            header.extend(r.headers()?.iter().map(str::to_string));
            let entry = tables
                .entry(name)
                .or_insert_with(|| (header.clone(), Vec::new()));
            if entry.0 != header {
                bail!(
                    "{} does not match the columns of earlier {name} files",
                    path.display()
                );
            }
            for rec in r.records() {
                let rec = rec.with_context(|| format!("reading {}", path.display()))?;
                let mut row = vec![dir.display().to_string()];
                row.extend(rec.iter().map(str::to_string));
                entry.1.push(row);
            }
        }
    }
    if tables.is_empty() {
        bail!("no result table found; run `chanpred eval` first");
    }
    Ok(tables
        .into_iter()
        .map(|(n, (h, r))| (n.to_string(), h, r))
        .collect())
}

/// Column-aligned text rendering of a table.
pub fn render(header: &[String], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(String::len).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        let s: Vec<String> = cells
            .iter()
            .zip(&width)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        s.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    for r in rows {
        out += &line(r);
    }
    out
}
