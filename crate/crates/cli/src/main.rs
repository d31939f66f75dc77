//! Command-line front end: generate datasets, train the two predictors,
//! evaluate them and collect result tables.

mod commands;
mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Arg, ArgAction, ArgMatches, Command};

use config::{read_settings, ExperimentConfig, KEYS, STORED_CONFIG};

const BOOL_KEYS: [&str; 2] = ["bounded", "periodic-only"];

fn config_args() -> Vec<Arg> {
    let mut args = vec![Arg::new("config")
        .long("config")
        .value_name("FILE")
        .help("key = value settings file; flags override it")];
    for (key, help) in KEYS {
        let mut arg = Arg::new(*key).long(*key).value_name("VALUE").help(*help);
        if BOOL_KEYS.contains(key) {
            arg = arg.num_args(0..=1).default_missing_value("true");
        }
        args.push(arg);
    }
    args
}

fn cli() -> Command {
    Command::new("chanpred")
        .about("Channel occupancy prediction experiments")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(
            Command::new("gen")
                .about("Generate datasets and a manifest")
                .args(config_args()),
        )
        .subcommand(
            Command::new("train")
                .about("Train a model on the training split")
                .args(config_args())
                .arg(
                    Arg::new("phase")
                        .long("phase")
                        .required(true)
                        .value_parser(clap::value_parser!(u8).range(1..=2))
                        .help("1: occupancy model, 2: power model"),
                )
                .arg(
                    Arg::new("baseline")
                        .long("baseline")
                        .action(ArgAction::SetTrue)
                        .help(
                            "train the standard-attention comparator instead (occupancy, phase 1)",
                        ),
                ),
        )
        .subcommand(
            Command::new("eval")
                .about("Score trained models and write result tables")
                .args(config_args()),
        )
        .subcommand(
            Command::new("report")
                .about("Collect the result tables of several runs")
                .arg(
                    Arg::new("dirs")
                        .required(true)
                        .num_args(1..)
                        .value_name("DIR"),
                )
                .arg(
                    Arg::new("out")
                        .long("out")
                        .value_name("DIR")
                        .help("also write the merged tables here"),
                ),
        )
}

/// Resolves the configuration: settings stored by `gen` in the output
/// directory (unless `fresh`), then the `--config` file, then flags.
fn resolve(m: &ArgMatches, fresh: bool) -> Result<ExperimentConfig> {
    let mut flags = Vec::new();
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            flags.push((key.to_string(), v.clone()));
        }
    }
    let file = match m.get_one::<String>("config") {
        Some(p) => read_settings(Path::new(p))?,
        None => Vec::new(),
    };
    let mut settings = Vec::new();
    if !fresh {
        let out = flags
            .iter()
            .chain(&file)
            .rev()
            .find(|(k, _)| k == "out")
            .map(|(_, v)| PathBuf::from(v))
            .unwrap_or_else(|| ExperimentConfig::defaults(config::Experiment::Integrated).out);
        let stored = out.join(STORED_CONFIG);
        if stored.exists() {
            settings.extend(read_settings(&stored)?);
        }
    }
    settings.extend(file);
    settings.extend(flags);
    ExperimentConfig::from_settings(&settings).context("invalid configuration")
}

fn init_workers(cfg: &ExperimentConfig) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build_global()
        .context("starting worker threads")
}

fn run(m: &ArgMatches) -> Result<()> {
    match m.subcommand() {
        Some(("gen", sub)) => {
            let cfg = resolve(sub, true)?;
            init_workers(&cfg)?;
            let manifest = commands::cmd_gen(&cfg)?;
            print!("{}", manifest.to_csv()?);
        }
        Some(("train", sub)) => {
            let cfg = resolve(sub, false)?;
            init_workers(&cfg)?;
            let phase = *sub.get_one::<u8>("phase").expect("required");
            let ckpt = commands::cmd_train(&cfg, phase, sub.get_flag("baseline"))?;
            println!("{}", ckpt.display());
        }
        Some(("eval", sub)) => {
            let cfg = resolve(sub, false)?;
            init_workers(&cfg)?;
            for path in commands::cmd_eval(&cfg)? {
                println!("{}", path.display());
            }
        }
        Some(("report", sub)) => {
            let dirs: Vec<PathBuf> = sub
                .get_many::<String>("dirs")
                .expect("required")
                .map(PathBuf::from)
                .collect();
            let tables = commands::cmd_report(&dirs)?;
            let out = sub.get_one::<String>("out").map(PathBuf::from);
            if let Some(out) = &out {
                std::fs::create_dir_all(out)
                    .with_context(|| format!("creating {}", out.display()))?;
            }
            for (name, header, rows) in tables {
                println!("{name}");
                print!("{}", commands::render(&header, &rows));
                println!();
                if let Some(out) = &out {
                    let h: Vec<&str> = header.iter().map(String::as_str).collect();
                    commands::write_csv(&out.join(&name), &h, &rows)?;
                }
            }
        }
        _ => unreachable!("subcommand required"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = cli().get_matches();
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
