//! Command-line front end for the `xfdl` simulator.
//!
//! Output layout under `--out`:
//!
//! ```text
//! manifest.csv                      generated datasets
//! data/{slice}_bs{k}.csv
//! {mode}/rounds.csv                 one row per (round, slice)
//! {mode}/traces/{slice}_bs{k}.csv   local epochs of every round
//! {mode}/models/model_{slice}_{round}.xfsw, scaler_{slice}.csv
//! {mode}/{slice}/attributions.csv, logodds_curve.csv, correlation.csv
//! summary.csv, logodds_compare.csv  written by `report`
//! ```

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use xfdl::data::{self, generate_with_threshold};
use xfdl::explain::attribution_csv;
use xfdl::federation::{explain_holdout, rounds_csv, run_experiment, SliceReport, ROUND_CSV_HEADER};
use xfdl::game::{trace_csv_rows, TRACE_CSV_HEADER, VANILLA_TRACE_CSV_HEADER};
use xfdl::nn::{Mlp, Sample};
use xfdl::{snapshot, LocalDataset, SliceKind, Standardizer, TrainMode};

pub use config::{ExperimentConfig, Profile};

pub const MANIFEST_HEADER: &str = "path,slice,bs_id,rows,positives,seed,skew,tau";
pub const CURVE_CSV_HEADER: &str = "top_p,log_odds";
pub const SUMMARY_CSV_HEADER: &str =
    "slice,mode,rounds,final_train_loss,final_mean_recall,final_mean_log_odds,final_feasible_fraction,half_train_loss";
pub const COMPARE_CSV_HEADER: &str = "slice,mode,top_p,log_odds";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] xfdl::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(xfdl::Error::Numeric(_)) => 3,
            _ => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "xfdl", version, about = "Constrained federated training of per-slice drop classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment configuration file; desk defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic per-station datasets and a manifest.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Run federated training on generated datasets.
    Train {
        #[command(flatten)]
        common: Common,
        /// constrained or vanilla; overrides the configured mode.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Explain a saved model on one or more dataset files.
    Explain {
        #[command(flatten)]
        common: Common,
        model: PathBuf,
        #[arg(required = true)]
        data: Vec<PathBuf>,
        /// Standardizer CSV; defaults to `scaler_{slice}.csv` next to the model.
        #[arg(long)]
        scaler: Option<PathBuf>,
        /// Masking levels, comma separated.
        #[arg(long, value_delimiter = ',')]
        top_p: Option<Vec<f64>>,
    },
    /// Summarize the training runs found under the output directory.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate { common } => cmd_generate(&load_config(&common)?),
        Command::Train { common, mode } => {
            let mut cfg = load_config(&common)?;
            if let Some(m) = mode {
                cfg.mode = TrainMode::parse(&m).ok_or_else(|| CliError::Usage(format!("--mode `{m}` is not constrained or vanilla")))?;
            }
            cmd_train(&cfg)
        }
        Command::Explain { common, model, data, scaler, top_p } => {
            let cfg = load_config(&common)?;
            let levels = top_p.unwrap_or_else(|| cfg.top_p_curve.clone());
            cmd_explain(&cfg, &model, &data, scaler.as_deref(), &levels)
        }
        Command::Report { common } => cmd_report(&load_config(&common)?.out),
    }
}

fn load_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::with_profile(Profile::Desk),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| xfdl::Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| xfdl::Error::io(path, e).into())
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| xfdl::Error::io(path, e).into())
}

pub fn dataset_file(slice: SliceKind, bs_id: u32) -> String {
    format!("data/{}_bs{bs_id}.csv", slice.name())
}

pub fn cmd_generate(cfg: &ExperimentConfig) -> CliResult<()> {
    let mut manifest = String::from(MANIFEST_HEADER);
    manifest.push('\n');
    for profile in &cfg.profiles {
        for bs in 1..=cfg.clients {
            let d = generate_with_threshold(profile, bs, cfg.size, cfg.skew, cfg.seed, cfg.tau)?;
            let rel = dataset_file(profile.kind, bs);
            write(&cfg.out.join(&rel), data::to_csv(&d))?;
            let positives = d.rows.iter().filter(|r| r.label).count();
            let _ = writeln!(
                manifest,
                "{rel},{},{bs},{},{positives},{},{},{}",
                profile.kind.name(),
                d.len(),
                cfg.seed,
                cfg.skew,
                cfg.tau
            );
        }
    }
    write(&cfg.out.join("manifest.csv"), manifest)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub slice: SliceKind,
    pub bs_id: u32,
    pub rows: usize,
}

pub fn read_manifest(out: &Path) -> CliResult<Vec<ManifestEntry>> {
    let path = out.join("manifest.csv");
    let text = read(&path).map_err(|_| CliError::Usage(format!("no datasets: {} is missing, run `generate` first", path.display())))?;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| xfdl::Error::Parse { line: i + 1, message: format!("{}: {m}", path.display()) };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(bad("expected 8 columns").into());
        }
        entries.push(ManifestEntry {
            path: out.join(cols[0]),
            slice: SliceKind::from_name(cols[1]).ok_or_else(|| bad("unknown slice"))?,
            bs_id: cols[2].parse().map_err(|_| bad("bad bs_id"))?,
            rows: cols[3].parse().map_err(|_| bad("bad row count"))?,
        });
    }
    Ok(entries)
}

fn load_groups(cfg: &ExperimentConfig) -> CliResult<Vec<Vec<LocalDataset>>> {
    let manifest = read_manifest(&cfg.out)?;
    cfg.slices
        .iter()
        .map(|&kind| {
            let group: Vec<LocalDataset> = manifest
                .iter()
                .filter(|e| e.slice == kind)
                .map(|e| {
                    let d = data::load_csv(&e.path)?;
                    if d.len() != e.rows || d.bs_id != e.bs_id || d.slice_id != kind.id() {
                        return Err(CliError::Usage(format!("{} does not match its manifest entry", e.path.display())));
                    }
                    Ok(d)
                })
                .collect::<CliResult<_>>()?;
            if group.is_empty() {
                return Err(CliError::Usage(format!("manifest lists no datasets for slice {}", kind.name())));
            }
            Ok(group)
        })
        .collect()
}

fn write_report(dir: &Path, model: &Mlp<f64>, report: &SliceReport<f64>) -> CliResult<()> {
    write(&dir.join("attributions.csv"), attribution_csv(model, &report.holdout, &report.attributions))?;
    write(&dir.join("correlation.csv"), report.correlation.to_csv())?;
    let mut curve = String::from(CURVE_CSV_HEADER);
    curve.push('\n');
    for (p, t) in &report.log_odds_curve {
        let _ = writeln!(curve, "{p},{t}");
    }
    write(&dir.join("logodds_curve.csv"), curve)
}

pub fn cmd_train(cfg: &ExperimentConfig) -> CliResult<()> {
    let groups = load_groups(cfg)?;
    let fed = cfg.federation();
    let result = run_experiment::<f64>(&fed, &groups)?;
    let run_dir = cfg.out.join(cfg.mode.name());
    write(&run_dir.join("rounds.csv"), rounds_csv(&result.rounds))?;
    let header = match cfg.mode {
        TrainMode::Constrained => TRACE_CSV_HEADER,
        TrainMode::Vanilla => VANILLA_TRACE_CSV_HEADER,
    };
    for s in &result.slices {
        let name = s.kind.name();
        for (id, rounds) in s.client_ids.iter().zip(&s.traces) {
            let mut text = String::from(header);
            text.push('\n');
            for (t, trace) in rounds.iter().enumerate() {
                trace_csv_rows(trace, t * cfg.local_epochs, &mut text);
            }
            write(&run_dir.join(format!("traces/{name}_bs{id}.csv")), text)?;
        }
        let models = run_dir.join("models");
        fs::create_dir_all(&models).map_err(|e| xfdl::Error::io(&models, e))?;
        for (t, m) in s.models.iter().enumerate() {
            snapshot::save(m, models.join(format!("model_{name}_{t}.xfsw")))?;
        }
        write(&models.join(format!("scaler_{name}.csv")), s.standardizer.to_csv())?;
        write_report(&run_dir.join(name), s.final_model(), &s.report)?;
    }
    Ok(())
}

/// Slice named by a `model_{slice}_{round}.xfsw` file.
fn slice_of_model(path: &Path) -> Option<SliceKind> {
    let stem = path.file_stem()?.to_str()?;
    let rest = stem.strip_prefix("model_")?;
    let (slice, _) = rest.rsplit_once('_')?;
    SliceKind::from_name(slice)
}

pub fn cmd_explain(
    cfg: &ExperimentConfig,
    model_path: &Path,
    data_paths: &[PathBuf],
    scaler: Option<&Path>,
    top_p: &[f64],
) -> CliResult<()> {
    if let Some(p) = top_p.iter().find(|p| !(0.0..=100.0).contains(*p)) {
        return Err(CliError::Usage(format!("--top-p value {p} outside [0, 100]")));
    }
    let model: Mlp<f64> = snapshot::load(model_path, &cfg.layer_sizes())?;
    let scaler_path = match scaler {
        Some(p) => p.to_path_buf(),
        None => {
            let kind = slice_of_model(model_path).ok_or_else(|| {
                CliError::Usage(format!("cannot tell the slice of {}; pass --scaler", model_path.display()))
            })?;
            model_path.with_file_name(format!("scaler_{}.csv", kind.name()))
        }
    };
    let standardizer = Standardizer::parse_csv(&read(&scaler_path)?)?;
    let mut samples: Vec<Sample<f64>> = Vec::new();
    for p in data_paths {
        samples.extend(standardizer.samples(&data::load_csv(p)?));
    }
    let report = explain_holdout(&model, samples, cfg.explain_ig_steps, top_p)?;
    write_report(&cfg.out, &model, &report)
}

/// Parsed row of a round-metrics CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRow {
    pub round: usize,
    pub slice: String,
    pub mode: String,
    pub values: [f64; 4],
}

pub fn parse_rounds(text: &str) -> CliResult<Vec<RoundRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(ROUND_CSV_HEADER) {
        return Err(xfdl::Error::Parse { line: 1, message: "not a round-metrics file".into() }.into());
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = || xfdl::Error::Parse { line: i + 2, message: format!("bad row `{l}`") };
            let c: Vec<&str> = l.split(',').collect();
            if c.len() != 7 {
                return Err(bad().into());
            }
            let mut values = [0.0; 4];
            for (v, s) in values.iter_mut().zip(&c[3..]) {
                *v = s.parse().map_err(|_| bad())?;
            }
            Ok(RoundRow {
                round: c[0].parse().map_err(|_| bad())?,
                slice: c[1].to_string(),
                mode: c[2].to_string(),
                values,
            })
        })
        .collect()
}

pub fn cmd_report(out: &Path) -> CliResult<()> {
    let mut summary = String::from(SUMMARY_CSV_HEADER);
    summary.push('\n');
    let mut compare = String::from(COMPARE_CSV_HEADER);
    compare.push('\n');
    let mut found = false;
    for mode in [TrainMode::Constrained, TrainMode::Vanilla] {
        let path = out.join(mode.name()).join("rounds.csv");
        if !path.exists() {
            continue;
        }
        found = true;
        let rows = parse_rounds(&read(&path)?)?;
        let mut slices: Vec<&str> = Vec::new();
        for r in &rows {
            if !slices.contains(&r.slice.as_str()) {
                slices.push(&r.slice);
            }
        }
        for slice in slices {
            let mine: Vec<&RoundRow> = rows.iter().filter(|r| r.slice == slice).collect();
            let last = mine.iter().max_by_key(|r| r.round).expect("slice has rows");
            let half = mine.iter().find(|r| r.round + 1 == mine.len().div_ceil(2)).unwrap_or(last);
            let v = last.values;
            let _ = writeln!(summary, "{slice},{},{},{},{},{},{},{}", mode.name(), mine.len(), v[0], v[1], v[2], v[3], half.values[0]);
            println!(
                "{slice:>6} {:<11} rounds {:>3}  loss {:.4}  recall {:.4}  log-odds {:.4}  feasible {:.2}",
                mode.name(),
                mine.len(),
                v[0],
                v[1],
                v[2],
                v[3]
            );
            let curve = out.join(mode.name()).join(slice).join("logodds_curve.csv");
            if let Ok(text) = fs::read_to_string(&curve) {
                for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
                    let _ = writeln!(compare, "{slice},{},{line}", mode.name());
                }
            }
        }
    }
    if !found {
        return Err(CliError::Usage(format!("no training runs under {}", out.display())));
    }
    write(&out.join("summary.csv"), summary)?;
    write(&out.join("logodds_compare.csv"), compare)
}
