//! Command-line front end: `run`, `grid-search`, `synth`, `plots`,
//! `validate`.

pub mod config;
pub mod plots;
pub mod runner;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::data::{dataset_hash, load_dataset, Modality, Scenario};
use crate::error::{Error, Result};
use crate::prep1d::OperatorParams;
use crate::search::{
    cache_dir, enumerate_pipelines, run_search, write_grid_results, SearchContext,
};
use crate::synth::{write_synthetic, SynthSpec};

pub use config::{configuration_name, Cell, CvConfig, ExperimentConfig, CONFIGURATIONS};
pub use runner::{error_json, run_experiment, run_on_tables, CellMetrics, CellOutcome};

#[derive(Debug, Parser)]
#[command(
    name = "spectrafuse",
    version,
    about = "Multimodal spectroscopy preprocessing, fusion and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment or synthesis config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config's `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the cross-validation (or generator) seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cross-validate one cell, or the 7 x 2 suite.
    Run {
        #[command(flatten)]
        common: Common,
        /// Score at or above which a sample is called cancer.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Evaluate all 2,880 FTIR pipelines and pick the min-max winner.
    GridSearch {
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic dataset.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Render SVG figures for a report directory.
    Plots {
        /// Directory holding `metrics.json` files (a suite root or one cell).
        report_dir: PathBuf,
    },
    /// Load a dataset manifest and print per-modality counts.
    Validate {
        /// Path to `dataset.json`.
        manifest: PathBuf,
    },
}

/// Parses `args`, runs the command and returns the process exit code.
/// Failures print a JSON error object on stderr.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            1
        }
    }
}

fn configure_threads(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::InvalidParameter("--jobs must be >= 1".into()));
        }
        // A second build in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

fn load_experiment(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.cv.seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("reports"));
    Ok((cfg, out))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { common, threshold } => {
            configure_threads(common.jobs)?;
            let (cfg, out) = load_experiment(&common)?;
            let outcomes = run_experiment(&cfg, &out, threshold)?;
            let mut first_error = None;
            for o in &outcomes {
                match &o.result {
                    Ok(m) => println!(
                        "{}",
                        json!({"cell": o.cell.name(), "status": "ok", "n": m.summary.n, "auc_mean": m.summary.auc.mean, "auc_std": m.summary.auc.std})
                    ),
                    Err(msg) => {
                        println!(
                            "{}",
                            json!({"cell": o.cell.name(), "status": "failed", "message": msg})
                        );
                        first_error.get_or_insert_with(|| msg.clone());
                    }
                }
            }
            match first_error {
                None => Ok(()),
                Some(msg) => Err(Error::InvalidParameter(format!("cell failed: {msg}"))),
            }
        }
        Command::GridSearch { common } => {
            configure_threads(common.jobs)?;
            let (cfg, out) = load_experiment(&common)?;
            let tables = load_dataset(&cfg.dataset)?;
            let ftir = tables
                .get(&Modality::Ftir)
                .ok_or_else(|| Error::Empty("dataset has no FTIR table".into()))?;
            let ctx = SearchContext {
                ftir,
                dataset_hash: dataset_hash(&tables),
                scenarios: Scenario::ALL.to_vec(),
                gbdt: cfg.gbdt,
                cv: cfg.cv_settings(0.5),
                ops: OperatorParams::default(),
            };
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let cache = cache_dir(&out);
            let outcome = run_search(&enumerate_pipelines(), &ctx, Some(&cache))?;
            write_grid_results(
                &out.join("grid_results.csv"),
                &ctx.scenarios,
                &outcome.results,
            )?;
            let winner =
                serde_json::to_value(&outcome.winner).map_err(|e| Error::json("winner.json", e))?;
            write_json(&out.join("winner.json"), &winner)?;
            let summary = json!({
                "candidates": outcome.results.len(),
                "evaluated": outcome.evaluated,
                "cached": outcome.cached,
                "flagged": outcome.results.iter().filter(|r| r.flagged).count(),
                "winner_index": outcome.winner.index,
            });
            write_json(&out.join("search_summary.json"), &summary)?;
            println!("{summary}");
            Ok(())
        }
        Command::Synth { common } => {
            configure_threads(common.jobs)?;
            let path = &common.config;
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut spec: SynthSpec =
                serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
            if let Some(seed) = common.seed {
                spec.seed = seed;
            }
            let out = common
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("synthetic"));
            let manifest = write_synthetic(&spec, &out)?;
            println!("{}", json!({"manifest": manifest.display().to_string()}));
            Ok(())
        }
        Command::Plots { report_dir } => {
            let files = plots::render_plots(&report_dir)?;
            println!(
                "{}",
                json!({"written": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>()})
            );
            Ok(())
        }
        Command::Validate { manifest } => {
            let tables = load_dataset(&manifest)?;
            let counts: serde_json::Map<String, serde_json::Value> = tables
                .iter()
                .map(|(m, t)| {
                    (
                        m.name().to_string(),
                        json!({"records": t.len(), "patients": t.patient_ids().len()}),
                    )
                })
                .collect();
            println!(
                "{}",
                json!({"valid": true, "dataset_hash": dataset_hash(&tables), "modalities": counts})
            );
            Ok(())
        }
    }
}
