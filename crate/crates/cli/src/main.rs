//! `rmask` — batch driver for the hop-masked walk propagation pipeline.
//!
//! Subcommands: preprocess | train | pipeline | metrics | noise | sparsify
//! | gradcheck. Global flags: --config, --out, --workers, --seed. Exit
//! codes: 0 success, 2 configuration error, 3 data error, 4 numeric error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rmask_core::{Error, ErrorCategory, Result};

use crate::commands::SparsifyKind;
use crate::config::PipelineConfig;

#[derive(Parser)]
#[command(
    name = "rmask",
    about = "Graph feature-propagation preprocessing with hop-exact noise masking",
    version
)]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides output.directory from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for parallel stages (default: all cores). Results
    /// are identical for any value.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Overrides both the propagation seed and the training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build hop feature files from the input bundle.
    Preprocess,
    /// Combine previously written hop files and train the classifier.
    Train,
    /// Preprocess and train in one run, with a stage-time breakdown.
    Pipeline,
    /// Measure the smoothness of feature files (the i-th file is hop i).
    Metrics {
        /// Feature files, in hop order.
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Count operator-support pairs closer than their hop index.
    Noise {
        /// Hops to account (default: propagation.depth_H).
        #[arg(long)]
        depth: Option<usize>,
        /// Node-count cap for the quadratic support accounting.
        #[arg(long)]
        dense_bound: Option<usize>,
    },
    /// Derive a degraded bundle: zeroed features, dropped edges, or a
    /// smaller per-class training budget.
    Sparsify {
        /// What to degrade: feature | edge | label.
        #[arg(long)]
        kind: SparsifyKind,
        /// feature: zero rate in [0.0, 0.9]; edge: keep rate in
        /// [0.1, 1.0]; label: per-class budget in [1, 20].
        #[arg(long)]
        level: f64,
    },
    /// Verify analytic gradients against finite differences.
    Gradcheck,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Param("--config is required for this command".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.propagation.seed = seed;
        cfg.train.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.directory = Some(out.clone());
    }
    Ok(cfg)
}

fn resolve_out(cli: &Cli, cfg: Option<&PipelineConfig>) -> Result<PathBuf> {
    if let Some(out) = &cli.out {
        return Ok(out.clone());
    }
    if let Some(dir) = cfg.and_then(|c| c.output.directory.clone()) {
        return Ok(dir);
    }
    Err(Error::Param(
        "no output directory: pass --out or set output.directory".into(),
    ))
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(Error::Param("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Error::Param(format!("worker pool: {e}")))?;
    }
    match &cli.cmd {
        Cmd::Preprocess => {
            let cfg = load_config(cli)?;
            let out = resolve_out(cli, Some(&cfg))?;
            commands::cmd_preprocess(&cfg, &out)
        }
        Cmd::Train => {
            let cfg = load_config(cli)?;
            let out = resolve_out(cli, Some(&cfg))?;
            commands::cmd_train(&cfg, &out)
        }
        Cmd::Pipeline => {
            let cfg = load_config(cli)?;
            let out = resolve_out(cli, Some(&cfg))?;
            commands::cmd_pipeline(&cfg, &out)
        }
        Cmd::Metrics { files } => {
            let cfg = cli.config.as_ref().map(|_| load_config(cli)).transpose()?;
            let out = resolve_out(cli, cfg.as_ref())?;
            commands::cmd_metrics(files, &out)
        }
        Cmd::Noise { depth, dense_bound } => {
            let cfg = load_config(cli)?;
            let out = resolve_out(cli, Some(&cfg))?;
            commands::cmd_noise(&cfg, &out, *depth, *dense_bound)
        }
        Cmd::Sparsify { kind, level } => {
            let cfg = load_config(cli)?;
            let out = resolve_out(cli, Some(&cfg))?;
            let seed = cli.seed.unwrap_or(cfg.propagation.seed);
            commands::cmd_sparsify(&cfg, &out, *kind, *level, seed)
        }
        Cmd::Gradcheck => {
            let cfg = cli.config.as_ref().map(|_| load_config(cli)).transpose()?;
            let out = resolve_out(cli, cfg.as_ref())?;
            commands::cmd_gradcheck(&out, cli.seed.unwrap_or(0))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Data => 3,
                ErrorCategory::Numeric => 4,
            };
            ExitCode::from(code)
        }
    }
}
