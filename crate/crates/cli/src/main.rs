use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use qdm_trojan::config::{ExperimentConfig, Method, SweepAxis};
use qdm_trojan::error::Error;
use qdm_trojan::pipeline;

/// Synthetic magnetic-imaging testbed for golden-chip-free hardware trojan
/// detection.
#[derive(Parser)]
#[command(name = "qdmtrojan", version)]
struct Cli {
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, env = "QDM_OUTPUT_ROOT")]
    output_root: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "QDM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (key = value); defaults apply to missing keys.
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Output directory (default: `output.dir` from the config).
    #[arg(short, long)]
    out: Option<PathBuf>,

    /// Override the simulation seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the reference and test chips and write one dataset per chip.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Compare a reference and a test dataset and write reports and plots.
    Detect {
        /// Reference dataset, then test dataset.
        #[arg(required = true, num_args = 1..)]
        datasets: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// pca, cnn or both.
        #[arg(long)]
        method: Option<String>,
    },
    /// Repeat generation and detection over an axis and a set of seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// trojan_scale, frequency_divider, noise_sigma or standoff.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// pca, cnn or both.
        #[arg(long)]
        method: Option<String>,
    },
    /// Print a dataset's header and manifest.
    Inspect { dataset: PathBuf },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &ExperimentConfig, root: Option<&Path>) -> PathBuf {
    let dir = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    match root {
        Some(r) if dir.is_relative() => r.join(dir),
        _ => dir,
    }
}

fn set_method(cfg: &mut ExperimentConfig, method: Option<&str>) -> Result<()> {
    if let Some(m) = method {
        cfg.method = Method::parse(m).ok_or_else(|| Error::Usage(format!("unknown method `{m}`")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let root = cli.output_root.as_deref();
    match cli.command {
        Command::Generate { common } => {
            let cfg = load(&common)?;
            let dir = out_dir(&common, &cfg, root);
            for f in pipeline::cmd_generate(&cfg, &dir)? {
                println!("{}  {}  ({} frames)", f.checksum, f.path.display(), f.frames);
            }
        }
        Command::Detect { datasets, common, method } => {
            let mut cfg = load(&common)?;
            set_method(&mut cfg, method.as_deref())?;
            let dir = out_dir(&common, &cfg, root);
            let det = pipeline::cmd_detect(&datasets, &cfg, &dir)?;
            for r in &det.results {
                println!(
                    "{:<4} {:<19} accuracy {:.1}%  fp {:.1}%  groups {}",
                    r.method.as_str(),
                    r.report.verdict(),
                    100.0 * r.report.accuracy,
                    100.0 * r.report.false_positive_rate,
                    r.report.n_groups
                );
            }
            println!("normalized distance {:.4}", det.normalized_distance);
            println!("reports written to {}", dir.display());
        }
        Command::Sweep {
            common,
            axis,
            values,
            seeds,
            method,
        } => {
            let mut cfg = load(&common)?;
            set_method(&mut cfg, method.as_deref())?;
            if let Some(a) = axis {
                cfg.sweep.axis = SweepAxis::parse(&a).ok_or_else(|| Error::Usage(format!("unknown axis `{a}`")))?;
            }
            if let Some(v) = values {
                cfg.sweep.values = v;
            }
            if let Some(s) = seeds {
                cfg.sweep.seeds = s;
            }
            let dir = out_dir(&common, &cfg, root);
            let records = pipeline::cmd_sweep(&cfg, &dir)?;
            print!("{}", pipeline::sweep_table(&cfg, cfg.sweep.axis, &records));
            println!("tables written to {}", dir.display());
        }
        Command::Inspect { dataset } => print!("{}", pipeline::inspect(&dataset)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Usage(_)) | Some(Error::Parse { .. }) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
