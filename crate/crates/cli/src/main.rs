//! `spikeflag` command line: synthesise data, train and evaluate flagging
//! networks, estimate deployment energy, and merge run reports.

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};

use spikeflag_core::config::ExperimentConfig;
use spikeflag_core::data::{generate_synthetic, save_hdf5};
use spikeflag_core::experiment::{
    energy_from_rates, evaluate_on_patches, build_patches, load_data, render_energy_table,
    run_energy, run_experiment,
};
use spikeflag_core::report::{emit_comparison_table, render_comparison_table, ExperimentReport};
use spikeflag_core::snn::{load_checkpoint, ModelGeometry};

#[derive(Parser)]
#[command(
    name = "spikeflag",
    about = "SNN-based RFI flagging: train, evaluate, and cost models",
    version
)]
struct Cli {
    /// Worker threads for batch gradient computation (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic visibility file with ground-truth flags.
    Generate {
        /// Experiment config (TOML or JSON); its [data.synthetic] section
        /// drives the generator.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (falls back to the config's output dir, then
        /// $SPIKEFLAG_OUT, then ./spikeflag-out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the generator seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train: run seeded trials, write checkpoints and the report.
    Train {
        /// Experiment config (TOML or JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate an existing checkpoint on the config's test split.
    Evaluate {
        /// Experiment config (TOML or JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint produced by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the split seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Whole-spectrogram energy estimate from a checkpoint or from
    /// explicit spike rates.
    Energy {
        /// Experiment config (TOML or JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Measure rates from this checkpoint on the test split.
        #[arg(long = "rates-from", conflicts_with = "rates")]
        rates_from: Option<PathBuf>,
        /// Comma-separated per-layer driving rates (skip measurement).
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
        /// Instrument channels for the scaling rules.
        #[arg(long)]
        channels: Option<usize>,
        /// Instrument polarisations for the scaling rules.
        #[arg(long)]
        pols: Option<usize>,
        /// Polarisation mode, overriding the config: full | dop.
        #[arg(long)]
        mode: Option<String>,
        /// Whole-spectrogram inferences per second.
        #[arg(long)]
        cadence: Option<f64>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge run reports into one comparison table.
    Report {
        /// report.json files from previous runs.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Directory for comparison.txt and comparison.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Precedence: --out flag, config `[output] dir`, $SPIKEFLAG_OUT, then
/// ./spikeflag-out.
fn resolve_out(cli_out: Option<PathBuf>, cfg: &mut ExperimentConfig) -> PathBuf {
    let dir = cli_out
        .or_else(|| cfg.output.dir.clone())
        .or_else(|| std::env::var_os("SPIKEFLAG_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("spikeflag-out"));
    cfg.output.dir = Some(dir.clone());
    dir
}

fn load_config(path: Option<&Path>) -> anyhow::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_path(p)
            .with_context(|| format!("loading config {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("setting worker thread count")?;
    }

    match cli.command {
        Command::Generate { config, out, seed } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.data.synthetic.seed = seed;
            }
            let out_dir = resolve_out(out, &mut cfg);
            std::fs::create_dir_all(&out_dir)?;
            let (vis, mask) = generate_synthetic(&cfg.data.synthetic)?;
            let path = out_dir.join("synthetic.h5");
            save_hdf5(&path, &vis, &mask)?;
            println!(
                "wrote {} ({} baselines, {}x{} pixels, flag density {:.4})",
                path.display(),
                vis.baselines(),
                vis.freq_channels(),
                vis.time_steps(),
                mask.density()
            );
        }
        Command::Train {
            config,
            out,
            trials,
            seed,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(trials) = trials {
                cfg.train.trials = trials;
            }
            if let Some(seed) = seed {
                cfg.train.seed = seed;
            }
            let out_dir = resolve_out(out, &mut cfg);
            let report = run_experiment(&cfg)?;
            println!("{}", render_comparison_table(&[&report])?);
            println!("report: {}", out_dir.join("report.json").display());
        }
        Command::Evaluate {
            config,
            checkpoint,
            out,
            seed,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.train.seed = seed;
            }
            let out_dir = resolve_out(out, &mut cfg);
            std::fs::create_dir_all(&out_dir)?;
            let net = load_checkpoint(&checkpoint)?;
            let (vis, mask) = load_data(&cfg)?;
            let geometry = ModelGeometry::for_data(
                cfg.model.model_type,
                cfg.preprocess.polarisation,
                vis.freq_channels(),
                vis.time_steps(),
            );
            let patches = build_patches(&vis, &mask, &cfg, &geometry)?;
            let split = spikeflag_core::data::split(patches, cfg.data.test_fraction, cfg.train.seed)?;
            let metrics = evaluate_on_patches(
                &net,
                &split.test,
                &cfg.encoding,
                &geometry,
                cfg.metrics.pooling,
            )?;
            let json = serde_json::to_string_pretty(&metrics)?;
            std::fs::write(out_dir.join("evaluation.json"), format!("{json}\n"))?;
            println!(
                "accuracy {:.4}  auroc {:.4}  auprc {:.4}  f1 {:.4}",
                metrics.accuracy, metrics.auroc, metrics.auprc, metrics.f1
            );
        }
        Command::Energy {
            config,
            rates_from,
            rates,
            channels,
            pols,
            mode,
            cadence,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(channels) = channels {
                cfg.energy.channels = channels;
            }
            if let Some(pols) = pols {
                cfg.energy.pols = pols;
            }
            if let Some(cadence) = cadence {
                cfg.energy.cadence = cadence;
            }
            if let Some(mode) = mode {
                cfg.preprocess.polarisation = match mode.as_str() {
                    "full" => spikeflag_core::preprocess::PolarisationMode::Full,
                    "dop" => spikeflag_core::preprocess::PolarisationMode::Dop,
                    other => bail!("unknown polarisation mode {other:?} (use full or dop)"),
                };
            }
            let out_dir = resolve_out(out, &mut cfg);
            std::fs::create_dir_all(&out_dir)?;

            let report = match (rates_from, rates) {
                (Some(ckpt), None) => run_energy(&cfg, &ckpt)?,
                (None, Some(rates)) => {
                    let geometry = ModelGeometry::for_data(
                        cfg.model.model_type,
                        cfg.preprocess.polarisation,
                        cfg.energy.channels,
                        cfg.energy.channels,
                    );
                    let dims = geometry.architecture().dims();
                    energy_from_rates(&cfg, &dims, &rates)?
                }
                _ => bail!("energy needs exactly one of --rates-from or --rates"),
            };
            let label = format!(
                "{:?}-{:?}",
                cfg.model.model_type, cfg.preprocess.polarisation
            );
            let table = render_energy_table(&label, &report);
            let json = serde_json::to_string_pretty(&report)?;
            std::fs::write(out_dir.join("energy.json"), format!("{json}\n"))?;
            std::fs::write(out_dir.join("energy.txt"), &table)?;
            print!("{table}");
        }
        Command::Report { reports, out } => {
            let mut loaded = Vec::new();
            for path in &reports {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading report {}", path.display()))?;
                let report: ExperimentReport = serde_json::from_str(&text)
                    .with_context(|| format!("parsing report {}", path.display()))?;
                loaded.push(report);
            }
            let refs: Vec<&ExperimentReport> = loaded.iter().collect();
            let (table, json) = emit_comparison_table(&refs)?;
            if let Some(out_dir) = out {
                std::fs::create_dir_all(&out_dir)?;
                std::fs::write(out_dir.join("comparison.txt"), &table)?;
                std::fs::write(
                    out_dir.join("comparison.json"),
                    format!("{}\n", serde_json::to_string_pretty(&json)?),
                )?;
            }
            print!("{table}");
        }
    }
    Ok(())
}
