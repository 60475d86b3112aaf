//! Experiment orchestration: config-driven multi-trial runs of
//! train -> evaluate -> report, plus energy estimation from trained
//! checkpoints. Trial seeds are base_seed + trial_index; every artifact
//! lands inside the configured output directory.

use ndarray::{s, Array2};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::config::{
    DataSourceKind, DnScope, ExperimentConfig, MetricPooling, SCHEMA_VERSION,
};
use crate::data::{
    generate_synthetic, load_hdf5, patch_stacked, split, FlagMask, Patch, VisibilityTensor,
};
use crate::encoding::{decode_soft, latency_encode, EncodingConfig};
use crate::energy::{flops_snn_per_inference, spectrogram_report, EnergyReport, SpectrogramScale};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, evaluate, TrialMetrics};
use crate::preprocess::{feature_planes, scale_to_unit};
use crate::report::{ExperimentReport, ReportMetadata, TrialReport, XyloSection};
use crate::snn::{
    load_checkpoint, measure_spike_rates, save_checkpoint, train, xylo_check, LifNetwork,
    ModelGeometry, TrainConfig,
};

/// Load visibilities per the data section of the config.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(VisibilityTensor, FlagMask)> {
    match cfg.data.source {
        DataSourceKind::Synthetic => generate_synthetic(&cfg.data.synthetic),
        DataSourceKind::Hdf5 => {
            let path = cfg
                .data
                .path
                .as_ref()
                .ok_or_else(|| Error::Config("data.source = \"hdf5\" requires data.path".into()))?;
            load_hdf5(path)
        }
    }
}

/// Preprocess and tile the data into network patches.
pub fn build_patches(
    vis: &VisibilityTensor,
    mask: &FlagMask,
    cfg: &ExperimentConfig,
    geometry: &ModelGeometry,
) -> Result<Vec<Patch>> {
    mask.validate_against(vis)?;
    let pre = &cfg.preprocess;
    let (nb, nf, nt, _) = vis.values.dim();
    let mut patches = Vec::new();
    match pre.dn_scope {
        DnScope::Spectrogram => {
            for b in 0..nb {
                let planes = feature_planes(vis, b, pre.polarisation, &pre.divisive_normalisation)?;
                let scaled: Vec<Array2<f64>> = planes
                    .iter()
                    .map(|p| scale_to_unit(p.view(), pre.scaling))
                    .collect();
                let views: Vec<_> = scaled.iter().map(|p| p.view()).collect();
                let mask_plane = mask.flags.slice(s![b, .., ..]);
                patches.extend(patch_stacked(
                    &views,
                    mask_plane,
                    geometry.patch_freq,
                    geometry.patch_time,
                    b,
                )?);
            }
        }
        DnScope::Patch => {
            // normalise each patch region independently: cut the raw
            // visibilities first, then run the same plane pipeline per tile
            for b in 0..nb {
                let mask_plane = mask.flags.slice(s![b, .., ..]).to_owned();
                let probe = Array2::<f64>::zeros((nf, nt));
                let grid = crate::data::patch(
                    probe.view(),
                    mask_plane.view(),
                    geometry.patch_freq,
                    geometry.patch_time,
                    b,
                )?;
                for tile in grid {
                    let o = tile.origin;
                    let sub_values = vis
                        .values
                        .slice(s![
                            b..b + 1,
                            o.freq_offset..o.freq_offset + o.rows,
                            o.time_offset..o.time_offset + o.cols,
                            ..
                        ])
                        .to_owned();
                    let sub_vis = VisibilityTensor::new(
                        sub_values,
                        vis.freq_labels[o.freq_offset..o.freq_offset + o.rows].to_vec(),
                        vis.pol_labels.clone(),
                    )?;
                    let planes =
                        feature_planes(&sub_vis, 0, pre.polarisation, &pre.divisive_normalisation)?;
                    let mut values =
                        Array2::zeros((geometry.planes * geometry.patch_freq, geometry.patch_time));
                    for (pi, plane) in planes.iter().enumerate() {
                        let scaled = scale_to_unit(plane.view(), pre.scaling);
                        values
                            .slice_mut(s![
                                pi * geometry.patch_freq..pi * geometry.patch_freq + o.rows,
                                0..o.cols
                            ])
                            .assign(&scaled);
                    }
                    patches.push(Patch {
                        values,
                        mask: tile.mask,
                        origin: o,
                    });
                }
            }
        }
    }
    Ok(patches)
}

struct PixelPool {
    preds: Vec<bool>,
    scores: Vec<f64>,
    truth: Vec<bool>,
}

impl PixelPool {
    fn new() -> Self {
        Self {
            preds: Vec::new(),
            scores: Vec::new(),
            truth: Vec::new(),
        }
    }
}

/// Per-pixel evaluation of a trained network over test patches. Padded
/// pixels are cropped out; vote channels are averaged back to one score
/// per mask pixel.
pub fn evaluate_on_patches(
    net: &LifNetwork,
    patches: &[Patch],
    enc: &EncodingConfig,
    geometry: &ModelGeometry,
    pooling: MetricPooling,
) -> Result<TrialMetrics> {
    enc.validate()?;
    if patches.is_empty() {
        return Err(Error::Config("evaluation needs at least one patch".into()));
    }
    let votes = geometry.votes_per_pixel;
    let mask_rows = geometry.patch_freq;
    let mut pools: BTreeMap<usize, PixelPool> = BTreeMap::new();

    for patch in patches {
        let key = match pooling {
            MetricPooling::Pooled => 0,
            MetricPooling::PerBaseline => patch.origin.baseline,
        };
        let pool = pools.entry(key).or_insert_with(PixelPool::new);
        for t in 0..patch.origin.cols {
            let x: Vec<f64> = patch.values.column(t).to_vec();
            let input = latency_encode(&x, enc.exposure_steps)?;
            let (out, _) = crate::snn::forward(net, &input)?;
            let scores_ch = decode_soft(&out.counts(), enc.exposure_steps);
            for r in 0..patch.origin.rows {
                let mut score = 0.0;
                for v in 0..votes {
                    score += scores_ch[v * mask_rows + r];
                }
                score /= votes as f64;
                pool.scores.push(score);
                pool.preds.push(score >= enc.decode_threshold);
                pool.truth.push(patch.mask[(r, t)]);
            }
        }
    }

    let per_pool: Vec<TrialMetrics> = pools
        .values()
        .map(|p| evaluate(&p.preds, &p.scores, &p.truth))
        .collect::<Result<_>>()?;
    let n = per_pool.len() as f64;
    Ok(TrialMetrics {
        accuracy: per_pool.iter().map(|m| m.accuracy).sum::<f64>() / n,
        auroc: per_pool.iter().map(|m| m.auroc).sum::<f64>() / n,
        auprc: per_pool.iter().map(|m| m.auprc).sum::<f64>() / n,
        f1: per_pool.iter().map(|m| m.f1).sum::<f64>() / n,
    })
}

fn write_text<P: AsRef<Path>>(path: P, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

/// Run the configured number of independent trials and write checkpoints,
/// the JSON report, and a score table into the output directory.
/// The artifact directory: the configured one, or ./spikeflag-out.
pub fn output_dir(cfg: &ExperimentConfig) -> std::path::PathBuf {
    cfg.output
        .dir
        .clone()
        .unwrap_or_else(|| std::path::PathBuf::from("spikeflag-out"))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let out_dir = output_dir(cfg);
    fs::create_dir_all(&out_dir)?;

    let (vis, mask) = load_data(cfg)?;
    let geometry = ModelGeometry::for_data(
        cfg.model.model_type,
        cfg.preprocess.polarisation,
        vis.freq_channels(),
        vis.time_steps(),
    );
    let arch = geometry.architecture();
    let violations = xylo_check(&arch);
    let patches = build_patches(&vis, &mask, cfg, &geometry)?;

    let base_seed = cfg.train.seed;
    let mut trial_seeds = Vec::with_capacity(cfg.train.trials);
    let mut trials = Vec::with_capacity(cfg.train.trials);
    for i in 0..cfg.train.trials {
        let seed = base_seed + i as u64;
        trial_seeds.push(seed);
        let run = || -> Result<TrialReport> {
            let trial_split = split(patches.clone(), cfg.data.test_fraction, seed)?;
            let net = LifNetwork::new(&arch.dims(), cfg.model.lif_params(), seed)?;
            let tc = TrainConfig { seed, ..cfg.train };
            let outcome = train(net, &trial_split, &tc, &cfg.encoding, &cfg.model.surrogate)?;
            let metrics = evaluate_on_patches(
                &outcome.net,
                &trial_split.test,
                &cfg.encoding,
                &geometry,
                cfg.metrics.pooling,
            )?;
            let checkpoint = format!("trial_{i:03}.spkf");
            save_checkpoint(out_dir.join(&checkpoint), &outcome.net)?;
            Ok(TrialReport {
                seed,
                metrics,
                loss_history: outcome.loss_history,
                checkpoint,
            })
        };
        trials.push(run().map_err(|e| e.context(&format!("trial {i}")))?);
    }

    let summary = aggregate(&trials.iter().map(|t| t.metrics).collect::<Vec<_>>())?;
    let report = ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        base_seed,
        trial_seeds,
        trials,
        summary,
        xylo: XyloSection {
            architecture: arch,
            fits: violations.is_empty(),
            violations: violations.iter().map(|v| v.to_string()).collect(),
        },
        metadata: ReportMetadata {
            std_convention: "population".into(),
            metric_pooling: match cfg.metrics.pooling {
                MetricPooling::Pooled => "pooled".into(),
                MetricPooling::PerBaseline => "per-baseline".into(),
            },
        },
    };

    let json = serde_json::to_string_pretty(&report)?;
    write_text(out_dir.join("report.json"), &(json + "\n"))?;
    let table = crate::report::render_comparison_table(&[&report])?;
    write_text(out_dir.join("scores.txt"), &table)?;
    Ok(report)
}

/// Measure spike rates of a trained checkpoint on the config's test split
/// and derive the whole-spectrogram energy report.
pub fn run_energy(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<EnergyReport> {
    cfg.validate()?;
    let net = load_checkpoint(checkpoint)?;
    let (vis, mask) = load_data(cfg)?;
    let geometry = ModelGeometry::for_data(
        cfg.model.model_type,
        cfg.preprocess.polarisation,
        vis.freq_channels(),
        vis.time_steps(),
    );
    let patches = build_patches(&vis, &mask, cfg, &geometry)?;
    let trial_split = split(patches, cfg.data.test_fraction, cfg.train.seed)?;

    let mut samples = Vec::new();
    for patch in &trial_split.test {
        for t in 0..patch.origin.cols {
            let x: Vec<f64> = patch.values.column(t).to_vec();
            samples.push(latency_encode(&x, cfg.encoding.exposure_steps)?);
        }
    }
    let rates = measure_spike_rates(&net, &samples)?;
    energy_from_rates(cfg, &net.dims(), &rates)
}

/// Energy report from explicit per-layer rates (`rates[0]` drives the
/// first weight layer). `rates` may have `dims.len()` entries (with the
/// output layer's own rate unused for synaptic accounting) or one fewer.
pub fn energy_from_rates(
    cfg: &ExperimentConfig,
    dims: &[usize],
    rates: &[f64],
) -> Result<EnergyReport> {
    let n_layers = dims.len() - 1;
    if rates.len() < n_layers {
        return Err(Error::Shape(format!(
            "{} rates supplied for {n_layers} weight layers",
            rates.len()
        )));
    }
    let layers: Vec<(usize, usize, f64)> = (0..n_layers)
        .map(|l| (dims[l], dims[l + 1], rates[l]))
        .collect();
    let flops = flops_snn_per_inference(&layers, cfg.encoding.exposure_steps)?;
    let scale = SpectrogramScale {
        channels: cfg.energy.channels,
        pols: cfg.energy.pols,
        cadence: cfg.energy.cadence,
        balanced_mode: cfg.energy.balanced_mode,
    };
    spectrogram_report(
        flops,
        cfg.preprocess.polarisation,
        &cfg.energy.constants,
        &scale,
    )
}

/// Table-3 style text rendering of an energy report.
pub fn render_energy_table(label: &str, report: &EnergyReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:>14} {:>18} {:>12} {:>12} {:>14}\n",
        "Model", "FLOPs_SNN", "Patch energy (J)", "Lower (mW)", "Upper (mW)", "Balanced (mW)"
    ));
    out.push_str(&"-".repeat(24 + 14 + 18 + 12 + 12 + 14 + 5));
    out.push('\n');
    out.push_str(&format!(
        "{:<24} {:>14.1} {:>18.4e} {:>12.4} {:>12.4} {:>14.4}\n",
        label,
        report.flops_snn,
        report.patch_energy_j,
        report.lower_w * 1e3,
        report.upper_w * 1e3,
        report.balanced_w * 1e3,
    ));
    out.push_str(&format!("convention: {}\n", report.convention));
    out
}
