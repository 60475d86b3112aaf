//! Experiment reports: serialisable run records and the text tables
//! derived from them. Best scores per column are wrapped in `**`, second
//! best in `_`; ties all receive the same marker.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::{MetricsReport, TrialMetrics};
use crate::preprocess::PolarisationMode;
use crate::snn::{ModelType, NetworkArchitecture};

/// One trial's record inside an experiment report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub seed: u64,
    pub metrics: TrialMetrics,
    pub loss_history: Vec<f64>,
    /// Checkpoint filename relative to the report.
    pub checkpoint: String,
}

/// Result of checking the built architecture against the Xylo budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XyloSection {
    pub architecture: NetworkArchitecture,
    pub fits: bool,
    pub violations: Vec<String>,
}

/// Conventions baked into the numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub std_convention: String,
    pub metric_pooling: String,
}

/// Everything needed to reproduce and interpret a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub base_seed: u64,
    pub trial_seeds: Vec<u64>,
    pub trials: Vec<TrialReport>,
    pub summary: MetricsReport,
    pub xylo: XyloSection,
    pub metadata: ReportMetadata,
}

impl ExperimentReport {
    /// Short configuration label, e.g. "Patched / Full + DN".
    pub fn label(&self) -> String {
        let model = match self.config.model.model_type {
            ModelType::Patched => "Patched",
            ModelType::Xylo => "Xylo",
            ModelType::Full => "Full-Spectrogram",
        };
        let pol = match self.config.preprocess.polarisation {
            PolarisationMode::Full => "Full",
            PolarisationMode::Dop => "DoP",
        };
        let dn = if self.config.preprocess.divisive_normalisation.enabled {
            " + DN"
        } else {
            ""
        };
        format!("{model} / {pol}{dn}")
    }

    fn sort_key(&self) -> (u8, u8, u8) {
        let model = match self.config.model.model_type {
            ModelType::Patched => 0,
            ModelType::Xylo => 1,
            ModelType::Full => 2,
        };
        let pol = match self.config.preprocess.polarisation {
            PolarisationMode::Dop => 0,
            PolarisationMode::Full => 1,
        };
        let dn = u8::from(self.config.preprocess.divisive_normalisation.enabled);
        (model, pol, dn)
    }
}

const METRIC_NAMES: [&str; 4] = ["Accuracy", "AUROC", "AUPRC", "F1"];

fn metric_means(summary: &MetricsReport) -> [f64; 4] {
    [
        summary.accuracy.mean,
        summary.auroc.mean,
        summary.auprc.mean,
        summary.f1.mean,
    ]
}

fn metric_stds(summary: &MetricsReport) -> [f64; 4] {
    [
        summary.accuracy.std,
        summary.auroc.std,
        summary.auprc.std,
        summary.f1.std,
    ]
}

/// Render a detection-score table over several reports, one row per
/// configuration, best score per column marked `**`, second best `_`.
pub fn render_comparison_table(reports: &[&ExperimentReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::Config("comparison table needs at least one report".into()));
    }
    let mut ordered: Vec<&ExperimentReport> = reports.to_vec();
    ordered.sort_by_key(|r| (r.sort_key(), r.label()));

    // best / second-best per metric column, by mean
    let mut best = [f64::NEG_INFINITY; 4];
    for r in &ordered {
        for (k, m) in metric_means(&r.summary).iter().enumerate() {
            best[k] = best[k].max(*m);
        }
    }
    let mut second = [f64::NEG_INFINITY; 4];
    for r in &ordered {
        for (k, m) in metric_means(&r.summary).iter().enumerate() {
            if *m < best[k] {
                second[k] = second[k].max(*m);
            }
        }
    }

    let mark = |value: f64, k: usize| -> String {
        if value == best[k] {
            format!("**{value:.3}**")
        } else if value == second[k] {
            format!("_{value:.3}_")
        } else {
            format!("{value:.3}")
        }
    };

    let mut out = String::new();
    out.push_str(&format!(
        "{:<28} {:>16} {:>16} {:>16} {:>16}\n",
        "Model", METRIC_NAMES[0], METRIC_NAMES[1], METRIC_NAMES[2], METRIC_NAMES[3]
    ));
    out.push_str(&"-".repeat(28 + 4 * 17));
    out.push('\n');
    for r in &ordered {
        let means = metric_means(&r.summary);
        let stds = metric_stds(&r.summary);
        out.push_str(&format!("{:<28}", r.label()));
        for k in 0..4 {
            out.push_str(&format!(" {:>16}", format!("{} ±{:.3}", mark(means[k], k), stds[k])));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Text table and structured JSON in one call.
pub fn emit_comparison_table(
    reports: &[&ExperimentReport],
) -> Result<(String, serde_json::Value)> {
    Ok((render_comparison_table(reports)?, comparison_json(reports)?))
}

/// Structured form of the comparison, mirroring the text table.
pub fn comparison_json(reports: &[&ExperimentReport]) -> Result<serde_json::Value> {
    if reports.is_empty() {
        return Err(Error::Config("comparison table needs at least one report".into()));
    }
    let mut ordered: Vec<&ExperimentReport> = reports.to_vec();
    ordered.sort_by_key(|r| (r.sort_key(), r.label()));

    let mut best = [f64::NEG_INFINITY; 4];
    for r in &ordered {
        for (k, m) in metric_means(&r.summary).iter().enumerate() {
            best[k] = best[k].max(*m);
        }
    }

    let rows: Vec<serde_json::Value> = ordered
        .iter()
        .map(|r| {
            let means = metric_means(&r.summary);
            let stds = metric_stds(&r.summary);
            let metrics: Vec<serde_json::Value> = (0..4)
                .map(|k| {
                    serde_json::json!({
                        "name": METRIC_NAMES[k],
                        "mean": means[k],
                        "std": stds[k],
                        "best": means[k] == best[k],
                    })
                })
                .collect();
            serde_json::json!({
                "label": r.label(),
                "trials": r.summary.trials,
                "metrics": metrics,
            })
        })
        .collect();
    Ok(serde_json::json!({ "rows": rows }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MeanStd;

    fn report(model: ModelType, pol: PolarisationMode, f1: f64) -> ExperimentReport {
        let mut config = ExperimentConfig::default();
        config.model.model_type = model;
        config.preprocess.polarisation = pol;
        let ms = |mean: f64| MeanStd { mean, std: 0.01 };
        ExperimentReport {
            schema_version: 1,
            config,
            base_seed: 0,
            trial_seeds: vec![0],
            trials: Vec::new(),
            summary: MetricsReport {
                accuracy: ms(0.9),
                auroc: ms(0.8),
                auprc: ms(0.7),
                f1: ms(f1),
                trials: 1,
            },
            xylo: XyloSection {
                architecture: NetworkArchitecture {
                    channels_in: 64,
                    hidden: 512,
                    channels_out: 16,
                },
                fits: false,
                violations: vec!["64 input channels exceed the Xylo limit of 16".into()],
            },
            metadata: ReportMetadata {
                std_convention: "population".into(),
                metric_pooling: "pooled".into(),
            },
        }
    }

    #[test]
    fn single_report_all_best() {
        let r = report(ModelType::Patched, PolarisationMode::Full, 0.8);
        let table = render_comparison_table(&[&r]).unwrap();
        assert_eq!(table.matches("**").count(), 8, "{table}");
    }

    #[test]
    fn higher_f1_marked_best() {
        let a = report(ModelType::Patched, PolarisationMode::Full, 0.8);
        let b = report(ModelType::Xylo, PolarisationMode::Full, 0.9);
        let table = render_comparison_table(&[&a, &b]).unwrap();
        assert!(table.contains("**0.900**"), "{table}");
        assert!(table.contains("_0.800_"), "{table}");
    }

    #[test]
    fn ties_both_best() {
        let a = report(ModelType::Patched, PolarisationMode::Full, 0.8);
        let b = report(ModelType::Xylo, PolarisationMode::Full, 0.8);
        let json = comparison_json(&[&a, &b]).unwrap();
        let rows = json["rows"].as_array().unwrap();
        for row in rows {
            let f1 = &row["metrics"][3];
            assert_eq!(f1["best"], true);
        }
    }

    #[test]
    fn empty_is_config_error() {
        assert!(matches!(
            render_comparison_table(&[]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn ordering_is_deterministic() {
        let a = report(ModelType::Full, PolarisationMode::Full, 0.7);
        let b = report(ModelType::Patched, PolarisationMode::Dop, 0.9);
        let t1 = render_comparison_table(&[&a, &b]).unwrap();
        let t2 = render_comparison_table(&[&b, &a]).unwrap();
        assert_eq!(t1, t2);
        let first = t1.lines().nth(2).unwrap();
        assert!(first.starts_with("Patched"));
    }
}
