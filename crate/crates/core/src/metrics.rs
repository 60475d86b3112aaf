//! Per-pixel detection metrics: accuracy, F1, AUROC, AUPRC, and
//! multi-trial aggregation.
//!
//! AUROC is computed with a single descending sort over scores and
//! trapezoidal integration of the ROC curve, which equals the normalised
//! Mann-Whitney U statistic: P(score_pos > score_neg) + 0.5 P(equal).
//! AUPRC uses the average-precision convention: rectangle rule on recall
//! increments at each distinct threshold, no interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One trial's scalar metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub accuracy: f64,
    pub auroc: f64,
    pub auprc: f64,
    pub f1: f64,
}

/// Mean and standard deviation of one metric over trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Aggregated metrics over trials.
///
/// The standard deviation is the population form (divide by n); the
/// convention is recorded in the report metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: MeanStd,
    pub auroc: MeanStd,
    pub auprc: MeanStd,
    pub f1: MeanStd,
    pub trials: usize,
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!(
            "prediction length {a} does not match truth length {b}"
        )));
    }
    if a == 0 {
        return Err(Error::Shape("metrics require at least one pixel".into()));
    }
    Ok(())
}

/// Fraction of pixels where prediction matches truth.
pub fn accuracy(pred: &[bool], truth: &[bool]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// F1 score, 2TP / (2TP + FP + FN), defined as 0 when the denominator is 0.
pub fn f1(pred: &[bool], truth: &[bool]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fne = 0usize;
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fne;
    if denom == 0 {
        Ok(0.0)
    } else {
        Ok(2.0 * tp as f64 / denom as f64)
    }
}

/// Sort score/label pairs by descending score.
fn sorted_pairs(scores: &[f64], truth: &[bool]) -> Vec<(f64, bool)> {
    let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(truth.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores must be orderable"));
    pairs
}

/// Area under the ROC curve.
///
/// Requires both classes present. Ties in score receive half credit, so
/// constant scores give exactly 0.5.
pub fn auroc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    check_lengths(scores.len(), truth.len())?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Data("scores must be finite".into()));
    }
    let np = truth.iter().filter(|&&t| t).count();
    let nn = truth.len() - np;
    if np == 0 || nn == 0 {
        return Err(Error::UndefinedMetric(
            "AUROC requires both positive and negative pixels".into(),
        ));
    }

    let pairs = sorted_pairs(scores, truth);
    let mut area = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_tp = 0usize;
    let mut prev_fp = 0usize;
    let mut i = 0;
    while i < pairs.len() {
        // advance over the whole tie block at this threshold
        let threshold = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == threshold {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // trapezoid between consecutive distinct thresholds
        area += (fp - prev_fp) as f64 * (tp + prev_tp) as f64 / 2.0;
        prev_tp = tp;
        prev_fp = fp;
    }
    Ok(area / (np as f64 * nn as f64))
}

/// Area under the precision-recall curve (average precision).
///
/// Requires at least one positive pixel. Constant scores collapse the
/// curve to a single point at recall 1 and precision = prevalence.
pub fn auprc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    check_lengths(scores.len(), truth.len())?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Data("scores must be finite".into()));
    }
    let np = truth.iter().filter(|&&t| t).count();
    if np == 0 {
        return Err(Error::UndefinedMetric(
            "AUPRC requires at least one positive pixel".into(),
        ));
    }

    let pairs = sorted_pairs(scores, truth);
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let threshold = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == threshold {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / np as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// Compute all four metrics from hard predictions and soft scores.
pub fn evaluate(pred: &[bool], scores: &[f64], truth: &[bool]) -> Result<TrialMetrics> {
    Ok(TrialMetrics {
        accuracy: accuracy(pred, truth)?,
        auroc: auroc(scores, truth)?,
        auprc: auprc(scores, truth)?,
        f1: f1(pred, truth)?,
    })
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    MeanStd {
        mean,
        std: var.sqrt(),
    }
}

/// Aggregate per-trial metrics into mean and population standard deviation.
pub fn aggregate(trials: &[TrialMetrics]) -> Result<MetricsReport> {
    if trials.is_empty() {
        return Err(Error::Config("aggregate requires at least one trial".into()));
    }
    let collect = |f: fn(&TrialMetrics) -> f64| trials.iter().map(f).collect::<Vec<_>>();
    Ok(MetricsReport {
        accuracy: mean_std(&collect(|t| t.accuracy)),
        auroc: mean_std(&collect(|t| t.auroc)),
        auprc: mean_std(&collect(|t| t.auprc)),
        f1: mean_std(&collect(|t| t.f1)),
        trials: trials.len(),
    })
}
