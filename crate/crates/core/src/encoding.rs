//! Spike encoding and decoding.
//!
//! Inputs are turned into spikes by latency coding: each channel emits a
//! single spike inside an exposure window of `e` steps, and larger values
//! spike earlier. Supervision masks become all-ones (flagged) or all-zeros
//! (clean) target rows, so the output comparison reduces to spike counts.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Latency mapping from value to spike time. Only the linear curve is
/// implemented; the enum exists so the config records the convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LatencyCurve {
    #[default]
    Linear,
}

/// Encoder and decoder settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodingConfig {
    /// Simulation steps per visibility time-step (e >= 2).
    pub exposure_steps: usize,
    pub latency_curve: LatencyCurve,
    /// Spike-count fraction at which a pixel is declared flagged.
    pub decode_threshold: f64,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            exposure_steps: 4,
            latency_curve: LatencyCurve::Linear,
            decode_threshold: 0.5,
        }
    }
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.exposure_steps < 2 {
            return Err(Error::Config(format!(
                "exposure_steps must be >= 2, got {}",
                self.exposure_steps
            )));
        }
        if !(self.decode_threshold > 0.0 && self.decode_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "decode_threshold must be in (0, 1], got {}",
                self.decode_threshold
            )));
        }
        Ok(())
    }
}

/// Binary spike tensor over [channel, exposure step].
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    pub spikes: Array2<bool>,
}

impl SpikeTrain {
    pub fn channels(&self) -> usize {
        self.spikes.nrows()
    }

    pub fn exposure(&self) -> usize {
        self.spikes.ncols()
    }

    /// Spike count per channel.
    pub fn counts(&self) -> Vec<usize> {
        self.spikes
            .rows()
            .into_iter()
            .map(|row| row.iter().filter(|&&s| s).count())
            .collect()
    }

    /// Fraction of (channel, step) slots that carry a spike.
    pub fn rate(&self) -> f64 {
        let total = self.spikes.iter().filter(|&&s| s).count();
        total as f64 / self.spikes.len() as f64
    }
}

/// Target spike train: all-ones row for a flagged pixel, all-zeros otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTrain {
    pub spikes: Array2<bool>,
}

impl TargetTrain {
    pub fn counts(&self) -> Vec<usize> {
        self.spikes
            .rows()
            .into_iter()
            .map(|row| row.iter().filter(|&&s| s).count())
            .collect()
    }
}

/// Latency-encode a vector of values in [0, 1].
///
/// Channel c spikes exactly once, at step round((1 - x_c) * (e - 1)).
/// A zero value still spikes, at the last step, keeping the
/// one-spike-per-channel invariant.
pub fn latency_encode(x: &[f64], exposure_steps: usize) -> Result<SpikeTrain> {
    if exposure_steps < 2 {
        return Err(Error::Config(format!(
            "exposure_steps must be >= 2, got {exposure_steps}"
        )));
    }
    for (c, &v) in x.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!(
                "latency encoder input out of [0, 1] at channel {c}: {v}"
            )));
        }
    }
    let mut spikes = Array2::from_elem((x.len(), exposure_steps), false);
    for (c, &v) in x.iter().enumerate() {
        let t = ((1.0 - v) * (exposure_steps - 1) as f64).round() as usize;
        spikes[(c, t)] = true;
    }
    Ok(SpikeTrain { spikes })
}

/// Hard decode: pixel flagged iff spike count >= threshold_fraction * e.
/// The boundary is inclusive.
pub fn decode_spike_count(out: &SpikeTrain, threshold_fraction: f64) -> Result<Vec<bool>> {
    if !(threshold_fraction > 0.0 && threshold_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "threshold_fraction must be in (0, 1], got {threshold_fraction}"
        )));
    }
    let e = out.exposure() as f64;
    Ok(out
        .counts()
        .into_iter()
        .map(|c| c as f64 >= threshold_fraction * e)
        .collect())
}

/// Soft decode: spike count normalised by exposure, a score in [0, 1].
pub fn decode_soft(counts: &[usize], exposure_steps: usize) -> Vec<f64> {
    counts
        .iter()
        .map(|&c| c as f64 / exposure_steps as f64)
        .collect()
}

/// Encode a supervision mask column into a target train.
pub fn encode_target(mask_row: &[bool], exposure_steps: usize) -> Result<TargetTrain> {
    if exposure_steps < 2 {
        return Err(Error::Config(format!(
            "exposure_steps must be >= 2, got {exposure_steps}"
        )));
    }
    let mut spikes = Array2::from_elem((mask_row.len(), exposure_steps), false);
    for (c, &flagged) in mask_row.iter().enumerate() {
        if flagged {
            spikes.row_mut(c).fill(true);
        }
    }
    Ok(TargetTrain { spikes })
}
