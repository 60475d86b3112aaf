//! Neuromorphic power-usage model.
//!
//! Per spectrogram patch the synaptic-operation proxy is
//! C_in x C_out x R_s per layer and exposure step, where the driving rate
//! is the presynaptic layer's spike rate. The lower-bound energy prices
//! each operation at the energy of a single add at 40nm (0.9 pJ). Upper
//! bounds count how many Xylo chips an N-channel, P-polarisation
//! instrument needs - N*P/16 chips for direct polarisation input,
//! ceil(N/15) for the degree-of-polarisation reduction - at the chip's
//! 550 uW maximum draw. The balanced estimate adds the measured 216 uW
//! idle draw to the lower bound. Whole-spectrogram figures multiply the
//! per-patch values by the patch count: (512/4)^2 for full polarisation,
//! ceil(512/15)^2 for DoP, at the nominal 512-channel scale.
//!
//! Chip counts are kept in exact rational arithmetic; floats appear only
//! at the final unit conversion.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::PolarisationMode;

/// Hardware energy constants. Defaults are the published figures; any
/// override is recorded in the emitted report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyConstants {
    /// Energy of one add operation, joules (0.9 pJ at 40nm CMOS).
    pub add_energy_j: f64,
    /// Maximum Xylo power draw, watts (550 uW).
    pub xylo_max_power_w: f64,
    /// Measured Xylo idle power draw, watts (216 uW).
    pub xylo_idle_power_w: f64,
}

impl Default for EnergyConstants {
    fn default() -> Self {
        Self {
            add_energy_j: 0.9e-12,
            xylo_max_power_w: 550e-6,
            xylo_idle_power_w: 216e-6,
        }
    }
}

/// Patch width in spectrogram channels assumed by each whole-spectrogram
/// scaling rule.
pub const FULL_POL_PATCH_CHANNELS: usize = 4;
pub const DOP_PATCH_CHANNELS: usize = 15;

/// Nominal spectrogram extent used by the published scaling factors.
pub const NOMINAL_SPECTROGRAM_CHANNELS: usize = 512;

/// One layer's contribution: input width, output width, driving spike
/// rate.
pub type LayerRate = (usize, usize, f64);

/// Synaptic-operation proxy for one exposure step:
/// sum over layers of C_in * C_out * R_s.
pub fn flops_snn(layers: &[LayerRate]) -> Result<f64> {
    let mut total = 0.0;
    for &(c_in, c_out, rate) in layers {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Domain(format!(
                "spike rate must be in [0, 1], got {rate}"
            )));
        }
        total += (c_in * c_out) as f64 * rate;
    }
    Ok(total)
}

/// Synaptic operations for one complete patch inference: the per-step
/// proxy accumulated over the exposure window.
pub fn flops_snn_per_inference(layers: &[LayerRate], exposure_steps: usize) -> Result<f64> {
    Ok(flops_snn(layers)? * exposure_steps as f64)
}

/// Lower-bound energy of one patch inference: operations times the energy
/// of a single add.
pub fn lower_bound_patch_energy(flops: f64, k: &EnergyConstants) -> Result<f64> {
    if flops < 0.0 {
        return Err(Error::Domain(format!(
            "operation count must be >= 0, got {flops}"
        )));
    }
    Ok(flops * k.add_energy_j)
}

/// Exact chip count needed for an N-channel, P-polarisation instrument.
pub fn chip_count(n_channels: usize, n_pols: usize, mode: PolarisationMode) -> Ratio<u64> {
    match mode {
        PolarisationMode::Full => Ratio::new((n_channels * n_pols) as u64, 16),
        PolarisationMode::Dop => {
            Ratio::from_integer((n_channels as u64).div_ceil(DOP_PATCH_CHANNELS as u64))
        }
    }
}

/// Upper-bound power at the chip's maximum draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperBound {
    pub chips: Ratio<u64>,
    pub watts: f64,
}

pub fn upper_bound_power(
    n_channels: usize,
    n_pols: usize,
    mode: PolarisationMode,
    k: &EnergyConstants,
) -> UpperBound {
    let chips = chip_count(n_channels, n_pols, mode);
    let chips_f = *chips.numer() as f64 / *chips.denom() as f64;
    UpperBound {
        chips,
        watts: chips_f * k.xylo_max_power_w,
    }
}

/// Exact upper bound in microwatts for an integer per-chip draw, keeping
/// the arithmetic rational end to end.
pub fn upper_bound_microwatts_exact(chips: Ratio<u64>, max_power_uw: u64) -> Ratio<u64> {
    chips * Ratio::from_integer(max_power_uw)
}

/// Patches per whole spectrogram for the scaling rules, generalised over
/// the channel count: ceil(C / patch)^2.
pub fn spectrogram_patch_count_for(mode: PolarisationMode, channels: usize) -> u64 {
    let patch = match mode {
        PolarisationMode::Full => FULL_POL_PATCH_CHANNELS,
        PolarisationMode::Dop => DOP_PATCH_CHANNELS,
    } as u64;
    let tiles = (channels as u64).div_ceil(patch);
    tiles * tiles
}

/// Patch count at the nominal 512-channel scale: 16384 for full
/// polarisation, 1225 for DoP.
pub fn spectrogram_patch_count(mode: PolarisationMode) -> u64 {
    spectrogram_patch_count_for(mode, NOMINAL_SPECTROGRAM_CHANNELS)
}

/// How the idle draw enters the balanced estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BalancedMode {
    /// Idle draw once per active chip.
    #[default]
    PerChip,
    /// Idle draw once in total.
    SingleChip,
}

/// Whole-spectrogram energy estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Synaptic operations of one patch inference.
    pub flops_snn: f64,
    /// Lower-bound energy of one patch inference, joules.
    pub patch_energy_j: f64,
    pub patch_count: u64,
    /// Whole-spectrogram inferences per second assumed for the power
    /// figures.
    pub spectrograms_per_second: f64,
    /// Implied patch inference rate, patches per second.
    pub inference_rate: f64,
    /// Lower bound, watts: patch energy x patch count x cadence.
    pub lower_w: f64,
    /// Upper bound, watts: chip count x maximum chip draw.
    pub upper_w: f64,
    /// Balanced, watts: lower bound plus the idle contribution.
    pub balanced_w: f64,
    pub chips: f64,
    pub balanced_mode: BalancedMode,
    pub constants: EnergyConstants,
    /// Unit convention, embedded in every report.
    pub convention: String,
}

/// Parameters for a whole-spectrogram estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrogramScale {
    pub channels: usize,
    pub pols: usize,
    /// Whole-spectrogram inferences per second.
    pub cadence: f64,
    pub balanced_mode: BalancedMode,
}

impl Default for SpectrogramScale {
    fn default() -> Self {
        Self {
            channels: NOMINAL_SPECTROGRAM_CHANNELS,
            pols: 4,
            cadence: 1.0,
            balanced_mode: BalancedMode::PerChip,
        }
    }
}

fn convention_string(scale: &SpectrogramScale) -> String {
    format!(
        "per-patch energy in joules; whole-spectrogram power in watts assuming {} spectrogram inference(s) per second; balanced = lower + idle x {}",
        scale.cadence,
        match scale.balanced_mode {
            BalancedMode::PerChip => "chip count",
            BalancedMode::SingleChip => "1",
        }
    )
}

/// Build a whole-spectrogram report from a per-patch operation count.
pub fn spectrogram_report(
    flops_per_inference: f64,
    mode: PolarisationMode,
    k: &EnergyConstants,
    scale: &SpectrogramScale,
) -> Result<EnergyReport> {
    let patch_energy = lower_bound_patch_energy(flops_per_inference, k)?;
    spectrogram_report_from_patch_energy(flops_per_inference, patch_energy, mode, k, scale)
}

/// Build a report from an externally supplied per-patch energy (used when
/// reproducing published per-patch figures).
pub fn spectrogram_report_from_patch_energy(
    flops_per_inference: f64,
    patch_energy_j: f64,
    mode: PolarisationMode,
    k: &EnergyConstants,
    scale: &SpectrogramScale,
) -> Result<EnergyReport> {
    if scale.cadence <= 0.0 {
        return Err(Error::Config(format!(
            "cadence must be > 0 spectrograms per second, got {}",
            scale.cadence
        )));
    }
    if patch_energy_j < 0.0 {
        return Err(Error::Domain(format!(
            "patch energy must be >= 0, got {patch_energy_j}"
        )));
    }
    let patch_count = spectrogram_patch_count_for(mode, scale.channels);
    let inference_rate = patch_count as f64 * scale.cadence;
    let lower_w = patch_energy_j * inference_rate;
    let upper = upper_bound_power(scale.channels, scale.pols, mode, k);
    let chips_f = *upper.chips.numer() as f64 / *upper.chips.denom() as f64;
    let idle = match scale.balanced_mode {
        BalancedMode::PerChip => k.xylo_idle_power_w * chips_f,
        BalancedMode::SingleChip => k.xylo_idle_power_w,
    };
    Ok(EnergyReport {
        flops_snn: flops_per_inference,
        patch_energy_j,
        patch_count,
        spectrograms_per_second: scale.cadence,
        inference_rate,
        lower_w,
        upper_w: upper.watts,
        balanced_w: lower_w + idle,
        chips: chips_f,
        balanced_mode: scale.balanced_mode,
        constants: *k,
        convention: convention_string(scale),
    })
}
