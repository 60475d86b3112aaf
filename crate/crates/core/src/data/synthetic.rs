//! Deterministic synthetic visibility generator.
//!
//! A desk-scale stand-in for a full instrument simulator: a smooth complex
//! background (polynomial bandpass times a slow time drift, plus circular
//! Gaussian noise) with three classes of injected contamination mirroring
//! the usual simulator RFI morphologies. Flags are true exactly where RFI
//! was injected, and the whole tensor is a pure function of the seed.

use ndarray::{Array3, Array4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::{FlagMask, Polarisation, VisibilityTensor};
use crate::error::{Error, Result};

/// Injected RFI amplitude relative to the mean background magnitude. Large
/// enough that flagged pixels sit well above 5x the clean-pixel mean.
const RFI_AMPLITUDE_FACTOR: f64 = 20.0;

/// Per-polarisation injection gains: RFI is strongly linearly polarised, so
/// XX carries the full amplitude and the other products see a fraction.
const POL_INJECTION: [f64; 4] = [1.0, 0.05, 0.05, 0.1];

/// Relative background gain per polarisation (weak cross-hands).
const POL_BACKGROUND: [f64; 4] = [1.0, 0.1, 0.1, 1.0];

/// Contamination morphology classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RfiKind {
    /// High amplitude along one frequency row for a span of time.
    NarrowbandPersistent,
    /// One time column lit across a span of frequency.
    BroadbandBurst,
    /// Isolated single-pixel events.
    Blip,
}

impl RfiKind {
    pub fn all() -> Vec<RfiKind> {
        vec![
            RfiKind::NarrowbandPersistent,
            RfiKind::BroadbandBurst,
            RfiKind::Blip,
        ]
    }
}

/// Generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub baselines: usize,
    pub freq_channels: usize,
    pub time_steps: usize,
    pub rfi_kinds: Vec<RfiKind>,
    /// Target fraction of flagged pixels, in [0, 0.5].
    pub rfi_fraction: f64,
    /// Circular Gaussian noise sigma relative to the unit background.
    pub noise_level: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            baselines: 1,
            freq_channels: 64,
            time_steps: 64,
            rfi_kinds: RfiKind::all(),
            rfi_fraction: 0.1,
            noise_level: 0.05,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.rfi_fraction) {
            return Err(Error::Config(format!(
                "rfi_fraction must be in [0, 0.5], got {}",
                self.rfi_fraction
            )));
        }
        if self.freq_channels < 16 || self.time_steps < 16 {
            return Err(Error::Config(format!(
                "synthetic spectrograms need F, T >= 16, got {} x {}",
                self.freq_channels, self.time_steps
            )));
        }
        if self.baselines == 0 {
            return Err(Error::Config("baselines must be >= 1".into()));
        }
        if self.rfi_fraction > 0.0 && self.rfi_kinds.is_empty() {
            return Err(Error::Config(
                "rfi_fraction > 0 requires at least one RFI kind".into(),
            ));
        }
        if self.noise_level < 0.0 {
            return Err(Error::Config(format!(
                "noise_level must be >= 0, got {}",
                self.noise_level
            )));
        }
        Ok(())
    }
}

/// Generate visibilities and ground-truth flags from the config.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<(VisibilityTensor, FlagMask)> {
    cfg.validate()?;
    let (nb, nf, nt) = (cfg.baselines, cfg.freq_channels, cfg.time_steps);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_level.max(f64::MIN_POSITIVE)).expect("sigma > 0");

    let mut values = Array4::from_elem((nb, nf, nt, 4), Complex64::new(0.0, 0.0));
    let mut flags = Array3::from_elem((nb, nf, nt), false);

    for b in 0..nb {
        // smooth background: quadratic bandpass x slow drift, unit scale
        let a1: f64 = rng.gen_range(-0.4..0.4);
        let a2: f64 = rng.gen_range(-0.4..0.4);
        let d1: f64 = rng.gen_range(-0.2..0.2);
        let d2: f64 = rng.gen_range(-0.2..0.2);
        let yy_gain: f64 = rng.gen_range(0.9..1.1);

        let mut magnitude_sum = 0.0;
        for f in 0..nf {
            let fh = 2.0 * f as f64 / (nf - 1) as f64 - 1.0;
            let bandpass = 1.0 + a1 * fh + a2 * fh * fh;
            for t in 0..nt {
                let th = 2.0 * t as f64 / (nt - 1) as f64 - 1.0;
                let drift = 1.0 + d1 * th + d2 * (TAU * 0.5 * th).sin();
                let phase = TAU * (0.05 * fh + 0.03 * th);
                for (p, &gain) in POL_BACKGROUND.iter().enumerate() {
                    let pol_gain = if p == 3 { gain * yy_gain } else { gain };
                    let amp = pol_gain * bandpass * drift;
                    let v = Complex64::from_polar(amp, phase)
                        + Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng));
                    values[(b, f, t, p)] = v;
                    magnitude_sum += v.norm();
                }
            }
        }
        let mean_magnitude = magnitude_sum / (nf * nt * 4) as f64;
        let rfi_amp = RFI_AMPLITUDE_FACTOR * mean_magnitude;

        // place flags until the per-baseline budget is met exactly
        let budget = (cfg.rfi_fraction * (nf * nt) as f64).round() as usize;
        if budget > 0 {
            place_rfi_flags(&mut flags, b, nf, nt, budget, &cfg.rfi_kinds, &mut rng);
        }

        // inject on flagged pixels, strongly polarised towards XX
        for f in 0..nf {
            for t in 0..nt {
                if flags[(b, f, t)] {
                    let phase = TAU * rng.gen::<f64>();
                    for (p, &gain) in POL_INJECTION.iter().enumerate() {
                        values[(b, f, t, p)] += Complex64::from_polar(rfi_amp * gain, phase);
                    }
                }
            }
        }
    }

    let freq_labels = (0..nf).map(|k| 100e6 + 1e5 * k as f64).collect();
    let vis = VisibilityTensor::new(values, freq_labels, Polarisation::all().to_vec())?;
    let mask = FlagMask::new(flags);
    mask.validate_against(&vis)?;
    Ok((vis, mask))
}

fn place_rfi_flags(
    flags: &mut Array3<bool>,
    b: usize,
    nf: usize,
    nt: usize,
    budget: usize,
    kinds: &[RfiKind],
    rng: &mut ChaCha8Rng,
) {
    let mut placed = 0;
    while placed < budget {
        let kind = kinds[rng.gen_range(0..kinds.len())];
        match kind {
            RfiKind::NarrowbandPersistent => {
                let f = rng.gen_range(0..nf);
                let span = rng.gen_range(nt / 4..=nt);
                let t0 = rng.gen_range(0..=nt - span);
                for t in t0..t0 + span {
                    if placed == budget {
                        break;
                    }
                    if !flags[(b, f, t)] {
                        flags[(b, f, t)] = true;
                        placed += 1;
                    }
                }
            }
            RfiKind::BroadbandBurst => {
                let t = rng.gen_range(0..nt);
                let span = rng.gen_range(nf / 4..=nf);
                let f0 = rng.gen_range(0..=nf - span);
                for f in f0..f0 + span {
                    if placed == budget {
                        break;
                    }
                    if !flags[(b, f, t)] {
                        flags[(b, f, t)] = true;
                        placed += 1;
                    }
                }
            }
            RfiKind::Blip => {
                // random probes, then a linear sweep if the grid is crowded
                let mut hit = false;
                for _ in 0..64 {
                    let f = rng.gen_range(0..nf);
                    let t = rng.gen_range(0..nt);
                    if !flags[(b, f, t)] {
                        flags[(b, f, t)] = true;
                        placed += 1;
                        hit = true;
                        break;
                    }
                }
                if !hit {
                    'scan: for f in 0..nf {
                        for t in 0..nt {
                            if !flags[(b, f, t)] {
                                flags[(b, f, t)] = true;
                                placed += 1;
                                break 'scan;
                            }
                        }
                    }
                }
            }
        }
    }
}
