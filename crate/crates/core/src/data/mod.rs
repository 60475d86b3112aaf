//! Visibility data handling: domain types, synthetic generation, HDF5
//! ingest, patching, and train/test splitting.

mod hdf5io;
mod patch;
mod synthetic;

pub use hdf5io::{load_hdf5, save_hdf5};
pub use patch::{assemble_plane, patch, patch_stacked, unpatch, Patch, PatchOrigin};
pub use synthetic::{generate_synthetic, RfiKind, SyntheticConfig};

use ndarray::{Array3, Array4};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Correlator polarisation products for linear feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarisation {
    XX,
    XY,
    YX,
    YY,
}

impl Polarisation {
    /// The canonical four-product ordering.
    pub fn all() -> [Polarisation; 4] {
        [
            Polarisation::XX,
            Polarisation::XY,
            Polarisation::YX,
            Polarisation::YY,
        ]
    }
}

impl fmt::Display for Polarisation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Polarisation::XX => "XX",
            Polarisation::XY => "XY",
            Polarisation::YX => "YX",
            Polarisation::YY => "YY",
        };
        f.write_str(s)
    }
}

impl FromStr for Polarisation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "XX" => Ok(Polarisation::XX),
            "XY" => Ok(Polarisation::XY),
            "YX" => Ok(Polarisation::YX),
            "YY" => Ok(Polarisation::YY),
            other => Err(Error::Schema(format!("unknown polarisation label {other:?}"))),
        }
    }
}

/// Complex visibilities over [baseline, frequency, time, polarisation].
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityTensor {
    pub values: Array4<Complex64>,
    /// Centre frequency per channel, Hz.
    pub freq_labels: Vec<f64>,
    pub pol_labels: Vec<Polarisation>,
}

impl VisibilityTensor {
    /// Build a tensor and check its invariants: one or four polarisations
    /// (four in XX, XY, YX, YY order), non-degenerate axes, finite values.
    pub fn new(
        values: Array4<Complex64>,
        freq_labels: Vec<f64>,
        pol_labels: Vec<Polarisation>,
    ) -> Result<Self> {
        let (b, f, t, p) = values.dim();
        if f == 0 || t == 0 || b == 0 {
            return Err(Error::Shape(format!(
                "visibility axes must be non-empty, got [B={b}, F={f}, T={t}, P={p}]"
            )));
        }
        match p {
            1 => {}
            4 => {
                if pol_labels != Polarisation::all() {
                    return Err(Error::Schema(format!(
                        "four-polarisation data must be ordered XX, XY, YX, YY; got {pol_labels:?}"
                    )));
                }
            }
            other => {
                return Err(Error::Shape(format!(
                    "polarisation count must be 1 or 4, got {other}"
                )));
            }
        }
        if pol_labels.len() != p {
            return Err(Error::Shape(format!(
                "{} pol labels for {p} polarisations",
                pol_labels.len()
            )));
        }
        if freq_labels.len() != f {
            return Err(Error::Shape(format!(
                "{} frequency labels for {f} channels",
                freq_labels.len()
            )));
        }
        if let Some(idx) = first_non_finite(&values) {
            return Err(Error::Data(format!(
                "non-finite visibility at (baseline, freq, time, pol) = {idx:?}"
            )));
        }
        Ok(Self {
            values,
            freq_labels,
            pol_labels,
        })
    }

    pub fn baselines(&self) -> usize {
        self.values.dim().0
    }

    pub fn freq_channels(&self) -> usize {
        self.values.dim().1
    }

    pub fn time_steps(&self) -> usize {
        self.values.dim().2
    }

    pub fn polarisations(&self) -> usize {
        self.values.dim().3
    }
}

fn first_non_finite(values: &Array4<Complex64>) -> Option<(usize, usize, usize, usize)> {
    for (idx, v) in values.indexed_iter() {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Some(idx);
        }
    }
    None
}

/// Per-pixel ground-truth RFI flags, shared across polarisations.
#[derive(Debug, Clone, PartialEq)]
pub struct FlagMask {
    pub flags: Array3<bool>,
}

impl FlagMask {
    pub fn new(flags: Array3<bool>) -> Self {
        Self { flags }
    }

    /// Check [B, F, T] agreement with the owning visibility tensor.
    pub fn validate_against(&self, vis: &VisibilityTensor) -> Result<()> {
        let (b, f, t) = self.flags.dim();
        let (vb, vf, vt, _) = vis.values.dim();
        if (b, f, t) != (vb, vf, vt) {
            return Err(Error::Shape(format!(
                "flag shape [{b}, {f}, {t}] does not match visibilities [{vb}, {vf}, {vt}]"
            )));
        }
        Ok(())
    }

    /// Fraction of flagged pixels.
    pub fn density(&self) -> f64 {
        let total = self.flags.len();
        let set = self.flags.iter().filter(|&&x| x).count();
        set as f64 / total as f64
    }
}

/// Disjoint train/test patch sets produced by a seeded shuffle.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<Patch>,
    pub test: Vec<Patch>,
    pub seed: u64,
}

/// Split patches into train and test sets.
///
/// The shuffle is a pure function of the seed; the test size is the
/// rounded fraction, so the sizes are within one patch of the request.
pub fn split(patches: Vec<Patch>, test_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if patches.is_empty() {
        return Err(Error::Config("cannot split an empty patch list".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n = patches.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut indexed: Vec<Option<Patch>> = patches.into_iter().map(Some).collect();
    let mut test = Vec::with_capacity(n_test);
    let mut train = Vec::with_capacity(n - n_test);
    for (k, &i) in order.iter().enumerate() {
        let p = indexed[i].take().expect("each index visited once");
        if k < n_test {
            test.push(p);
        } else {
            train.push(p);
        }
    }
    Ok(DatasetSplit { train, test, seed })
}
