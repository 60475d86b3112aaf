//! HDF5 ingest and export.
//!
//! Layout:
//! - `/visibilities`: rank-4 compound `{r: f32, i: f32}` over [B, F, T, P]
//! - `/flags`: rank-3 uint8 (or HDF5 bool) over [B, F, T]
//! - root attributes `pol_labels` (string list), `freq_start_hz`,
//!   `freq_step_hz`
//!
//! The `{r, i}` field names follow the h5py complex convention, so files
//! written here read back as `complex64` in numpy and vice versa.

use hdf5::types::{CompoundField, CompoundType, TypeDescriptor, VarLenUnicode};
use hdf5::H5Type;
use ndarray::{Array3, Array4, Ix3, Ix4};
use num_complex::Complex64;
use std::path::Path;

use super::{FlagMask, Polarisation, VisibilityTensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
#[repr(C)]
struct ComplexPair {
    r: f32,
    i: f32,
}

// SAFETY: repr(C) with two f32 fields at offsets 0 and 4; the descriptor
// below states exactly that layout.
unsafe impl H5Type for ComplexPair {
    fn type_descriptor() -> TypeDescriptor {
        TypeDescriptor::Compound(CompoundType {
            fields: vec![
                CompoundField::typed::<f32>("r", 0, 0),
                CompoundField::typed::<f32>("i", 4, 1),
            ],
            size: std::mem::size_of::<ComplexPair>(),
        })
    }
}

/// Keep libhdf5 from spraying its internal error stack on stderr; every
/// failure is surfaced through Result instead.
fn quiet() {
    use std::sync::Once;
    static ONCE: Once = Once::new();
    ONCE.call_once(|| hdf5::silence_errors(true));
}

/// Read visibilities and flags from an HDF5 file.
pub fn load_hdf5<P: AsRef<Path>>(path: P) -> Result<(VisibilityTensor, FlagMask)> {
    quiet();
    let file = hdf5::File::open(&path)?;

    let vis_ds = file
        .dataset("visibilities")
        .map_err(|_| Error::Schema("file is missing the /visibilities dataset".into()))?;
    let raw = vis_ds.read_dyn::<ComplexPair>().map_err(|_| {
        Error::Schema("/visibilities must be a complex compound {r, i} dataset".into())
    })?;
    let raw = raw.into_dimensionality::<Ix4>().map_err(|_| {
        Error::Schema("/visibilities must be rank 4 [baseline, freq, time, pol]".into())
    })?;
    let values: Array4<Complex64> =
        raw.mapv(|c| Complex64::new(f64::from(c.r), f64::from(c.i)));
    let (b, f, t, p) = values.dim();

    let flag_ds = file
        .dataset("flags")
        .map_err(|_| Error::Schema("file is missing the /flags dataset".into()))?;
    let flags_raw = match flag_ds.read_dyn::<u8>() {
        Ok(arr) => arr,
        Err(_) => flag_ds
            .read_dyn::<bool>()
            .map_err(|_| Error::Schema("/flags must be uint8 or bool".into()))?
            .mapv(u8::from),
    };
    let flags = flags_raw
        .into_dimensionality::<Ix3>()
        .map_err(|_| Error::Schema("/flags must be rank 3 [baseline, freq, time]".into()))?
        .mapv(|v| v != 0);
    if flags.dim() != (b, f, t) {
        return Err(Error::Schema(format!(
            "/flags shape {:?} does not match /visibilities [{b}, {f}, {t}]",
            flags.dim()
        )));
    }

    let pol_labels = read_pol_labels(&file, p)?;
    let (freq_start, freq_step) = read_freq_axis(&file);
    let freq_labels = (0..f).map(|k| freq_start + freq_step * k as f64).collect();

    let vis = VisibilityTensor::new(values, freq_labels, pol_labels)?;
    let mask = FlagMask::new(flags);
    mask.validate_against(&vis)?;
    Ok((vis, mask))
}

fn read_pol_labels(file: &hdf5::File, p: usize) -> Result<Vec<Polarisation>> {
    match file.attr("pol_labels") {
        Ok(attr) => {
            let raw: Vec<VarLenUnicode> = attr.read_raw()?;
            let labels: Result<Vec<Polarisation>> =
                raw.iter().map(|s| s.as_str().parse()).collect();
            let labels = labels?;
            if labels.len() != p {
                return Err(Error::Schema(format!(
                    "pol_labels lists {} entries for {p} polarisations",
                    labels.len()
                )));
            }
            Ok(labels)
        }
        Err(_) => match p {
            4 => Ok(Polarisation::all().to_vec()),
            1 => Ok(vec![Polarisation::XX]),
            other => Err(Error::Shape(format!(
                "polarisation count must be 1 or 4, got {other}"
            ))),
        },
    }
}

fn read_freq_axis(file: &hdf5::File) -> (f64, f64) {
    let start = file
        .attr("freq_start_hz")
        .and_then(|a| a.read_scalar::<f64>())
        .unwrap_or(0.0);
    let step = file
        .attr("freq_step_hz")
        .and_then(|a| a.read_scalar::<f64>())
        .unwrap_or(1.0);
    (start, step)
}

/// Write visibilities and flags to an HDF5 file, overwriting any existing
/// file at the path. Values are stored as 32-bit float pairs.
pub fn save_hdf5<P: AsRef<Path>>(
    path: P,
    vis: &VisibilityTensor,
    mask: &FlagMask,
) -> Result<()> {
    quiet();
    mask.validate_against(vis)?;
    let file = hdf5::File::create(&path)?;

    let packed = vis.values.mapv(|v| ComplexPair {
        r: v.re as f32,
        i: v.im as f32,
    });
    file.new_dataset::<ComplexPair>()
        .shape(packed.dim())
        .create("visibilities")?
        .write(&packed)?;

    let flags: Array3<u8> = mask.flags.mapv(u8::from);
    file.new_dataset::<u8>()
        .shape(flags.dim())
        .create("flags")?
        .write(&flags)?;

    let labels: Vec<VarLenUnicode> = vis
        .pol_labels
        .iter()
        .map(|p| p.to_string().parse().expect("static pol labels are valid"))
        .collect();
    file.new_attr::<VarLenUnicode>()
        .shape(labels.len())
        .create("pol_labels")?
        .write_raw(&labels)?;

    let start = vis.freq_labels.first().copied().unwrap_or(0.0);
    let step = if vis.freq_labels.len() > 1 {
        vis.freq_labels[1] - vis.freq_labels[0]
    } else {
        1.0
    };
    file.new_attr::<f64>()
        .create("freq_start_hz")?
        .write_scalar(&start)?;
    file.new_attr::<f64>()
        .create("freq_step_hz")?
        .write_scalar(&step)?;
    Ok(())
}
