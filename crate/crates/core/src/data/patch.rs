//! Non-overlapping tiling of spectrogram planes into network-sized patches.
//!
//! Edge tiles that fall off the plane are zero-padded; the origin records
//! the true extent so reassembly crops the padding away again.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Where a patch came from and how much of it is real data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchOrigin {
    pub baseline: usize,
    pub freq_offset: usize,
    pub time_offset: usize,
    /// Unpadded row extent (frequency direction).
    pub rows: usize,
    /// Unpadded column extent (time direction).
    pub cols: usize,
}

/// One training/evaluation patch: feature channels over patch time steps,
/// with the matching supervision mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    /// [C_in, T_patch] features. For stacked multi-plane patches C_in is a
    /// multiple of the mask height.
    pub values: Array2<f64>,
    /// [C_mask, T_patch] per-pixel flags.
    pub mask: Array2<bool>,
    pub origin: PatchOrigin,
}

fn check_dims(patch_freq: usize, patch_time: usize) -> Result<()> {
    if patch_freq < 1 || patch_time < 1 {
        return Err(Error::Config(format!(
            "patch dimensions must be >= 1, got {patch_freq} x {patch_time}"
        )));
    }
    Ok(())
}

fn tile_grid(c: usize, t: usize, pf: usize, pt: usize) -> Vec<PatchOrigin> {
    let mut origins = Vec::new();
    let mut f0 = 0;
    while f0 < c {
        let mut t0 = 0;
        while t0 < t {
            origins.push(PatchOrigin {
                baseline: 0,
                freq_offset: f0,
                time_offset: t0,
                rows: (c - f0).min(pf),
                cols: (t - t0).min(pt),
            });
            t0 += pt;
        }
        f0 += pf;
    }
    origins
}

fn cut_plane(plane: ArrayView2<'_, f64>, o: &PatchOrigin, pf: usize, pt: usize) -> Array2<f64> {
    let mut tile = Array2::zeros((pf, pt));
    for r in 0..o.rows {
        for cix in 0..o.cols {
            tile[(r, cix)] = plane[(o.freq_offset + r, o.time_offset + cix)];
        }
    }
    tile
}

fn cut_mask(mask: ArrayView2<'_, bool>, o: &PatchOrigin, pf: usize, pt: usize) -> Array2<bool> {
    let mut tile = Array2::from_elem((pf, pt), false);
    for r in 0..o.rows {
        for cix in 0..o.cols {
            tile[(r, cix)] = mask[(o.freq_offset + r, o.time_offset + cix)];
        }
    }
    tile
}

/// Tile a single feature plane and its mask into ceil(C/pf) x ceil(T/pt)
/// patches.
pub fn patch(
    features: ArrayView2<'_, f64>,
    mask: ArrayView2<'_, bool>,
    patch_freq: usize,
    patch_time: usize,
    baseline: usize,
) -> Result<Vec<Patch>> {
    check_dims(patch_freq, patch_time)?;
    let (c, t) = features.dim();
    if mask.dim() != (c, t) {
        return Err(Error::Shape(format!(
            "mask shape {:?} does not match features {:?}",
            mask.dim(),
            features.dim()
        )));
    }
    Ok(tile_grid(c, t, patch_freq, patch_time)
        .into_iter()
        .map(|mut o| {
            o.baseline = baseline;
            Patch {
                values: cut_plane(features, &o, patch_freq, patch_time),
                mask: cut_mask(mask, &o, patch_freq, patch_time),
                origin: o,
            }
        })
        .collect())
}

/// Tile several co-registered feature planes (for example the four
/// polarisation magnitudes) with a shared mask, stacking the planes
/// plane-major into [n_planes * pf, pt] patch values.
pub fn patch_stacked(
    planes: &[ArrayView2<'_, f64>],
    mask: ArrayView2<'_, bool>,
    patch_freq: usize,
    patch_time: usize,
    baseline: usize,
) -> Result<Vec<Patch>> {
    check_dims(patch_freq, patch_time)?;
    if planes.is_empty() {
        return Err(Error::Config("patch_stacked requires at least one plane".into()));
    }
    let (c, t) = planes[0].dim();
    for (i, p) in planes.iter().enumerate() {
        if p.dim() != (c, t) {
            return Err(Error::Shape(format!(
                "plane {i} shape {:?} differs from plane 0 {:?}",
                p.dim(),
                (c, t)
            )));
        }
    }
    if mask.dim() != (c, t) {
        return Err(Error::Shape(format!(
            "mask shape {:?} does not match planes {:?}",
            mask.dim(),
            (c, t)
        )));
    }
    Ok(tile_grid(c, t, patch_freq, patch_time)
        .into_iter()
        .map(|mut o| {
            o.baseline = baseline;
            let mut values = Array2::zeros((planes.len() * patch_freq, patch_time));
            for (pi, plane) in planes.iter().enumerate() {
                let tile = cut_plane(*plane, &o, patch_freq, patch_time);
                values
                    .slice_mut(ndarray::s![pi * patch_freq..(pi + 1) * patch_freq, ..])
                    .assign(&tile);
            }
            Patch {
                values,
                mask: cut_mask(mask, &o, patch_freq, patch_time),
                origin: o,
            }
        })
        .collect())
}

/// Reassemble a [C, T] plane from origin-tagged tiles. Every pixel must be
/// covered exactly once.
pub fn assemble_plane<'a, I>(tiles: I, c: usize, t: usize) -> Result<Array2<f64>>
where
    I: IntoIterator<Item = (&'a PatchOrigin, ArrayView2<'a, f64>)>,
{
    let mut out = Array2::zeros((c, t));
    let mut covered = Array2::from_elem((c, t), false);
    for (o, tile) in tiles {
        if o.rows > tile.nrows() || o.cols > tile.ncols() {
            return Err(Error::Assembly(format!(
                "tile {:?} smaller than its recorded extent {}x{}",
                tile.dim(),
                o.rows,
                o.cols
            )));
        }
        for r in 0..o.rows {
            for cix in 0..o.cols {
                let (fr, tc) = (o.freq_offset + r, o.time_offset + cix);
                if fr >= c || tc >= t {
                    return Err(Error::Assembly(format!(
                        "tile at ({}, {}) extends past the [{c}, {t}] plane",
                        o.freq_offset, o.time_offset
                    )));
                }
                if covered[(fr, tc)] {
                    return Err(Error::Assembly(format!(
                        "pixel ({fr}, {tc}) covered by more than one tile"
                    )));
                }
                covered[(fr, tc)] = true;
                out[(fr, tc)] = tile[(r, cix)];
            }
        }
    }
    if let Some(((fr, tc), _)) = covered.indexed_iter().find(|(_, &v)| !v) {
        return Err(Error::Assembly(format!("pixel ({fr}, {tc}) not covered by any tile")));
    }
    Ok(out)
}

/// Exact inverse of [`patch`] on the unpadded region.
pub fn unpatch(patches: &[Patch], c: usize, t: usize) -> Result<Array2<f64>> {
    assemble_plane(
        patches.iter().map(|p| (&p.origin, p.values.view())),
        c,
        t,
    )
}
