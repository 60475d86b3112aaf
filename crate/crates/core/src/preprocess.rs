//! Transforms from raw complex visibilities to bounded real network inputs:
//! magnitude extraction, divisive normalisation, Stokes construction, the
//! degree-of-polarisation reduction, and unit-interval scaling.
//!
//! Conventions (linear feeds): I = |XX| + |YY|, Q = |XX| - |YY|,
//! U = Re(XY + YX), V = Im(YX - XY). The divisive-normalisation window runs
//! over the frequency axis only, with symmetric (edge-mirroring) boundary
//! handling.

use ndarray::{Array2, Array4, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::data::VisibilityTensor;
use crate::error::{Error, Result};

/// Which polarisation reduction feeds the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PolarisationMode {
    /// All four polarisation magnitudes stacked as input channels.
    #[default]
    Full,
    /// Single degree-of-polarisation plane.
    Dop,
}

/// Unit-interval scaling applied per spectrogram plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMode {
    #[default]
    Minmax,
    LogMinmax,
}

/// Divisive-normalisation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DnConfig {
    pub enabled: bool,
    /// Frequency-axis window extent; odd and >= 1.
    pub window: usize,
    pub sigma: f64,
    pub exponent: f64,
}

impl Default for DnConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            window: 5,
            sigma: 1.0,
            exponent: 1.0,
        }
    }
}

impl DnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "divisive normalisation window must be odd and >= 1, got {}",
                self.window
            )));
        }
        if self.sigma <= 0.0 {
            return Err(Error::Config(format!(
                "divisive normalisation sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if self.exponent <= 0.0 {
            return Err(Error::Config(format!(
                "divisive normalisation exponent must be > 0, got {}",
                self.exponent
            )));
        }
        Ok(())
    }
}

/// Stokes parameters of one pixel. The circular component is named `v_s`
/// to keep it apart from the visibility symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesPixel {
    pub i: f64,
    pub q: f64,
    pub u: f64,
    pub v_s: f64,
}

/// Elementwise complex modulus of the visibility tensor.
pub fn magnitude(vis: &VisibilityTensor) -> Array4<f64> {
    vis.values.mapv(|v| v.norm())
}

/// Divisive normalisation of one `[F, T]` plane:
/// `y[f,t] = x^n / (sigma^n + mean(x[f-w ..= f+w, t])^n)`.
pub fn divisive_normalise(x: ArrayView2<'_, f64>, cfg: &DnConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    if let Some((idx, &v)) = x.indexed_iter().find(|(_, &v)| v < 0.0 || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "divisive normalisation requires finite non-negative input, got {v} at {idx:?}"
        )));
    }
    let (nf, nt) = x.dim();
    let half = (cfg.window - 1) / 2;
    let n = cfg.exponent;
    let sigma_n = cfg.sigma.powf(n);

    let mut out = Array2::zeros((nf, nt));
    for f in 0..nf {
        for t in 0..nt {
            let mut acc = 0.0;
            for k in 0..cfg.window {
                let offset = k as isize - half as isize;
                let idx = reflect_index(f as isize + offset, nf);
                acc += x[(idx, t)];
            }
            let local_mean = acc / cfg.window as f64;
            out[(f, t)] = x[(f, t)].powf(n) / (sigma_n + local_mean.powf(n));
        }
    }
    Ok(out)
}

/// Mirror an out-of-range index back into [0, len), repeating the edge
/// sample (-1 -> 0, len -> len - 1).
fn reflect_index(i: isize, len: usize) -> usize {
    let len = len as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= len {
            i = 2 * len - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Combine the four polarisation products of one pixel into Stokes
/// parameters.
pub fn stokes(xx: Complex64, xy: Complex64, yx: Complex64, yy: Complex64) -> StokesPixel {
    StokesPixel {
        i: xx.norm() + yy.norm(),
        q: xx.norm() - yy.norm(),
        u: (xy + yx).re,
        v_s: (yx - xy).im,
    }
}

/// Degree of polarisation: sqrt(Q^2 + U^2 + V^2) / max(I, epsilon), clamped
/// to [0, 1].
pub fn degree_of_polarisation(s: &StokesPixel, epsilon: f64) -> f64 {
    let polarised = (s.q * s.q + s.u * s.u + s.v_s * s.v_s).sqrt();
    (polarised / s.i.max(epsilon)).clamp(0.0, 1.0)
}

/// Scale a plane into [0, 1]. A constant plane maps to all zeros. For
/// log-minmax, values are floored at 1e-12 before taking log10.
pub fn scale_to_unit(x: ArrayView2<'_, f64>, mode: ScalingMode) -> Array2<f64> {
    let transformed: Array2<f64> = match mode {
        ScalingMode::Minmax => x.to_owned(),
        ScalingMode::LogMinmax => x.mapv(|v| v.max(1e-12).log10()),
    };
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in transformed.iter() {
        min = min.min(v);
        max = max.max(v);
    }
    let range = max - min;
    if range <= 0.0 {
        return Array2::zeros(x.dim());
    }
    transformed.mapv(|v| ((v - min) / range).clamp(0.0, 1.0))
}

/// Epsilon guarding the DoP division.
pub const DOP_EPSILON: f64 = 1e-12;

/// Build the per-baseline network input planes: four DN'd magnitude planes
/// for full-polarisation mode, or a single DoP plane. Divisive
/// normalisation acts on the magnitude planes before the Stokes
/// combination; original phases are kept for the cross-hand terms.
pub fn feature_planes(
    vis: &VisibilityTensor,
    baseline: usize,
    mode: PolarisationMode,
    dn: &DnConfig,
) -> Result<Vec<Array2<f64>>> {
    let (_, nf, nt, np) = vis.values.dim();
    if mode == PolarisationMode::Dop && np != 4 {
        return Err(Error::Config(
            "degree-of-polarisation mode requires four polarisations".into(),
        ));
    }

    // per-polarisation magnitude planes, DN'd when enabled
    let mut mags: Vec<Array2<f64>> = Vec::with_capacity(np);
    for p in 0..np {
        let plane = Array2::from_shape_fn((nf, nt), |(f, t)| {
            vis.values[(baseline, f, t, p)].norm()
        });
        if dn.enabled {
            mags.push(divisive_normalise(plane.view(), dn)?);
        } else {
            mags.push(plane);
        }
    }

    match mode {
        PolarisationMode::Full => Ok(mags),
        PolarisationMode::Dop => {
            let mut dop = Array2::zeros((nf, nt));
            for f in 0..nf {
                for t in 0..nt {
                    let rescaled = |p: usize| {
                        let v = vis.values[(baseline, f, t, p)];
                        // DN'd magnitude with the original phase
                        Complex64::from_polar(mags[p][(f, t)], v.arg())
                    };
                    let s = stokes(rescaled(0), rescaled(1), rescaled(2), rescaled(3));
                    dop[(f, t)] = degree_of_polarisation(&s, DOP_EPSILON);
                }
            }
            Ok(vec![dop])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn magnitude_cases() {
        use crate::data::Polarisation;
        use ndarray::Array4;
        let mut values = Array4::from_elem((1, 1, 3, 1), c(0.0, 0.0));
        values[(0, 0, 0, 0)] = c(3.0, 4.0);
        values[(0, 0, 2, 0)] = c(-2.0, 0.0);
        let vis =
            VisibilityTensor::new(values, vec![0.0], vec![Polarisation::XX]).unwrap();
        let m = magnitude(&vis);
        assert_eq!(m[(0, 0, 0, 0)], 5.0);
        assert_eq!(m[(0, 0, 1, 0)], 0.0);
        assert_eq!(m[(0, 0, 2, 0)], 2.0);
    }

    #[test]
    fn dn_window_one_pointwise() {
        let x = array![[1.0]];
        let cfg = DnConfig {
            enabled: true,
            window: 1,
            sigma: 1.0,
            exponent: 1.0,
        };
        let y = divisive_normalise(x.view(), &cfg).unwrap();
        assert_abs_diff_eq!(y[(0, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn dn_zeros_stay_zero() {
        let x = Array2::zeros((6, 6));
        let y = divisive_normalise(x.view(), &DnConfig::default()).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dn_constant_field_closed_form() {
        for &cval in &[0.5, 2.0, 7.25] {
            let x = Array2::from_elem((8, 5), cval);
            let cfg = DnConfig {
                enabled: true,
                window: 3,
                sigma: 1.0,
                exponent: 1.0,
            };
            let y = divisive_normalise(x.view(), &cfg).unwrap();
            for &v in y.iter() {
                assert_abs_diff_eq!(v, cval / (1.0 + cval), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn dn_rejects_negative_input() {
        let x = array![[1.0, -0.5]];
        assert!(matches!(
            divisive_normalise(x.view(), &DnConfig::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn dn_commutes_with_time_permutation() {
        let x = array![
            [1.0, 4.0, 2.0],
            [0.5, 3.0, 1.5],
            [2.0, 0.25, 1.0],
            [1.25, 2.5, 0.75]
        ];
        let cfg = DnConfig::default();
        let y = divisive_normalise(x.view(), &cfg).unwrap();
        // permute time columns (2, 0, 1), normalise, and compare
        let perm = [2usize, 0, 1];
        let xp = Array2::from_shape_fn(x.dim(), |(f, t)| x[(f, perm[t])]);
        let yp = divisive_normalise(xp.view(), &cfg).unwrap();
        for f in 0..x.nrows() {
            for t in 0..x.ncols() {
                assert_abs_diff_eq!(yp[(f, t)], y[(f, perm[t])], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn stokes_fixed_points() {
        let s = stokes(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        assert_eq!((s.i, s.q, s.u, s.v_s), (2.0, 0.0, 0.0, 0.0));
        assert_eq!(degree_of_polarisation(&s, DOP_EPSILON), 0.0);

        let s = stokes(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        assert_eq!((s.i, s.q, s.u, s.v_s), (1.0, 1.0, 0.0, 0.0));
        assert_eq!(degree_of_polarisation(&s, DOP_EPSILON), 1.0);

        let s = stokes(c(1.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(1.0, 0.0));
        assert_eq!((s.i, s.q, s.u, s.v_s), (2.0, 0.0, 1.0, 0.0));
        assert_abs_diff_eq!(degree_of_polarisation(&s, DOP_EPSILON), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn stokes_superposition_in_cross_hands() {
        // U and V are linear in XY and YX
        let a = (c(0.0, 0.0), c(0.3, 0.1), c(0.2, -0.4), c(0.0, 0.0));
        let b = (c(0.0, 0.0), c(-0.1, 0.2), c(0.5, 0.3), c(0.0, 0.0));
        let sa = stokes(a.0, a.1, a.2, a.3);
        let sb = stokes(b.0, b.1, b.2, b.3);
        let sum = stokes(c(0.0, 0.0), a.1 + b.1, a.2 + b.2, c(0.0, 0.0));
        assert_abs_diff_eq!(sum.u, sa.u + sb.u, epsilon = 1e-12);
        assert_abs_diff_eq!(sum.v_s, sa.v_s + sb.v_s, epsilon = 1e-12);
    }

    #[test]
    fn stokes_i_q_scale_with_parallel_hand_magnitudes() {
        // I and Q are built from |XX| and |YY|, so scaling a parallel hand
        // scales its contribution
        let xx = c(0.6, -0.8);
        let yy = c(0.3, 0.4);
        let base = stokes(xx, c(0.0, 0.0), c(0.0, 0.0), yy);
        let scaled = stokes(xx * 3.0, c(0.0, 0.0), c(0.0, 0.0), yy);
        assert_abs_diff_eq!(scaled.i, 3.0 * xx.norm() + yy.norm(), epsilon = 1e-12);
        assert_abs_diff_eq!(scaled.q - base.q, 2.0 * xx.norm(), epsilon = 1e-12);
    }

    #[test]
    fn scaling_minmax() {
        let x = array![[0.0, 5.0, 10.0]];
        let y = scale_to_unit(x.view(), ScalingMode::Minmax);
        assert_eq!(y, array![[0.0, 0.5, 1.0]]);
    }

    #[test]
    fn scaling_constant_goes_to_zero() {
        let x = array![[3.0, 3.0, 3.0]];
        let y = scale_to_unit(x.view(), ScalingMode::Minmax);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scaling_log_minmax() {
        let x = array![[1.0, 10.0, 100.0]];
        let y = scale_to_unit(x.view(), ScalingMode::LogMinmax);
        assert_abs_diff_eq!(y[(0, 0)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y[(0, 1)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(y[(0, 2)], 1.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn dop_stays_in_unit_interval(
            re in proptest::collection::vec(-10.0f64..10.0, 8),
        ) {
            let s = stokes(
                c(re[0], re[1]),
                c(re[2], re[3]),
                c(re[4], re[5]),
                c(re[6], re[7]),
            );
            let d = degree_of_polarisation(&s, DOP_EPSILON);
            prop_assert!((0.0..=1.0).contains(&d));
        }

        #[test]
        fn dn_monotone_in_centre_value(
            base in 0.1f64..4.0,
            bump in 0.01f64..2.0,
        ) {
            // raising one pixel (window fixed around it) raises its output
            let mut lo = Array2::from_elem((5, 1), base);
            let mut hi = lo.clone();
            lo[(2, 0)] = base;
            hi[(2, 0)] = base + bump;
            let cfg = DnConfig { enabled: true, window: 1, sigma: 1.0, exponent: 1.0 };
            let ylo = divisive_normalise(lo.view(), &cfg).unwrap();
            let yhi = divisive_normalise(hi.view(), &cfg).unwrap();
            prop_assert!(yhi[(2, 0)] > ylo[(2, 0)]);
        }
    }
}
