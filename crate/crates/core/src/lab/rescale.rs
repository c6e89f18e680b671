//! The scaling `u'(x, t) = lambda u(x0 + lambda x, t0 + lambda^2 t)`.
//!
//! On a periodic box the dilation is realized by shrinking the box from `L` to
//! `L / lambda` and keeping the integer mode indices, so wavevectors scale by `lambda`
//! and nothing is resampled. The translation `x0` becomes the phase `e^{i xi . x0}`.

use num_complex::Complex64;

use crate::besov::{besov_norm, BesovIndex, DyadicPartition};
use crate::error::{Error, Result};
use crate::spectral::SpectralField;
use crate::trajectory::Trajectory;

/// The integer `m` with `lambda = 2^m`; other factors are refused.
pub fn dyadic_exponent(lambda: f64) -> Result<i32> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("scale factor must be positive, got {lambda}")));
    }
    let m = lambda.log2().round();
    if m.abs() > 60.0 || 2f64.powi(m as i32) != lambda {
        return Err(Error::InvalidArgument(format!(
            "scale factor {lambda} is not a power of two; other factors would need resampling"
        )));
    }
    Ok(m as i32)
}

/// `lambda f(x0 + lambda x)` on the box of side `L / lambda`. `x0` has one entry per axis.
///
/// Modes at the Nyquist wavenumber keep only the real part of their phase so the
/// result stays real; this is exact whenever `x0` is a multiple of the grid spacing.
pub fn rescale_field(field: &SpectralField, lambda: f64, x0: &[f64]) -> Result<SpectralField> {
    dyadic_exponent(lambda)?;
    let grid = field.grid();
    if x0.len() != grid.dim() || x0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "translation needs {} finite components, got {x0:?}",
            grid.dim()
        )));
    }
    let new_grid = grid.with_box_length(grid.box_length() / lambda)?;
    let shifted = x0.iter().any(|&x| x != 0.0);
    let phases: Vec<Complex64> = (0..grid.len())
        .map(|idx| {
            if !shifted {
                return Complex64::new(lambda, 0.0);
            }
            let xi = grid.xi(idx);
            let arg: f64 = xi.iter().zip(x0).map(|(a, b)| a * b).sum();
            if grid.is_nyquist(idx) && grid.conjugate_index(idx) == idx {
                Complex64::new(lambda * arg.cos(), 0.0)
            } else {
                Complex64::from_polar(lambda, arg)
            }
        })
        .collect();
    let coeffs = field
        .components()
        .iter()
        .map(|comp| comp.iter().zip(&phases).map(|(c, w)| c * w).collect())
        .collect();
    SpectralField::from_coeffs(&new_grid, field.rank(), coeffs)
}

/// Rescale every sample with `t >= t0`, mapping its time to `(t - t0) / lambda^2`.
pub fn rescale_trajectory(traj: &Trajectory, lambda: f64, x0: &[f64], t0: f64) -> Result<Trajectory> {
    dyadic_exponent(lambda)?;
    if !(t0.is_finite() && t0 >= 0.0) {
        return Err(Error::InvalidArgument(format!("time shift must be non-negative, got {t0}")));
    }
    let l2 = lambda * lambda;
    let mut times = Vec::new();
    let mut fields = Vec::new();
    for (&t, f) in traj.times().iter().zip(traj.fields()) {
        if t < t0 {
            continue;
        }
        times.push((t - t0) / l2);
        fields.push(rescale_field(f, lambda, x0)?);
    }
    if times.is_empty() {
        return Err(Error::CoverageGap {
            requested: t0,
            last: traj.horizon(),
        });
    }
    Trajectory::new(times, fields)
}

/// `||u(t)||_{B^{s_p}_{p,q}}` at every sample, on the grid's own partition.
pub fn critical_norm_series(traj: &Trajectory, p: f64, q: f64) -> Result<Vec<f64>> {
    let index = BesovIndex::critical(traj.grid().dim(), p, q)?;
    let partition = DyadicPartition::for_grid(traj.grid())?;
    traj.fields()
        .iter()
        .map(|f| besov_norm(f, &index, &partition).map(|r| r.value))
        .collect()
}
