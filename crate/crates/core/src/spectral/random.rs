//! Seeded random fields and the named analytic families used by experiments.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::field::{Rank, SpectralField};
use super::grid::Grid;
use super::ops::leray_project;
use crate::error::Result;

/// Random real field with `|c_k| ~ |k|^{-slope}` (integer-k units), restricted to
/// `|k| <= k_cut` and to the dealiased band, zero mean, Nyquist-free.
///
/// Coefficients are drawn over the integer cube `|k_axis| <= min(k_cut, n/3)` in a
/// fixed lexicographic order, so a band-limited draw is the same field on every
/// grid fine enough to hold it.
pub fn random_band_limited(
    grid: &Grid,
    rank: Rank,
    seed: u64,
    slope: f64,
    k_cut: f64,
    divergence_free: bool,
) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = rank.components(grid.dim());
    let dim = grid.dim();
    let reach = k_cut.min(grid.n() as f64 / 3.0).floor() as i32;
    let side = (2 * reach + 1) as usize;
    let mut coeffs = vec![vec![Complex64::default(); grid.len()]; comps];
    for comp in coeffs.iter_mut() {
        for pos in 0..side.pow(dim as u32) {
            let mut k = [0i32; 3];
            let mut rem = pos;
            for axis in (0..dim).rev() {
                k[axis] = (rem % side) as i32 - reach;
                rem /= side;
            }
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let kk = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
            let Some(idx) = grid.index_of(k) else { continue };
            if idx == 0 || kk > k_cut || !grid.dealias_keep(idx) || grid.is_nyquist(idx) {
                continue;
            }
            comp[idx] = Complex64::new(re, im) * kk.powf(-slope);
        }
    }
    // Hermitian symmetrization.
    for comp in coeffs.iter_mut() {
        let orig = comp.clone();
        for (idx, c) in comp.iter_mut().enumerate() {
            let j = grid.conjugate_index(idx);
            *c = (orig[idx] + orig[j].conj()) * 0.5;
        }
    }
    let field = SpectralField::from_coeffs(grid, rank, coeffs).expect("shape built above");
    if divergence_free && rank == Rank::Vector {
        leray_project(&field).expect("vector rank")
    } else {
        field
    }
}

/// Random field over the whole dealiased band.
pub fn random_field(grid: &Grid, rank: Rank, seed: u64, slope: f64, divergence_free: bool) -> SpectralField {
    random_band_limited(grid, rank, seed, slope, f64::INFINITY, divergence_free)
}

/// Divergence-free random velocity normalized to unit `L^2` norm and then scaled.
pub fn random_velocity(grid: &Grid, seed: u64, slope: f64, k_cut: f64, l2_norm: f64) -> SpectralField {
    let f = random_band_limited(grid, Rank::Vector, seed, slope, k_cut, true);
    let n = f.l2_norm();
    if n == 0.0 {
        f
    } else {
        f.scaled(l2_norm / n)
    }
}

/// 2D Taylor-Green vortex `(sin x cos y, -cos x sin y)` scaled to wavenumber `2*pi/L`.
/// On a 3D grid the field is extended trivially in the third direction.
pub fn taylor_green(grid: &Grid, amplitude: f64) -> SpectralField {
    let a = grid.fundamental();
    let dim = grid.dim();
    SpectralField::from_fn(grid, Rank::Vector, move |x| {
        let (sx, cx) = (a * x[0]).sin_cos();
        let (sy, cy) = (a * x[1]).sin_cos();
        let mut v = vec![amplitude * sx * cy, -amplitude * cx * sy];
        if dim == 3 {
            v.push(0.0);
        }
        v
    })
}

/// ABC-type divergence-free mode sum on a 3D grid:
/// `(A sin z + C cos y, B sin x + A cos z, C sin y + B cos x)` at wavenumber `m*2*pi/L`.
pub fn abc_flow(grid: &Grid, coeffs: [f64; 3], m: i32) -> Result<SpectralField> {
    if grid.dim() != 3 {
        return Err(crate::Error::InvalidArgument("ABC flow requires a 3D grid".into()));
    }
    let w = grid.fundamental() * m as f64;
    let [a, b, c] = coeffs;
    Ok(SpectralField::from_fn(grid, Rank::Vector, move |x| {
        vec![
            a * (w * x[2]).sin() + c * (w * x[1]).cos(),
            b * (w * x[0]).sin() + a * (w * x[2]).cos(),
            c * (w * x[1]).sin() + b * (w * x[0]).cos(),
        ]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::ops::divergence;

    #[test]
    fn random_fields_are_real_zero_mean_and_deterministic() {
        let g = Grid::new(3, 16, 1.0).unwrap();
        let a = random_field(&g, Rank::Vector, 3, 1.0, true);
        let b = random_field(&g, Rank::Vector, 3, 1.0, true);
        assert_eq!(a.relative_difference(&b), 0.0);
        assert!(a.hermitian_defect() < 1e-12);
        assert!(a.mean().iter().all(|m| *m == 0.0));
        let div = divergence(&a).unwrap();
        assert!(div.max_abs_coeff() <= 1e-12 * a.max_abs_coeff());
    }

    #[test]
    fn band_limited_draw_is_grid_independent() {
        let coarse = Grid::new(3, 16, 1.0).unwrap();
        let fine = Grid::new(3, 32, 1.0).unwrap();
        let a = random_band_limited(&coarse, Rank::Vector, 9, 1.0, 4.0, true);
        let b = random_band_limited(&fine, Rank::Vector, 9, 1.0, 4.0, true);
        for idx in 0..coarse.len() {
            let j = fine.index_of(coarse.k(idx)).unwrap();
            for c in 0..3 {
                assert_eq!(a.component(c)[idx], b.component(c)[j]);
            }
        }
        assert!((a.l2_norm() - b.l2_norm()).abs() < 1e-14 * a.l2_norm());
    }

    #[test]
    fn abc_is_divergence_free() {
        let g = Grid::new(3, 16, 2.0 * std::f64::consts::PI).unwrap();
        let u = abc_flow(&g, [1.0, 0.7, 0.3], 2).unwrap();
        let div = divergence(&u).unwrap();
        assert!(div.max_abs_coeff() < 1e-12);
    }
}
