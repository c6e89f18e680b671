//! Fourier multipliers and the differential/projection operators built on them.
//! Every operator acts exactly in frequency.

use num_complex::Complex64;

use super::field::{lp_norm_physical, Rank, SpectralField};
use super::grid::Grid;
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Multiply every component by the scalar symbol `m(xi)`.
///
/// The symbol is evaluated at every grid wavevector, including `xi = 0`; a
/// non-finite value anywhere is an error.
pub fn apply_multiplier<M>(field: &SpectralField, symbol: M) -> Result<SpectralField>
where
    M: Fn([f64; 3]) -> f64,
{
    let grid = field.grid();
    let table: Vec<f64> = grid.xi_table().iter().map(|&xi| symbol(xi)).collect();
    if let Some(i) = table.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSymbol(grid.xi(i)));
    }
    Ok(apply_table(field, &table))
}

/// Radial symbol `m(|xi|)`.
pub fn apply_radial<M>(field: &SpectralField, symbol: M) -> Result<SpectralField>
where
    M: Fn(f64) -> f64,
{
    apply_multiplier(field, |xi| symbol((xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt()))
}

/// Multiply by a pre-tabulated real symbol (one value per mode).
pub fn apply_table(field: &SpectralField, table: &[f64]) -> SpectralField {
    field.map_modes(|i, c| c * table[i])
}

/// Leray projector with symbol `delta_ij - xi_i xi_j / |xi|^2`; the mean mode is untouched.
pub fn leray_project(field: &SpectralField) -> Result<SpectralField> {
    field.require_rank(Rank::Vector)?;
    let grid = field.grid();
    let dim = grid.dim();
    let mut out = field.clone();
    for idx in 1..grid.len() {
        let xi = grid.xi(idx);
        let xi2 = grid.xi2_table()[idx];
        let mut dot = Complex64::default();
        for a in 0..dim {
            dot += field.component(a)[idx] * xi[a];
        }
        let dot = dot / xi2;
        for a in 0..dim {
            out.component_mut(a)[idx] -= dot * xi[a];
        }
    }
    Ok(out)
}

/// Spectral divergence `i xi . u` of a vector field; for a matrix field the
/// divergence contracts the second index: `(div F)_i = sum_j d_j F_ij`.
pub fn divergence(field: &SpectralField) -> Result<SpectralField> {
    let grid = field.grid();
    let dim = grid.dim();
    match field.rank() {
        Rank::Vector => {
            let mut out = vec![Complex64::default(); grid.len()];
            for (idx, o) in out.iter_mut().enumerate() {
                let xi = grid.xi(idx);
                for a in 0..dim {
                    *o += I * xi[a] * field.component(a)[idx];
                }
            }
            let mut f = SpectralField::from_coeffs(grid, Rank::Scalar, vec![out])?;
            f.zero_nyquist();
            Ok(f)
        }
        Rank::Matrix => {
            let mut out = vec![vec![Complex64::default(); grid.len()]; dim];
            for (i, comp) in out.iter_mut().enumerate() {
                for (idx, o) in comp.iter_mut().enumerate() {
                    let xi = grid.xi(idx);
                    for j in 0..dim {
                        *o += I * xi[j] * field.component(i * dim + j)[idx];
                    }
                }
            }
            let mut f = SpectralField::from_coeffs(grid, Rank::Vector, out)?;
            f.zero_nyquist();
            Ok(f)
        }
        Rank::Scalar => Err(Error::RankMismatch {
            expected: "Vector or Matrix".into(),
            found: "Scalar".into(),
        }),
    }
}

/// Gradient of a scalar (vector result) or of a vector (`(grad u)_ij = d_j u_i`).
pub fn gradient(field: &SpectralField) -> Result<SpectralField> {
    let grid = field.grid();
    let dim = grid.dim();
    let rank = match field.rank() {
        Rank::Scalar => Rank::Vector,
        Rank::Vector => Rank::Matrix,
        Rank::Matrix => {
            return Err(Error::RankMismatch {
                expected: "Scalar or Vector".into(),
                found: "Matrix".into(),
            })
        }
    };
    let mut out = Vec::with_capacity(field.num_components() * dim);
    for c in 0..field.num_components() {
        let src = field.component(c);
        for j in 0..dim {
            out.push(
                src.iter()
                    .enumerate()
                    .map(|(idx, &v)| I * grid.xi(idx)[j] * v)
                    .collect(),
            );
        }
    }
    let mut f = SpectralField::from_coeffs(grid, rank, out)?;
    f.zero_nyquist();
    Ok(f)
}

/// Curl of a vector field. In 2D the result is the scalar `d_x u_y - d_y u_x`.
pub fn curl(field: &SpectralField) -> Result<SpectralField> {
    field.require_rank(Rank::Vector)?;
    let grid = field.grid();
    let d = |c: usize, axis: usize| -> Vec<Complex64> {
        field
            .component(c)
            .iter()
            .enumerate()
            .map(|(idx, &v)| I * grid.xi(idx)[axis] * v)
            .collect()
    };
    let sub = |a: Vec<Complex64>, b: Vec<Complex64>| -> Vec<Complex64> {
        a.into_iter().zip(b).map(|(x, y)| x - y).collect()
    };
    let mut f = if grid.dim() == 2 {
        SpectralField::from_coeffs(grid, Rank::Scalar, vec![sub(d(1, 0), d(0, 1))])?
    } else {
        SpectralField::from_coeffs(
            grid,
            Rank::Vector,
            vec![sub(d(2, 1), d(1, 2)), sub(d(0, 2), d(2, 0)), sub(d(1, 0), d(0, 1))],
        )?
    };
    f.zero_nyquist();
    Ok(f)
}

/// Laplacian (symbol `-|xi|^2`).
pub fn laplacian(field: &SpectralField) -> SpectralField {
    let xi2 = field.grid().xi2_table().to_vec();
    field.map_modes(|i, c| -c * xi2[i])
}

/// Zero every mode with some `|k_axis| > n/3` (two-thirds rule; removes Nyquist too).
pub fn dealias(field: &SpectralField) -> SpectralField {
    let grid = field.grid().clone();
    field.map_modes(|i, c| if grid.dealias_keep(i) { c } else { Complex64::default() })
}

/// Pointwise tensor product formed in physical space and then dealiased.
///
/// scalar x anything multiplies componentwise; vector x vector gives the matrix
/// `u_i v_j`.
pub fn dealias_product(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    let pu = u.to_physical();
    let pv = v.to_physical();
    dealias_product_physical(u.grid(), u.rank(), &pu, v.rank(), &pv)
}

/// Same as [`dealias_product`] for operands already in physical space.
pub fn dealias_product_physical(
    grid: &Grid,
    ru: Rank,
    pu: &[Vec<f64>],
    rv: Rank,
    pv: &[Vec<f64>],
) -> Result<SpectralField> {
    let mul = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x * y).collect() };
    let (rank, values): (Rank, Vec<Vec<f64>>) = match (ru, rv) {
        (Rank::Scalar, r) => (r, pv.iter().map(|b| mul(&pu[0], b)).collect()),
        (r, Rank::Scalar) => (r, pu.iter().map(|a| mul(a, &pv[0])).collect()),
        (Rank::Vector, Rank::Vector) => {
            let mut vals = Vec::with_capacity(pu.len() * pv.len());
            for a in pu {
                for b in pv {
                    vals.push(mul(a, b));
                }
            }
            (Rank::Matrix, vals)
        }
        (a, b) => {
            return Err(Error::RankMismatch {
                expected: "scalar or vector operands".into(),
                found: format!("{a:?} x {b:?}"),
            })
        }
    };
    let f = SpectralField::from_physical(grid, rank, &values)?;
    Ok(dealias(&f))
}

/// `(-Delta)^{-1} div div (u (x) v)`, with the mean mode set to zero. For `u = v`
/// this is the Navier-Stokes pressure.
pub fn pressure_from_velocity(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    u.require_rank(Rank::Vector)?;
    v.require_rank(Rank::Vector)?;
    let grid = u.grid();
    let dim = grid.dim();
    let t = dealias_product(u, v)?;
    let mut out = vec![Complex64::default(); grid.len()];
    for (idx, o) in out.iter_mut().enumerate().skip(1) {
        let xi = grid.xi(idx);
        let xi2 = grid.xi2_table()[idx];
        let mut acc = Complex64::default();
        for i in 0..dim {
            for j in 0..dim {
                acc += t.component(i * dim + j)[idx] * (xi[i] * xi[j]);
            }
        }
        *o = -acc / xi2;
    }
    SpectralField::from_coeffs(grid, Rank::Scalar, vec![out])
}

/// `(u . grad) u` computed as `div(u (x) u)` with the second-index contraction;
/// equal for divergence-free `u`.
pub fn advection(u: &SpectralField) -> Result<SpectralField> {
    let t = dealias_product(u, u)?;
    // div(u (x) u)_i = d_j (u_i u_j) = (u . grad) u_i when div u = 0.
    divergence(&t)
}

/// Relative divergence residual `max_k |xi . c(k)| / max |c|` of a vector field.
pub fn divergence_residual(field: &SpectralField) -> Result<f64> {
    field.require_rank(Rank::Vector)?;
    let scale = field.max_abs_coeff();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let grid = field.grid();
    let mut worst: f64 = 0.0;
    for idx in 0..grid.len() {
        let xi = grid.xi(idx);
        let mut dot = Complex64::default();
        for a in 0..grid.dim() {
            dot += field.component(a)[idx] * xi[a];
        }
        let norm = grid.xi2_table()[idx].sqrt();
        if norm > 0.0 {
            worst = worst.max(dot.norm() / norm);
        }
    }
    Ok(worst / scale)
}

/// `||f||_{L^p}` of the pointwise magnitude of a list of fields stacked as components.
pub fn stacked_lp_norm(fields: &[&SpectralField], p: f64) -> f64 {
    let Some(first) = fields.first() else { return 0.0 };
    let mut values = Vec::new();
    for f in fields {
        values.extend(f.to_physical());
    }
    lp_norm_physical(first.grid(), &values, p)
}
