use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft;
use super::grid::Grid;
use crate::error::{Error, Result};

/// Tensor rank of a field: scalar, vector (`dim` components) or matrix (`dim^2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rank {
    Scalar,
    Vector,
    Matrix,
}

impl Rank {
    pub fn components(self, dim: usize) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector => dim,
            Rank::Matrix => dim * dim,
        }
    }

    pub fn order(self) -> u8 {
        match self {
            Rank::Scalar => 0,
            Rank::Vector => 1,
            Rank::Matrix => 2,
        }
    }

    pub fn from_order(order: u8) -> Option<Self> {
        match order {
            0 => Some(Rank::Scalar),
            1 => Some(Rank::Vector),
            2 => Some(Rank::Matrix),
            _ => None,
        }
    }
}

/// A real-valued periodic field stored as Fourier coefficients, one coefficient
/// array per tensor component. Matrix components are row-major: `(i, j) -> i*dim + j`.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    rank: Rank,
    coeffs: Vec<Vec<Complex64>>,
}

impl SpectralField {
    pub fn zeros(grid: &Grid, rank: Rank) -> Self {
        let comps = rank.components(grid.dim());
        Self {
            grid: grid.clone(),
            rank,
            coeffs: vec![vec![Complex64::default(); grid.len()]; comps],
        }
    }

    pub fn from_coeffs(grid: &Grid, rank: Rank, coeffs: Vec<Vec<Complex64>>) -> Result<Self> {
        let comps = rank.components(grid.dim());
        if coeffs.len() != comps || coeffs.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::InvalidArgument(format!(
                "expected {comps} component arrays of length {}",
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            rank,
            coeffs,
        })
    }

    /// Transform physical samples (one array per component) to coefficients.
    pub fn from_physical(grid: &Grid, rank: Rank, values: &[Vec<f64>]) -> Result<Self> {
        let comps = rank.components(grid.dim());
        if values.len() != comps || values.iter().any(|v| v.len() != grid.len()) {
            return Err(Error::InvalidArgument(format!(
                "expected {comps} physical arrays of length {}",
                grid.len()
            )));
        }
        let coeffs = values.iter().map(|v| fft::forward_real(grid, v)).collect();
        Ok(Self {
            grid: grid.clone(),
            rank,
            coeffs,
        })
    }

    /// Sample a field given pointwise by a closure returning all components.
    pub fn from_fn<F>(grid: &Grid, rank: Rank, f: F) -> Self
    where
        F: Fn([f64; 3]) -> Vec<f64>,
    {
        let comps = rank.components(grid.dim());
        let mut values = vec![vec![0.0; grid.len()]; comps];
        for idx in 0..grid.len() {
            let v = f(grid.point(idx));
            for (c, slot) in values.iter_mut().enumerate() {
                slot[idx] = v[c];
            }
        }
        Self::from_physical(grid, rank, &values).expect("component count checked above")
    }

    pub fn to_physical(&self) -> Vec<Vec<f64>> {
        self.coeffs
            .iter()
            .map(|c| fft::inverse_real(&self.grid, c))
            .collect()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn num_components(&self) -> usize {
        self.coeffs.len()
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.coeffs[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.coeffs[c]
    }

    pub fn components(&self) -> &[Vec<Complex64>] {
        &self.coeffs
    }

    pub fn into_components(self) -> Vec<Vec<Complex64>> {
        self.coeffs
    }

    /// Coefficient of component `c` at integer wavevector `k`.
    pub fn coeff(&self, c: usize, k: [i32; 3]) -> Option<Complex64> {
        self.grid.index_of(k).map(|i| self.coeffs[c][i])
    }

    pub fn set_coeff(&mut self, c: usize, k: [i32; 3], value: Complex64) -> Result<()> {
        let i = self
            .grid
            .index_of(k)
            .ok_or_else(|| Error::InvalidArgument(format!("wavevector {k:?} not on grid")))?;
        self.coeffs[c][i] = value;
        Ok(())
    }

    /// Set the mode `k` and its conjugate partner `-k` so the field stays real.
    pub fn set_real_mode(&mut self, c: usize, k: [i32; 3], value: Complex64) -> Result<()> {
        self.set_coeff(c, k, value)?;
        self.set_coeff(c, [-k[0], -k[1], -k[2]], value.conj())
    }

    pub fn check_same_shape(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.rank != other.rank {
            return Err(Error::RankMismatch {
                expected: format!("{:?}", self.rank),
                found: format!("{:?}", other.rank),
            });
        }
        Ok(())
    }

    pub fn require_rank(&self, rank: Rank) -> Result<()> {
        if self.rank != rank {
            return Err(Error::RankMismatch {
                expected: format!("{rank:?}"),
                found: format!("{:?}", self.rank),
            });
        }
        Ok(())
    }

    /// `self + a * other`, in place. Panics on shape mismatch.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        assert!(self.grid == other.grid && self.rank == other.rank, "axpy shape mismatch");
        for (dst, src) in self.coeffs.iter_mut().zip(&other.coeffs) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s * a;
            }
        }
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.axpy(1.0, other);
        Ok(out)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.axpy(-1.0, other);
        Ok(out)
    }

    pub fn scaled(&self, a: f64) -> SpectralField {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn scale(&mut self, a: f64) {
        for comp in &mut self.coeffs {
            for c in comp.iter_mut() {
                *c *= a;
            }
        }
    }

    pub fn map_modes<F>(&self, f: F) -> SpectralField
    where
        F: Fn(usize, Complex64) -> Complex64,
    {
        let coeffs = self
            .coeffs
            .iter()
            .map(|comp| comp.iter().enumerate().map(|(i, &c)| f(i, c)).collect())
            .collect();
        SpectralField {
            grid: self.grid.clone(),
            rank: self.rank,
            coeffs,
        }
    }

    /// `sum_k sum_c |c_k|^2`; the mean square of the physical field.
    pub fn mean_square(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter())
            .map(|c| c.norm_sqr())
            .sum()
    }

    /// `||f||_{L^2}` over the box, by Parseval.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.volume() * self.mean_square()).sqrt()
    }

    /// `||grad f||_{L^2}^2` over the box, by Parseval.
    pub fn grad_l2_sq(&self) -> f64 {
        let xi2 = self.grid.xi2_table();
        let s: f64 = self
            .coeffs
            .iter()
            .map(|comp| comp.iter().zip(xi2).map(|(c, &w)| w * c.norm_sqr()).sum::<f64>())
            .sum();
        self.grid.volume() * s
    }

    /// `||f||_{L^p}` of the pointwise Euclidean magnitude, by uniform-grid quadrature.
    /// `p = f64::INFINITY` gives the grid maximum.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm_physical(&self.grid, &self.to_physical(), p)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Largest `|c(-k) - conj(c(k))|` relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.max_abs_coeff();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for comp in &self.coeffs {
            for idx in 0..self.grid.len() {
                let j = self.grid.conjugate_index(idx);
                worst = worst.max((comp[j] - comp[idx].conj()).norm());
            }
        }
        worst / scale
    }

    /// Zero every mode that any axis places at the Nyquist wavenumber.
    pub fn zero_nyquist(&mut self) {
        let grid = self.grid.clone();
        for comp in &mut self.coeffs {
            for (idx, c) in comp.iter_mut().enumerate() {
                if grid.is_nyquist(idx) {
                    *c = Complex64::default();
                }
            }
        }
    }

    pub fn zero_mean(&mut self) {
        for comp in &mut self.coeffs {
            comp[0] = Complex64::default();
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c[0].re).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs_coeff() == 0.0
    }

    /// Extract one component as a scalar field.
    pub fn scalar_component(&self, c: usize) -> SpectralField {
        SpectralField {
            grid: self.grid.clone(),
            rank: Rank::Scalar,
            coeffs: vec![self.coeffs[c].clone()],
        }
    }

    /// Assemble a vector field from `dim` scalar fields.
    pub fn from_scalars(parts: &[SpectralField]) -> Result<SpectralField> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("no components".into()))?;
        let grid = first.grid.clone();
        let rank = match parts.len() {
            n if n == grid.dim() => Rank::Vector,
            n if n == grid.dim() * grid.dim() => Rank::Matrix,
            1 => Rank::Scalar,
            n => return Err(Error::InvalidArgument(format!("cannot assemble {n} components"))),
        };
        let mut coeffs = Vec::with_capacity(parts.len());
        for p in parts {
            p.require_rank(Rank::Scalar)?;
            if p.grid != grid {
                return Err(Error::GridMismatch);
            }
            coeffs.push(p.coeffs[0].clone());
        }
        Ok(SpectralField { grid, rank, coeffs })
    }

    /// The same Fourier coefficients on another grid of the same dimension and box.
    /// Modes the target cannot represent are dropped, as are Nyquist modes of the source.
    pub fn embed(&self, target: &Grid) -> Result<SpectralField> {
        if target.dim() != self.grid.dim() || target.box_length() != self.grid.box_length() {
            return Err(Error::GridMismatch);
        }
        let mut out = SpectralField::zeros(target, self.rank);
        for idx in 0..self.grid.len() {
            if self.grid.is_nyquist(idx) {
                continue;
            }
            if let Some(t) = target.index_of(self.grid.k(idx)) {
                if target.is_nyquist(t) {
                    continue;
                }
                for c in 0..self.coeffs.len() {
                    out.coeffs[c][t] = self.coeffs[c][idx];
                }
            }
        }
        Ok(out)
    }

    /// Largest coefficient-wise difference relative to the larger operand.
    pub fn relative_difference(&self, other: &SpectralField) -> f64 {
        let scale = self.max_abs_coeff().max(other.max_abs_coeff());
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.coeffs.iter().zip(&other.coeffs) {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).norm());
            }
        }
        worst / scale
    }
}

/// L^p norm of the pointwise magnitude of physical component arrays.
pub fn lp_norm_physical(grid: &Grid, values: &[Vec<f64>], p: f64) -> f64 {
    let len = grid.len();
    let mag2 = |i: usize| values.iter().map(|v| v[i] * v[i]).sum::<f64>();
    if p.is_infinite() {
        return (0..len).map(&mag2).fold(0.0, f64::max).sqrt();
    }
    let sum: f64 = if p == 2.0 {
        (0..len).map(mag2).sum()
    } else {
        (0..len).map(|i| mag2(i).powf(p / 2.0)).sum()
    };
    (sum * grid.cell_volume()).powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::random::random_field;
    use std::f64::consts::PI;

    #[test]
    fn parseval_matches_quadrature() {
        for dim in [2, 3] {
            let g = Grid::new(dim, 16, 3.0).unwrap();
            for seed in 0..4 {
                let f = random_field(&g, Rank::Vector, seed, 1.0, false);
                let spectral = f.l2_norm();
                let quad = f.lp_norm(2.0);
                assert!((spectral - quad).abs() <= 1e-10 * spectral);
            }
        }
    }

    #[test]
    fn round_trip_reproduces_physical_values() {
        let g = Grid::new(3, 8, 2.0 * PI).unwrap();
        let f = random_field(&g, Rank::Vector, 7, 1.0, false);
        let back = SpectralField::from_physical(&g, Rank::Vector, &f.to_physical()).unwrap();
        assert!(f.relative_difference(&back) < 1e-12);
        assert!(back.hermitian_defect() < 1e-12);
    }

    #[test]
    fn embedding_preserves_the_function() {
        let coarse = Grid::new(2, 16, 3.0).unwrap();
        let fine = Grid::new(2, 32, 3.0).unwrap();
        let mut f = random_field(&coarse, Rank::Vector, 2, 1.0, false);
        f.zero_nyquist();
        let up = f.embed(&fine).unwrap();
        assert!((up.l2_norm() - f.l2_norm()).abs() < 1e-14 * f.l2_norm());
        assert!((up.lp_norm(4.0) - f.lp_norm(4.0)).abs() < 1e-2 * f.lp_norm(4.0));
        assert_eq!(up.embed(&coarse).unwrap().components(), f.components());
        assert!(f.embed(&Grid::new(2, 16, 2.0).unwrap()).is_err());
    }

    #[test]
    fn sup_norm_of_cosine() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let f = SpectralField::from_fn(&g, Rank::Scalar, |x| vec![2.0 * (x[0]).cos()]);
        assert!((f.lp_norm(f64::INFINITY) - 2.0).abs() < 1e-12);
    }
}
