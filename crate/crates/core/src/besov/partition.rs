use super::super::spectral::{ops::apply_table, Grid, SpectralField};
use crate::error::{Error, Result};

/// Inner and outer radius of the smooth step: `chi = 1` on `r <= 3/4`, `chi = 0` on `r >= 4/3`.
pub const CHI_INNER: f64 = 0.75;
pub const CHI_OUTER: f64 = 4.0 / 3.0;

/// Support of `phi`: `3/4 <= |xi| <= 8/3`.
pub const PHI_INNER: f64 = CHI_INNER;
pub const PHI_OUTER: f64 = 2.0 * CHI_OUTER;

fn g(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth radial step built from `exp(-1/t)` blending.
pub fn chi(r: f64) -> f64 {
    if r <= CHI_INNER {
        return 1.0;
    }
    if r >= CHI_OUTER {
        return 0.0;
    }
    let t = (CHI_OUTER - r) / (CHI_OUTER - CHI_INNER);
    let a = g(t);
    a / (a + g(1.0 - t))
}

/// Dyadic annulus profile `phi(r) = chi(r/2) - chi(r)`.
pub fn phi(r: f64) -> f64 {
    chi(0.5 * r) - chi(r)
}

/// Tabulated Littlewood-Paley symbols `phi(2^{-j} xi)` for `j_min <= j <= j_max`.
#[derive(Clone, Debug)]
pub struct DyadicPartition {
    grid: Grid,
    j_min: i32,
    j_max: i32,
    radii: Vec<f64>,
    tables: Vec<Vec<f64>>,
}

impl DyadicPartition {
    /// Builds the partition, requiring that the blocks sum to one on every nonzero
    /// grid wavevector: `2^{j_min} * 4/3 <= min |xi|` and `2^{j_max} * 3/2 >= max |xi|`.
    pub fn new(grid: &Grid, j_min: i32, j_max: i32) -> Result<Self> {
        if j_min > j_max {
            return Err(Error::InvalidArgument(format!("empty block range {j_min}..={j_max}")));
        }
        let lo = 2f64.powi(j_min) * CHI_OUTER;
        let hi = 2f64.powi(j_max) * 2.0 * CHI_INNER;
        let tol = 1e-12;
        if lo > grid.min_nonzero_xi() * (1.0 + tol) || hi < grid.max_xi() * (1.0 - tol) {
            return Err(Error::InvalidArgument(format!(
                "blocks {j_min}..={j_max} cover |xi| in [{lo}, {hi}], grid spectrum is [{}, {}]",
                grid.min_nonzero_xi(),
                grid.max_xi()
            )));
        }
        let radii: Vec<f64> = grid.xi2_table().iter().map(|x| x.sqrt()).collect();
        let tables = (j_min..=j_max)
            .map(|j| {
                let s = 2f64.powi(-j);
                radii.iter().map(|&r| phi(s * r)).collect()
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            j_min,
            j_max,
            radii,
            tables,
        })
    }

    /// Smallest block range covering the grid spectrum.
    pub fn for_grid(grid: &Grid) -> Result<Self> {
        let j_min = (grid.min_nonzero_xi() / CHI_OUTER).log2().floor() as i32;
        let j_max = (grid.max_xi() / (2.0 * CHI_INNER)).log2().ceil() as i32;
        Self::new(grid, j_min, j_max)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn blocks(&self) -> std::ops::RangeInclusive<i32> {
        self.j_min..=self.j_max
    }

    fn check_j(&self, j: i32) -> Result<()> {
        if j < self.j_min || j > self.j_max {
            return Err(Error::BlockOutOfRange {
                j,
                j_min: self.j_min,
                j_max: self.j_max,
            });
        }
        Ok(())
    }

    /// `phi(2^{-j} xi)` on every grid mode.
    pub fn phi_table(&self, j: i32) -> Result<&[f64]> {
        self.check_j(j)?;
        Ok(&self.tables[(j - self.j_min) as usize])
    }

    /// `chi(2^{-j} xi)` on every grid mode.
    pub fn chi_table(&self, j: i32) -> Vec<f64> {
        let s = 2f64.powi(-j);
        self.radii.iter().map(|&r| chi(s * r)).collect()
    }

    /// Whether block `j` extends past the largest fully resolved radius.
    pub fn is_truncated(&self, j: i32) -> bool {
        2f64.powi(j) * PHI_OUTER > self.grid.inscribed_xi()
    }

    /// Largest `|sum_j phi(2^{-j} xi) - 1|` over nonzero grid wavevectors.
    pub fn identity_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for idx in 1..self.grid.len() {
            let s: f64 = self.tables.iter().map(|t| t[idx]).sum();
            worst = worst.max((s - 1.0).abs());
        }
        worst
    }

    /// Largest `|phi(2^{-j} xi)|` among grid modes outside the annulus `[3/4, 8/3] 2^j`.
    pub fn support_leak(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (b, table) in self.tables.iter().enumerate() {
            let scale = 2f64.powi(self.j_min + b as i32);
            for (&r, &v) in self.radii.iter().zip(table) {
                if r < PHI_INNER * scale || r > PHI_OUTER * scale {
                    worst = worst.max(v.abs());
                }
            }
        }
        worst
    }

    /// Littlewood-Paley block `Delta_j f`.
    pub fn block(&self, field: &SpectralField, j: i32) -> Result<SpectralField> {
        if field.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(apply_table(field, self.phi_table(j)?))
    }

    /// Low-frequency cut-off `S_j f = chi(2^{-j} D) f`, allowed for
    /// `j_min - 1 <= j <= j_max + 1`.
    pub fn low_freq(&self, field: &SpectralField, j: i32) -> Result<SpectralField> {
        if field.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        if j < self.j_min - 1 || j > self.j_max + 1 {
            return Err(Error::BlockOutOfRange {
                j,
                j_min: self.j_min - 1,
                j_max: self.j_max + 1,
            });
        }
        Ok(apply_table(field, &self.chi_table(j)))
    }
}

/// Free-function form of [`DyadicPartition::block`].
pub fn lp_block(field: &SpectralField, j: i32, partition: &DyadicPartition) -> Result<SpectralField> {
    partition.block(field, j)
}

/// Free-function form of [`DyadicPartition::low_freq`].
pub fn low_freq(field: &SpectralField, j: i32, partition: &DyadicPartition) -> Result<SpectralField> {
    partition.low_freq(field, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::random::random_field;
    use crate::spectral::Rank;
    use std::f64::consts::PI;

    #[test]
    fn profile_values() {
        assert_eq!(chi(0.5), 1.0);
        assert_eq!(phi(0.5), 0.0);
        assert_eq!(phi(3.0), 0.0);
        assert!((phi(1.0) - (1.0 - chi(1.0))).abs() < 1e-16);
        // at r = 1 the blend parameter is t = (1/3)/(7/12) = 4/7
        let t: f64 = 4.0 / 7.0;
        let expected = (-1.0 / t).exp() / ((-1.0 / t).exp() + (-1.0 / (1.0 - t)).exp());
        assert!((chi(1.0) - expected).abs() < 1e-15);
    }

    #[test]
    fn chi_is_monotone_and_telescopes() {
        let mut prev = 1.0;
        for i in 0..=2000 {
            let r = i as f64 * 0.002;
            let c = chi(r);
            assert!(c <= prev + 1e-15);
            prev = c;
            // chi(r) + sum_{j>=0} phi(2^{-j} r) = 1
            let s: f64 = chi(r) + (0..12).map(|j| phi(r * 2f64.powi(-j))).sum::<f64>();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_and_support_on_grids() {
        for (dim, n, l) in [(3, 16, 2.0 * PI), (2, 64, 1.0), (3, 8, 4.0 * PI)] {
            let g = Grid::new(dim, n, l).unwrap();
            let p = DyadicPartition::for_grid(&g).unwrap();
            assert!(p.identity_deviation() < 1e-10);
            assert!(p.support_leak() < 1e-14);
        }
    }

    #[test]
    fn rejects_undercovering_range() {
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        let p = DyadicPartition::for_grid(&g).unwrap();
        assert!(DyadicPartition::new(&g, p.j_min() + 1, p.j_max()).is_err());
        assert!(DyadicPartition::new(&g, p.j_min(), p.j_max() - 1).is_err());
        assert!(DyadicPartition::new(&g, 2, 1).is_err());
    }

    #[test]
    fn blocks_sum_to_field_and_low_pass_bounds() {
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        let p = DyadicPartition::for_grid(&g).unwrap();
        let f = random_field(&g, Rank::Vector, 8, 1.0, true);
        let mut sum = SpectralField::zeros(&g, Rank::Vector);
        for j in p.blocks() {
            sum.axpy(1.0, &p.block(&f, j).unwrap());
        }
        assert!(sum.relative_difference(&f) < 1e-12);
        assert!(p.low_freq(&f, p.j_max() + 1).unwrap().relative_difference(&f) < 1e-15);
        assert!(p.low_freq(&f, p.j_min() - 1).unwrap().is_zero());
        assert!(p.block(&f, p.j_max() + 1).is_err());
        assert!(p.low_freq(&f, p.j_max() + 2).is_err());
    }

    #[test]
    fn single_mode_block_scaling() {
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        let p = DyadicPartition::for_grid(&g).unwrap();
        let mut f = SpectralField::zeros(&g, Rank::Scalar);
        f.set_real_mode(0, [1, 0, 0], num_complex::Complex64::new(1.0, 0.0)).unwrap();
        let b = p.block(&f, 0).unwrap();
        assert!((b.coeff(0, [1, 0, 0]).unwrap().re - phi(1.0)).abs() < 1e-15);
    }
}
