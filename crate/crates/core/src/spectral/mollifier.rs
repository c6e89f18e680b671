use std::collections::HashMap;
use std::f64::consts::PI;

use super::field::SpectralField;
use super::grid::Grid;
use super::ops::apply_table;
use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// Unnormalized radial bump `exp(-1/(1-r^2))` on `r < 1`, zero outside.
pub fn bump(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}

fn sphere_area(dim: usize) -> f64 {
    if dim == 2 {
        2.0 * PI
    } else {
        4.0 * PI
    }
}

const MASS_PANELS: usize = 64;

/// `int_{R^dim} bump(|x|) dx`.
pub fn bump_mass(dim: usize) -> f64 {
    let d = dim as i32 - 1;
    sphere_area(dim) * integrate(|r| bump(r) * r.powi(d), 0.0, 1.0, MASS_PANELS)
}

/// Friedrichs mollifier `theta_rho(x) = rho^{-dim} theta(x/rho)` with the
/// unit-mass profile `theta = c * bump`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mollifier {
    rho: f64,
}

impl Mollifier {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidArgument(format!("mollifier radius must be positive, got {rho}")));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Normalized profile `theta(r)` in dimension `dim` (unit radius).
    pub fn profile(dim: usize, r: f64) -> f64 {
        bump(r) / bump_mass(dim)
    }

    /// Fourier transform `theta_hat(kappa) = int theta(x) e^{-i xi.x} dx` at `|xi| = kappa`
    /// for the unit-radius profile. `theta_hat(0) = 1`.
    pub fn profile_transform(dim: usize, kappa: f64) -> f64 {
        let mass = bump_mass(dim);
        let panels = MASS_PANELS + (kappa / 2.0).ceil() as usize;
        let raw = if dim == 2 {
            2.0 * PI * integrate(|r| bump(r) * r * libm::j0(kappa * r), 0.0, 1.0, panels)
        } else {
            4.0 * PI * integrate(|r| bump(r) * r * r * sinc(kappa * r), 0.0, 1.0, panels)
        };
        raw / mass
    }

    /// Symbol `theta_hat(rho * xi)` tabulated on the grid.
    pub fn symbol_table(&self, grid: &Grid) -> Result<Vec<f64>> {
        if self.rho >= grid.box_length() {
            return Err(Error::InvalidArgument(format!(
                "mollifier radius {} must be smaller than the box length {}",
                self.rho,
                grid.box_length()
            )));
        }
        let mut cache: HashMap<i64, f64> = HashMap::new();
        let scale = grid.fundamental() * self.rho;
        let dim = grid.dim();
        Ok(grid
            .k_table()
            .iter()
            .map(|k| {
                let k2 = k.iter().map(|&a| (a as i64) * (a as i64)).sum::<i64>();
                *cache
                    .entry(k2)
                    .or_insert_with(|| Self::profile_transform(dim, scale * (k2 as f64).sqrt()))
            })
            .collect())
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `(f)_rho = f * theta_rho`, applied as the multiplier `theta_hat(rho xi)`.
pub fn mollify(field: &SpectralField, mollifier: &Mollifier) -> Result<SpectralField> {
    let table = mollifier.symbol_table(field.grid())?;
    Ok(apply_table(field, &table))
}
