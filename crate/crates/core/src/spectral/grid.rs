use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Isotropic periodic grid of `n` points per axis on a box of side `box_length`.
///
/// Wavevectors are `xi = 2*pi*k / L` with integer `k` in `{-n/2, ..., n/2-1}` per
/// axis. Storage is row-major with axis 0 slowest, using FFT-natural index order
/// (`k = i` for `i < n/2`, `k = i - n` otherwise).
#[derive(Clone)]
pub struct Grid {
    dim: usize,
    n: usize,
    box_length: f64,
    tables: Arc<Tables>,
}

struct Tables {
    k: Vec<[i32; 3]>,
    xi: Vec<[f64; 3]>,
    xi2: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.box_length == other.box_length
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("box_length", &self.box_length)
            .finish()
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize, box_length: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("points per axis must be even and >= 8, got {n}")));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length must be positive, got {box_length}")));
        }
        let len = n.pow(dim as u32);
        let scale = 2.0 * PI / box_length;
        let mut k = Vec::with_capacity(len);
        let mut xi = Vec::with_capacity(len);
        let mut xi2 = Vec::with_capacity(len);
        for idx in 0..len {
            let kv = unflatten(idx, dim, n);
            let x = [kv[0] as f64 * scale, kv[1] as f64 * scale, kv[2] as f64 * scale];
            k.push(kv);
            xi.push(x);
            xi2.push(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        }
        Ok(Self {
            dim,
            n,
            box_length,
            tables: Arc::new(Tables { k, xi, xi2 }),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Number of grid points (and Fourier modes).
    pub fn len(&self) -> usize {
        self.tables.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Integer wavevector of flat mode index `idx` (unused axes are zero).
    pub fn k(&self, idx: usize) -> [i32; 3] {
        self.tables.k[idx]
    }

    /// Physical wavevector `2*pi*k/L` of flat mode index `idx`.
    pub fn xi(&self, idx: usize) -> [f64; 3] {
        self.tables.xi[idx]
    }

    pub fn xi_table(&self) -> &[[f64; 3]] {
        &self.tables.xi
    }

    pub fn xi2_table(&self) -> &[f64] {
        &self.tables.xi2
    }

    pub fn k_table(&self) -> &[[i32; 3]] {
        &self.tables.k
    }

    /// Fundamental wavenumber `2*pi/L`.
    pub fn fundamental(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Smallest nonzero `|xi|` on the grid.
    pub fn min_nonzero_xi(&self) -> f64 {
        self.fundamental()
    }

    /// Largest `|xi|` on the grid (the corner of the wavenumber cube).
    pub fn max_xi(&self) -> f64 {
        self.fundamental() * (self.n as f64 / 2.0) * (self.dim as f64).sqrt()
    }

    /// Radius of the largest ball of wavevectors fully resolved along every axis.
    pub fn inscribed_xi(&self) -> f64 {
        self.fundamental() * (self.n as f64 / 2.0 - 1.0)
    }

    /// Volume of the periodic box.
    pub fn volume(&self) -> f64 {
        self.box_length.powi(self.dim as i32)
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    /// Flat index of an integer wavevector, if representable on the grid.
    pub fn index_of(&self, k: [i32; 3]) -> Option<usize> {
        let half = (self.n / 2) as i32;
        let mut idx = 0usize;
        for (axis, &ka) in k.iter().enumerate() {
            if axis >= self.dim {
                if ka != 0 {
                    return None;
                }
                continue;
            }
            if ka < -half || ka >= half {
                return None;
            }
            let i = if ka < 0 { ka + self.n as i32 } else { ka } as usize;
            idx = idx * self.n + i;
        }
        Some(idx)
    }

    /// Flat index of the mode `-k` (Hermitian partner). Nyquist components map to themselves.
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let k = self.k(idx);
        let n = self.n as i32;
        let mut out = 0usize;
        for &ka in k.iter().take(self.dim) {
            let neg = (-ka).rem_euclid(n) as usize;
            out = out * self.n + neg;
        }
        out
    }

    /// True when any axis component sits at the Nyquist wavenumber `-n/2`.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = -((self.n / 2) as i32);
        self.k(idx).iter().take(self.dim).any(|&ka| ka == half)
    }

    /// Two-thirds dealiasing mask: true for modes that survive.
    pub fn dealias_keep(&self, idx: usize) -> bool {
        let limit = self.n as f64 / 3.0;
        self.k(idx)
            .iter()
            .take(self.dim)
            .all(|&ka| (ka.unsigned_abs() as f64) <= limit)
    }

    /// Physical coordinates of flat point index `idx` (grid point `x_i = i*L/n`).
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let mut out = [0.0; 3];
        let mut rem = idx;
        for axis in (0..self.dim).rev() {
            out[axis] = (rem % self.n) as f64 * h;
            rem /= self.n;
        }
        out
    }

    /// Same grid with a different box length.
    pub fn with_box_length(&self, box_length: f64) -> Result<Self> {
        Self::new(self.dim, self.n, box_length)
    }
}

fn unflatten(idx: usize, dim: usize, n: usize) -> [i32; 3] {
    let mut out = [0i32; 3];
    let mut rem = idx;
    for axis in (0..dim).rev() {
        let i = (rem % n) as i32;
        rem /= n;
        out[axis] = if i < (n / 2) as i32 { i } else { i - n as i32 };
    }
    out
}
