//! Separable multi-dimensional FFTs over the isotropic periodic grid.
//!
//! Forward transforms are normalized by `1/n^dim` so that a physical field is
//! recovered as `f(x) = sum_k c_k exp(i xi_k . x)` by the unnormalized inverse.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::Grid;

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> Plans {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

fn transform(grid: &Grid, data: &mut [Complex64], dir: Direction) {
    let n = grid.n();
    let dim = grid.dim();
    debug_assert_eq!(data.len(), grid.len());
    let (fwd, inv) = plans(n);
    let fft = match dir {
        Direction::Forward => fwd,
        Direction::Inverse => inv,
    };
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];

    // Contiguous last axis: rustfft processes consecutive chunks of length n.
    fft.process_with_scratch(data, &mut scratch);

    // Strided axes: gather a batch of lines, transform, scatter back.
    let total = data.len();
    for axis in 0..dim - 1 {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        let mut lines = vec![Complex64::default(); stride * n];
        for start in (0..total).step_by(block) {
            for i in 0..n {
                for s in 0..stride {
                    lines[s * n + i] = data[start + i * stride + s];
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            for i in 0..n {
                for s in 0..stride {
                    data[start + i * stride + s] = lines[s * n + i];
                }
            }
        }
    }

    if dir == Direction::Forward {
        let norm = 1.0 / total as f64;
        for c in data.iter_mut() {
            *c *= norm;
        }
    }
}

/// Physical samples to normalized Fourier coefficients.
pub fn forward_real(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(grid, &mut buf, Direction::Forward);
    buf
}

/// Normalized Fourier coefficients to physical samples (real part).
pub fn inverse_real(grid: &Grid, coeffs: &[Complex64]) -> Vec<f64> {
    let mut buf = coeffs.to_vec();
    transform(grid, &mut buf, Direction::Inverse);
    buf.into_iter().map(|c| c.re).collect()
}

/// Complex round trip helpers, used where imaginary parts are needed.
pub fn forward_complex(grid: &Grid, data: &mut [Complex64]) {
    transform(grid, data, Direction::Forward);
}

pub fn inverse_complex(grid: &Grid, data: &mut [Complex64]) {
    transform(grid, data, Direction::Inverse);
}
