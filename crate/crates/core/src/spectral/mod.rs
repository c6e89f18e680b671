//! Periodic spectral substrate: grids, transforms, fields and Fourier-side operators.

pub mod clf1;
pub mod fft;
pub mod field;
pub mod grid;
pub mod mollifier;
pub mod ops;
pub mod random;

pub use field::{lp_norm_physical, Rank, SpectralField};
pub use grid::Grid;
pub use mollifier::{mollify, Mollifier};
pub use ops::{
    advection, apply_multiplier, apply_radial, curl, dealias, dealias_product, divergence,
    divergence_residual, gradient, laplacian, leray_project, pressure_from_velocity,
};
