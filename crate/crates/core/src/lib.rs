//! Spectral laboratory for Littlewood-Paley analysis and mild Navier-Stokes solutions
//! on periodic grids.

pub mod besov;
pub mod calderon;
pub mod error;
pub mod fit;
pub mod heat;
pub mod lab;
pub mod mild;
pub mod quadrature;
pub mod spectral;
pub mod trajectory;

pub use error::{Error, Result};
pub use spectral::{Grid, Rank, SpectralField};
pub use trajectory::Trajectory;
