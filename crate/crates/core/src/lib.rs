//! Fractional Brownian motion and Gaussian Volterra processes, fractional
//! calculus on grids, pathwise Young SDEs and Nelson-type conditional
//! stochastic derivatives.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

pub mod error;
pub mod frac;
pub mod gaussian;
pub mod grid;
pub mod linalg;
pub mod nelson;
pub mod quad;
pub mod rng;
pub mod scalar;
pub mod special;
pub mod young;

pub use error::{Error, Result};
pub use grid::{FracOrder, GridFunction, HolderExponent, HurstIndex, TimeGrid};
pub use rng::SeedSpec;
pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Hurst = HurstIndex<f64>;
pub type Grid = TimeGrid<f64>;
pub type GridFn = GridFunction<f64>;
