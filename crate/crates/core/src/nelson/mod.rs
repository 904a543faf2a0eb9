//! Stochastic derivatives: exact Gaussian quotients, regression estimators
//! across step ladders, Volterra classification and diffusion formulas.

mod diffusion;
mod estimate;
mod exact;
mod regress;
mod volterra;
mod weak;

pub use diffusion::*;
pub use estimate::*;
pub use exact::*;
pub use regress::*;
pub use volterra::*;
pub use weak::*;
