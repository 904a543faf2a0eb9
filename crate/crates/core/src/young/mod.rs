//! Young integration, Hölder seminorms and fractional SDE solvers.

mod coefficients;
mod ensemble;
mod integral;
mod solver;

pub use coefficients::{CoefficientSet, ScalarFn};
pub use ensemble::{proportional_ensemble, sde_ensemble, wiener_ensemble};
pub use integral::{
    gamma_interval, holder_norm, young_bound_check, young_fractional, young_riemann, young_trapezoid, BoundReport,
    HolderMode,
};
pub use solver::{
    doss_sussmann_solve, euler_young_solve, malliavin_derivative_x, malliavin_row, milstein_young_solve,
    proportional_flow_solve, variation_statistic, young_residual, Flow, Scheme, SolutionPath,
};
