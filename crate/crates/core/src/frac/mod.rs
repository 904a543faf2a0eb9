//! Fractional integrals and derivatives, the fBm kernel and the operators built from it.

pub mod kernel;
pub mod operators;
pub mod rl;

pub use kernel::{fbm_kernel_constant, kernel_kh, kernel_kh_dt, FbmKernel, KernelSpec, ThresholdKernel};
pub use operators::{inner_product_h, op_kh, op_kh_inverse, op_oh, PairingMode};
pub use rl::{rl_derivative, rl_integral, rl_integral_weighted, Side};
