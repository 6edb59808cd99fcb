//! Numerical kernel: 2×2 complex linear algebra, ODE integration on uniform
//! report grids, quadrature, finite differences and branch-tracked square
//! roots.

pub mod diff;
pub mod linalg;
pub mod ode;
pub mod path;
pub mod quadrature;
pub mod sqrt;

pub use linalg::{mat2_exp, C2Matrix, C2Vector};
pub use ode::{
    integrate_linear_system, integrate_matrix_system, integrate_nonlinear_system, DenseOutput,
    IntegratorSettings, Method, State, Trajectory,
};
pub use path::SampledPath;
pub use quadrature::{cumulative_integral, periodic_quadrature};
pub use sqrt::{continuous_sqrt, DEFAULT_ZERO_THRESHOLD};

use num_complex::Complex64;

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest modulus in a slice; 0 for an empty slice.
pub fn max_abs(values: &[Complex64]) -> f64 {
    values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
