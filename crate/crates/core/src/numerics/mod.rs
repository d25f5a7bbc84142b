//! Numerical kernels shared by the force calculations.

mod bessel;
mod diff;
mod principal_value;
mod quadrature;
mod roots;

pub use bessel::{bessel_k, bessel_k_scaled, BESSEL_K_MAX_ARG, BESSEL_K_MIN_ARG};
pub use diff::central_diff;
pub use principal_value::principal_value_1d;
pub use quadrature::{
    integrate_adaptive, integrate_adaptive_panels, integrate_semi_infinite,
    integrate_sqrt_endpoint, integrate_sqrt_endpoint_offset, integrate_sqrt_endpoint_upper,
    QuadratureResult, QuadratureSpec,
};
pub use roots::{bisect, find_roots_bracketed};
