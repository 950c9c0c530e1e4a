//! Numerical laboratory for channel-localized Strichartz estimates of radial
//! waves in odd dimensions.
//!
//! The crate evaluates radial free waves from their radiation profiles,
//! propagates forcings with the spherical-means formula, measures
//! channel-localized `L^p_t L^q_x` norms over the regions
//! `Omega_j = {|t| + 2^j <= |x| < |t| + 2^{j+1}}`, solves the exterior
//! semilinear problem by Picard iteration and runs seeded ensemble
//! experiments that estimate the implicit constants and decay exponents.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bessel;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod exterior;
pub mod fd;
pub mod legendre;
pub mod profile;
pub mod propagator;
pub mod quadrature;
pub mod wavefield;

pub use error::{Error, Result};
