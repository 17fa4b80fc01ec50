//! Numerical laboratory for H = d^4/dx^4 + V on the line.
//!
//! Everything runs on a uniform grid ([`grid`]). The free resolvent and propagator live in
//! [`free_ops`], potentials in [`potentials`], and eigenpairs of the discretized H in
//! [`spectral`]. [`birman_schwinger`] classifies zero energy and expands M(lambda)^-1.
//! [`wave_ops`] builds W by two routes, and [`propagator_multiplier`] measures decay and
//! compares spectral multipliers. [`acceptance`] bundles the end-to-end checks and [`cli`]
//! drives them from TOML.
//!
//! The examples directory has one runnable program per capability:
//! `grid_norms_and_weights`, `free_resolvent_kernels`, `potential_builders`,
//! `discrete_spectrum`, `zero_energy_classification`, `birman_schwinger_expansion`,
//! `wave_operator_cross_check`, `lp_bounds_probe`, `cz_kernels_and_atoms`,
//! `counterexample_models`, `d_star_far_field`, `dispersive_decay`, `spectral_multipliers`,
//! `multiplier_smoothness`, `acceptance_subset` and `config_driven_run`.

// `!(x > tol)` is the NaN-rejecting form throughout; index loops mirror the formulas
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acceptance;
pub mod birman_schwinger;
pub mod cli;
pub mod error;
pub mod free_ops;
pub mod grid;
pub mod potentials;
pub mod propagator_multiplier;
pub mod quad;
pub mod spectral;
pub mod wave_ops;

pub use error::{Error, Result};
