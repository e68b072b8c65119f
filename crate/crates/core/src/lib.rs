//! Numerical core for measuring homogenization of fully nonlinear parabolic
//! equations in random space-time environments.
//!
//! The crate is `no_std` (with `alloc`) and contains only pure numerics:
//!
//! * [`lattice`]: triadic parabolic cubes, space-time grids and fields.
//! * [`environment`]: seeded random operators `F(M, x, t, ω)` and their involution.
//! * [`solver`]: a monotone explicit finite-difference viscosity solver.
//! * [`envelope`]: monotone envelopes and parabolic subdifferential measures.
//! * [`mu`]: the subadditive quantities `μ`, `μ*`, their moments and per-sample checks.
//! * [`effective`]: effective-operator extraction, homogenized solves, corrector decay.
//!
//! Parallel sweeps are expressed through [`exec::SeedRunner`]; the std companion
//! crate supplies a thread-pool implementation.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod effective;
pub mod envelope;
pub mod environment;
pub mod error;
pub mod exec;
pub mod lattice;
pub mod mu;
pub mod rng;
pub mod solver;
pub mod stats;

mod math;

pub use error::{Error, Result};
