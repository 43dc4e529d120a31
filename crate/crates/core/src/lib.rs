//! Stability analysis for linear periodic difference-delay systems
//!
//! ```text
//! y(t) = sum_j D_j(t) y(t - tau_j),    D_j(t + T) = D_j(t),    0 < tau_1 < ... < tau_N < T
//! ```
//!
//! The crate is `no_std` (it needs `alloc`). Every numerical pipeline here is meant to be
//! checked against at least one other:
//!
//! * [`lattice`]: the delay lattice and the kernel coefficients whose finite sums give the
//!   fundamental solution `X(t, s)`.
//! * [`simulator`]: exact (lattice recursion) and grid time stepping, discretized solution
//!   operators, decay-rate fits.
//! * [`spectral`]: truncated sections of the harmonic operator `R(p)` and singular-value scans
//!   over a right half-plane.
//! * [`stability`]: frozen-coefficient, constant-coefficient, generalized half-plane and
//!   monodromy tests, aggregated into a [`stability::StabilityReport`].
//! * [`htf`]: harmonic transfer function `R(p)^-1`, instantaneous transfer function `G(t, p)`.
//! * [`realization`]: one-period discrete realization `(A, B, C, D)` and block impulse operators.
//! * [`volterra`]: atomic Stieltjes-Volterra kernels and their resolvents.
//!
//! Sign convention: the kernel coefficient `K_f(t)` at lattice point `f` enters the
//! fundamental solution with a plus sign, `X(t, s) = sum_{f <= t - s} K_f(t)`, `K_0 = I`.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod catalog;
pub mod error;
pub mod htf;
pub mod lattice;
pub mod linalg;
pub mod realization;
pub mod simulator;
pub mod spectral;
pub mod stability;
pub mod system_model;
pub mod volterra;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
pub use system_model::{DelaySystem, PeriodicMatrixFunction};
