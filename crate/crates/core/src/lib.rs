//! Feynman-Kac transition kernels and Green's functions for second-order
//! operators whose coefficients have a power-law singularity in one
//! coordinate.
//!
//! The reduced one-dimensional operator at fixed spatial momentum `p` is
//!
//! ```text
//! A = -1/2 d²/dη² + p·Ṽ(η)·p + W(η)
//! ```
//!
//! The crate provides Monte Carlo estimators of `exp(-τA)` over Brownian
//! bridges ([`kernel`]), the two analytic Jensen bounds that bracket them
//! ([`bounds`]), τ-integrated Green's functions and scaling fits ([`green`]),
//! the modified-Bessel and position-space representations of the upper bound
//! ([`appendix`]) and a finite-difference lattice oracle ([`oracle`]).
//!
//! The crate is `no_std` and needs only `alloc`. Parallelism is injected by
//! the caller through [`exec::ChunkExecutor`]; results never depend on the
//! executor.
#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod appendix;
pub mod bounds;
pub mod bridge;
mod error;
pub mod exec;
pub mod green;
pub mod kernel;
pub mod linalg;
pub mod numerics;
pub mod oracle;
pub mod potentials;

pub use error::{Error, Result};
