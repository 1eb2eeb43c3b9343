//! Bandit online PCA with log-determinant mirror descent.
//!
//! A learner keeps a density matrix `W_t` as an eigensystem, plays a random
//! unit vector whose second moment matches an exploration-mixed `W_t`,
//! observes only `wᵀ L_t w`, and updates `W⁻¹ ← W⁻¹ + η L̃_t` followed by a
//! trace-one projection. The sparse sampling scheme keeps each update to a
//! rank-two change of the eigensystem.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod environments;
pub mod error;
pub mod harness;
pub mod mirror_descent;
pub mod rng;
pub mod samplers;
pub mod symlinalg;

pub use error::{Error, Result};
