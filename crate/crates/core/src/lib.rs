//! Reward compatibility and IRL classification for finite-horizon MDPs.
//!
//! The crate is `no_std` (with `alloc`) and contains every algorithm of the
//! toolkit:
//!
//! - [`mdp`]: exact dynamic programming, occupancy measures, (non)compatibility
//!   and feasible-set membership. This is the ground truth the other modules
//!   are tested against.
//! - [`linear`]: Linear MDPs, least-squares transition estimates, elliptical
//!   bonuses and the separating-hyperplane degeneracy certificate.
//! - [`expert`]: expert demonstrations and the estimators of the expert's
//!   return.
//! - [`exploration`]: forward-model samplers and the exploration phase
//!   (reward-free, per-reward and linear).
//! - [`classify`]: the classification phase and the end-to-end pipeline.
//! - [`instances`]: worked examples, random instances and lower-bound
//!   constructions.
//!
//! Stages are 0-based throughout: stage `h` of an `H`-stage problem is
//! `h ∈ 0..H`.

#![cfg_attr(not(test), no_std)]
// Index loops mirror the math; `!(x > 0.0)` deliberately rejects NaN.
#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::too_many_arguments
)]

extern crate alloc;

pub mod classify;
pub mod error;
pub mod expert;
pub mod exploration;
pub mod instances;
pub mod linalg;
pub mod linear;
pub mod lp;
pub mod math;
pub mod mdp;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};

/// Default tolerance for exact dynamic-programming identities.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Probability mass below which a state is treated as unvisited.
pub const SUPPORT_EPS: f64 = 1e-12;
