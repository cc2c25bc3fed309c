//! Core algorithms for the rewarded-soup laboratory.
//!
//! Everything here is pure computation over flat `f64` weight vectors and
//! works without `std` (an allocator is required). File IO, configuration and
//! the command line live in the companion `rsoup` crate.
//!
//! The pieces, bottom up:
//!
//! * [`policy`]: small MLP policies with Gaussian or categorical heads, exact
//!   log-probability gradients.
//! * [`checkpoint`]: a self-describing byte format for weight vectors.
//! * [`env`]: the point-mass and token-sequence tasks (plus a bandit used for
//!   sanity checks), each reporting several rewards that pull in different
//!   directions.
//! * [`trainer`]: REINFORCE with a self-critical or batch-mean baseline.
//! * [`soup`]: weight interpolation, simplex sweeps, a-posteriori selection and
//!   the connectivity / ensembling audits.
//! * [`pareto`]: dominance, front filtering, normalization, hypervolume
//!   deficiency.
//! * [`quadratic`]: closed-form analysis of interpolation between optima of
//!   diagonal quadratic rewards.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod checkpoint;
pub mod env;
mod error;
pub mod pareto;
pub mod policy;
pub mod quadratic;
pub mod seed;
pub mod simplex;
pub mod soup;
pub mod trainer;

pub use error::{Error, Result};
pub use simplex::SimplexPoint;
