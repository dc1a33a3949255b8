//! First-order primal-dual proximal splitting for saddle-point problems
//!
//! ```text
//! min_x max_y  F(x) + K(x, y) − G_*(y)
//! ```
//!
//! with F and G_* prox-simple and K smooth but not necessarily
//! convex-concave. The crate provides the basic, block-adapted, inertial and
//! modified primal-dual proximal splitting iterations, executable
//! step-length certificates, Bregman divergence tools and per-iteration
//! convergence monitors.

// `!(v > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blockvec;
pub mod bregman;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod linop;
pub mod params;
pub mod prox;
pub mod saddle;
pub mod solvers;
pub mod steprules;

pub use blockvec::{bv_combine, bv_dot, bv_norm2, BlockVector, PrimalDual};
pub use error::{Error, Result};
pub use params::ParamMap;
pub use prox::{prox_apply, prox_oracle, ProxFunction};
pub use saddle::{make_problem, SaddleProblem};
pub use solvers::{
    solve_block_pdps, solve_inertial_pdps, solve_modified_pdps, solve_pdps, SolverOptions,
};
pub use steprules::{Certificate, StepLengths, Verdict};
