//! Swing options with a local rate cap `L` and a global volume budget on
//! finite Markov lattices.
//!
//! * [`model`]: lattice models of the payoff rate `X`.
//! * [`solver`]: backward DP for the value surface `J` and the slack-constraint values `W`.
//! * [`marginal`]: discrete marginal values `D ~ D_y^- J`.
//! * [`policy`]: bang-bang exercise policies.
//! * [`verify`]: residual checks of the first-order backward equation and
//!   the structural properties of `J`, plus closed-form and brute-force oracles.
//! * [`montecarlo`]: primal lower bound and martingale-map dual upper bound.

// Grid sweeps index several parallel arrays; `!(x <= y)` rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod grid;
pub mod io;
pub mod marginal;
pub mod model;
pub mod montecarlo;
pub mod policy;
pub mod rng;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{TimeGrid, VolumeGrid};
pub use marginal::{marginal_left, marginal_predictable, MarginalStencil, MarginalSurface, StencilRegistry};
pub use model::{build_model, LatticeModel, ModelBuilder, ModelParams, ModelRegistry};
pub use policy::{extract_policy, PolicyRule, PolicyTable};
pub use solver::{solve_dp, unconstrained_values, ValueSurface};
