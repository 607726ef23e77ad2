//! Set values of finite mean field games.
//!
//! The crate computes forward measure flows, backward value functions,
//! approximate mean field equilibria and the set of equilibrium values on a
//! finite action grid, checks the dynamic programming principle for set
//! values, and runs N-player and 1-d diffusion experiments.
//!
//! Module map:
//! - [`measure`], [`space`], [`action`], [`game`], [`models`]: core types.
//! - [`control`], [`dynamics`], [`pathdyn`]: flows, costs and values.
//! - [`setvalue`]: equilibrium gaps, set values and DPP checks.
//! - [`relaxed`]: relaxed controls, global measures and their transforms.
//! - [`nplayer`], [`hetero`]: homogeneous and heterogeneous N-player games.
//! - [`diffusion`]: the one-dimensional controlled diffusion.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops over states mirror the recursions they implement.
#![allow(clippy::needless_range_loop)]

pub mod action;
pub mod control;
pub mod diffusion;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod hetero;
pub mod measure;
pub mod models;
pub mod nplayer;
pub mod pathdyn;
pub mod relaxed;
pub mod rng;
pub mod scenario;
pub mod setvalue;
pub mod space;
pub mod stats;
pub mod textfmt;

pub use action::ActionSet;
pub use error::{Error, Result};
pub use game::{
    validate_game_spec, GameSpec, Limits, Model, PathModel, StateModel, ValidationReport,
};
pub use measure::{empirical_measure, w1_finite, PathMeasure, SimplexMeasure};
pub use space::{PathSpace, StateSpace, TimeGrid};

/// Tolerance below which an equilibrium gap counts as zero.
pub const TOL_EXACT: f64 = 1e-10;

/// Sup-norm tolerance for merging generators of a set value.
pub const DEDUP_TOL: f64 = 1e-10;
