//! Nash equilibria of an `n`-agent liquidation game under transient price
//! impact.
//!
//! Agents unwind inventories on a shared time grid. Each trade moves the price
//! by an amount that decays through the kernel `G`, and every agent is charged
//! a quadratic cost `θ ξ²` per trade. Equilibrium strategies are linear
//! combinations of two base vectors: `v` carries the average inventory and `w`
//! the deviations from it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod finite;
pub mod infinite;
pub mod linalg;
pub mod model;
pub mod numeric;
pub mod simulation;
pub mod threshold;

pub use error::{Error, Result};
