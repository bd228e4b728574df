//! Solver library for one-clock robust priced timed games under excess
//! perturbation semantics with a fixed perturbation bound.
//!
//! The pipeline: parse and validate a game, rewrite it stage by stage into a
//! reset-free form (perturbation gadgets, fractional-reset copies, reset
//! unrolling), solve the reset-free game bottom-up into exact piecewise-affine
//! optimal-cost functions, extract an almost-optimal strategy, and map both
//! back to the original game's coordinates. An independent discretized value
//! iteration and an executable semantics validate the results.

pub mod rational;
pub mod fixtures;
pub mod model;
pub mod pipeline;
pub mod pwa;
pub mod semantics;
pub mod solver;
pub mod strategy;
pub mod transform;

pub use rational::{Ext, Q};
