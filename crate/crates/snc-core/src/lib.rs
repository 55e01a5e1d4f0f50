//! Stochastic network calculus workbench for a single constant-capacity
//! FIFO node.
//!
//! The crate has five parts:
//!
//! - [`minplus`]: min-plus algebra over envelope curves and CCDF-like
//!   bounding functions, plus the horizontal-distance operator.
//! - [`traffic`]: arrival traces (compound Poisson and deterministic) and
//!   cumulative-arrival queries.
//! - [`node_sim`]: packet-level simulation of the work-conserving node
//!   under aggregate FIFO and non-preemptive priority scheduling, together
//!   with sample-path functionals (virtual time, min-plus output).
//! - [`bounds`]: closed-form stochastic service curves and delay bounds,
//!   and the exact M/M/1 and M/M/1/priority queueing formulas used for
//!   comparison.
//! - [`validation`]: Monte Carlo harness tying simulation to theory —
//!   empirical delay CCDFs with DKW bands, bound-dominance checks and
//!   exact sample-path verification of the per-packet lemmas.

pub mod bounds;
mod error;
pub mod minplus;
pub mod node_sim;
pub mod traffic;
pub mod validation;

pub use error::{Error, Result};
