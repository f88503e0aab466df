//! Sample-wise learning-curve shape analysis.
//!
//! The crate ingests per-repeat risk observations indexed by training-set
//! size (anchor), aggregates them into empirical mean curves, and provides:
//!
//! - statistically rigorous detection of monotonicity and convexity
//!   violations, peaking, and dipping ([`shape`]), backed by paired
//!   one-sided t-tests with Bonferroni correction ([`stats`]);
//! - four-parameter curve fitting (POW4 / MMF4 / WBL4) by multi-start
//!   Levenberg-Marquardt, with shape-stratified MSE summaries
//!   ([`fitting`]);
//! - pairwise curve-crossing statistics and a Successive Halving simulator
//!   with regret and top-k metrics ([`selection`]);
//! - deterministic synthetic fixtures for all of the above ([`synth`]).
//!
//! Lower metric values are better throughout, and every operation is a
//! pure function of its inputs, so batch drivers may process curves in
//! parallel freely.

pub mod curves;
pub mod error;
pub mod fitting;
pub mod rng;
pub mod selection;
pub mod shape;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
