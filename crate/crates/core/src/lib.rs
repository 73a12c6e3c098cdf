//! Run-length analysis of control charts through absorbing Markov chains.
//!
//! Covers the synthetic-type 2-of-(H+1) charts (four variants, with and
//! without head-start, optionally combined with a Shewhart limit), EWMA
//! with exact or fixed limits, two-sided CUSUM and Shewhart charts. For each
//! design the crate computes zero-state ARLs, conditional expected delays,
//! conditional and cyclical steady-state ARLs, calibrates limits to a target
//! in-control ARL, runs the comparison studies built on these, and checks
//! everything against a Monte-Carlo simulator.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calib;
pub mod chain;
pub mod chart;
pub mod classic;
pub mod cli;
pub mod error;
pub mod gauss;
pub mod oracle;
pub mod study;
pub mod synth;

pub use chart::{ChartSpec, FreeParam, Measure, ShiftModel};
pub use error::{Error, Result};
