//! Cart-pole simulation, conditioned RNN control with gain regularization,
//! and the analysis tools used to study the sim-to-real gap.

// `!(x > 0.0)` style guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the matrix algebra they implement.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod controllers;
pub mod deploy;
pub mod error;
pub mod evaluation;
pub mod plant;
pub mod svg;
pub mod training;

pub use error::{Error, Result};
