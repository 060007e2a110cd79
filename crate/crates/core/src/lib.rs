//! Simulation and certificate checking for impulsive systems with inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod comparison;
pub mod error;
pub mod examples;
pub mod expr;
pub mod gronwall;
pub mod impulses;
pub mod inputs;
pub mod scenario;
pub mod simulate;
pub mod system;

pub use error::{Error, Result};
