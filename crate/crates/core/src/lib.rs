//! Robustness metrics and level-set traversal for parametric control pulses
//! under quasi-static noise.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod gradients;
pub mod levelset;
pub mod models;
pub mod operators;
pub mod pulses;
pub mod quadrature;
pub mod robustness;

pub use error::{Error, Result};
