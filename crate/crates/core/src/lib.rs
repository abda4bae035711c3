//! Fowler-Nordheim dynamic analog memory: device simulator, analytic side models and
//! training harness.

pub mod array;
pub mod calibration;
pub mod cell;
pub mod config;
pub mod energy;
pub mod experiments;
pub mod error;
pub mod node;
pub mod numeric;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
