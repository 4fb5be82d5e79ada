//! Operator-space tools for deciding when a quantum membership problem needs an
//! informationally complete measurement.

pub mod error;
pub mod opspace;
pub mod states;
pub mod meas;
pub mod membership;
pub mod catalog;
pub mod suites;
pub mod cli;

pub use error::{Error, Result};
