//! Experiment harness for the `gevrey_bea` library: configuration, initial
//! data, study drivers, CSV output, plot scripts and small-dimension oracles.

pub mod config;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod initial;
pub mod oracle;
pub mod plots;
pub mod table;

pub use error::{HarnessError, Result};
