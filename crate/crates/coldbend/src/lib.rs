//! Cold-bent glass facade design: panel simulation, surrogate datasets and
//! training, design optimization and the interactive service behind one
//! configuration and command line.

pub mod cli;
pub mod config;
pub mod testbed;
pub mod verify;

pub use config::{Config, ConfigError};
pub use testbed::SaddleTestbed;
