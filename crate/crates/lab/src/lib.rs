//! Simulation side of the toolkit: Gaussian field sampling, replicate
//! ensembles, experiment configs, output formats and verification suites.

pub mod config;
pub mod ensemble;
pub mod error;
pub mod exec;
pub mod fieldsim;
pub mod io;
pub mod verify;

pub use error::{Error, Result};
