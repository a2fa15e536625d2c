#![no_std]
//! Numerical core for Gneiting space-time covariances and their non-linear functionals.

extern crate alloc;

pub mod covariance;
pub mod cyclic;
pub mod error;
pub mod functional;
pub mod geometry;
pub mod hermite;
pub mod quad;
pub mod regimes;
pub mod rosenblatt;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
