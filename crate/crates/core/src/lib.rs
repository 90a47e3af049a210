pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod limit_lab;
pub mod singular_ops;
pub mod spectral;
pub mod timestepper;

pub use error::{Error, Result};
