//! Stochastic Banach-Picard iterations with sub-Weibull error control.

pub mod bounds;
pub mod config;
pub mod engine;
pub mod error;
pub mod io;
pub mod montecarlo;
pub mod operators;
pub mod subweibull;

pub use error::{ConfigError, Error, Result};
