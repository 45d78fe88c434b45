//! Simulator and security lab for multi-party quantum private comparison
//! with two semi-honest third parties over d-dimensional Bell states.

pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod metrics;
pub mod operator;
pub mod protocol;
pub mod qudit;
pub mod rng;
pub mod security;
pub mod stats;

pub use error::{Error, Result};
