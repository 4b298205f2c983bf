//! Hyperbolic-parabolic chemotaxis on metric graphs.

pub mod band;
pub mod cli;
pub mod config;
pub mod coupling;
pub mod error;
pub mod grid;
pub mod hyperbolic;
pub mod network;
pub mod parabolic;
pub mod scenario;
pub mod simulator;
pub mod snapshot;
pub mod state;

pub use error::{Error, Result};
