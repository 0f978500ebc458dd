//! Adaptive scheduling of stored scalable video over slow-fading channels.

pub mod bound;
pub mod buffer;
pub mod channel;
pub mod cli;
pub mod distortion;
pub mod error;
pub mod exec;
pub mod harness;
pub mod manifest;
pub mod mdp;
pub mod online;
pub mod stream;
pub mod toy;

pub use error::{Error, Result};
