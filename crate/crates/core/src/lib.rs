//! Blind modulation recognition with cyclostationarity-inspired feature
//! layers feeding a multi-branch CNN.

pub mod cf;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod fft;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod preprocess;
pub mod selftest;
pub mod signal;
pub mod train;

pub use error::{Error, Result};
