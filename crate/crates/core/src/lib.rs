//! Recovery-factor classification for oil reservoirs.

pub mod booster;
pub mod dataset;
pub mod explain;
pub mod matrix;
pub mod metrics;
pub mod preprocess;
mod rng;
pub mod synth;
pub mod tuner;
pub mod workflow;

pub use matrix::Matrix;
