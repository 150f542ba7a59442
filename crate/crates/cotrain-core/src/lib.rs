//! Core library for building human-robot co-training datasets from
//! demonstration trajectories: resampling, alignment (DTW), subsequence
//! retrieval, kinematic retargeting, rigid calibration, MixUp batch
//! emission, and movement-smoothness metrics.

pub mod align;
pub mod calib;
pub mod distance;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod metrics;
pub mod mixup;
pub mod quat;
pub mod resample;
pub mod retarget;
pub mod retrieve;
pub mod smooth;
mod solver;
pub mod synth;
pub mod traj;
pub mod transform;

pub use error::{Error, Result};
