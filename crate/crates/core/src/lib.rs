//! Volumetric brain-tumor segmentation.
//!
//! A fixed first layer of 3-D Difference-of-Gaussian filters, applied by FFT
//! convolution to each MRI modality and its gradient magnitude, produces a
//! per-voxel feature vector. A small fully connected network then classifies
//! every voxel independently into one of five tissue classes, and Dice scores
//! over the whole/core/active tumor regions measure the result.

pub mod config;
pub mod conv;
pub mod dog;
pub mod error;
pub mod features;
pub mod io;
pub mod metrics;
pub mod net;
pub mod phantom;
pub mod pipeline;
pub mod volume;

pub use error::{Error, Result};
