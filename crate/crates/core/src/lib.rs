//! Ground-plane detection and road segmentation driven by a local
//! disparity-texture descriptor.
//!
//! The crate is organized bottom-up:
//!
//! * [`imaging`]: disparity maps, masks, file formats and an analytic
//!   planar-scene generator with exact ground truth.
//! * [`descriptor`]: the disparity texture map (block-averaged vertical
//!   disparity gradient) and its binarization.
//! * [`superpixel`]: SLIC segmentation and region/pixel mapping.
//! * [`nn`]: a small f32/f64 tensor and layer toolkit with backprop, SGD,
//!   finite-difference checking and a binary checkpoint container.
//! * [`models`]: the patch ground classifier, the two-path fusion road
//!   network and their fully convolutional forms.
//! * [`baseline`]: V-disparity ground fitting for comparison.
//! * [`pipeline`]: sample extraction, training and both inference paths.
//! * [`eval`]: confusion counts, metrics and comparison reports.

pub mod baseline;
pub mod descriptor;
pub mod error;
pub mod eval;
pub mod imaging;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod superpixel;

pub use error::{Error, Result};
pub use imaging::{CameraModel, DisparityMap, Mask};
