//! SLIC superpixels and the mapping between regions and pixels.

mod labeling;
mod slic;

pub use labeling::{Region, RegionCenter, SuperpixelLabeling};
pub use slic::{rgb_to_lab, slic_segment, SlicParams};
