//! Disparity texture map: the vertical gradient of block-averaged
//! disparity, normalized to disparity pixels per image row.
//!
//! For a block size `b` the block mean `D_b(v, u)` averages the valid
//! disparities of the `b x b` window centered at `(v, u)`. The texture is
//!
//! ```text
//! T(v, u) = (D_b(v + b, u) - D_b(v - b, u)) / (2 b)
//! ```
//!
//! Rows grow downward, so ground surfaces (disparity increasing toward the
//! bottom of the image) give `T > 0` while vertical obstacles give `T ≈ 0`.

use image::GrayImage;

use crate::error::{Error, Result};
use crate::imaging::{DisparityMap, Mask};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptorParams {
    /// Odd block side length in pixels.
    pub block_size: usize,
    /// Minimum fraction of valid pixels for a block mean to be defined.
    pub min_valid_fraction: f64,
    /// Binarization threshold in disparity px per row.
    pub threshold: f64,
}

impl Default for DescriptorParams {
    fn default() -> Self {
        Self {
            block_size: 3,
            min_valid_fraction: 0.5,
            threshold: 0.1,
        }
    }
}

impl DescriptorParams {
    pub fn with_block_size(block_size: usize) -> Self {
        Self {
            block_size,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 || self.block_size.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "block size must be odd and >= 1, got {}",
                self.block_size
            )));
        }
        if !(0.0..=1.0).contains(&self.min_valid_fraction) {
            return Err(Error::InvalidParameter(format!(
                "min_valid_fraction must lie in [0, 1], got {}",
                self.min_valid_fraction
            )));
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Rows and columns the stencil reaches from its center pixel.
    pub fn reach(&self) -> (usize, usize) {
        let r = self.block_size / 2;
        (self.block_size + r, r)
    }
}

/// Per-pixel texture in px/row. Invalid pixels are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl TextureMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "texture data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f32> {
        let t = self.data[row * self.width + col];
        (!t.is_nan()).then_some(t)
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|t| !t.is_nan()).count()
    }

    pub fn flip_horizontal(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: crate::imaging::flip_rows(&self.data, self.width),
        }
    }
}

/// Computes the texture map of `d`.
///
/// Pixels whose stencil leaves the image, or whose upper or lower block has
/// too few valid disparities, are invalid. Fails if the image is too small
/// for the stencil to fit anywhere.
pub fn texture_map(d: &DisparityMap, p: &DescriptorParams) -> Result<TextureMap> {
    p.validate()?;
    let (w, h) = d.dims();
    let b = p.block_size;
    let (row_reach, col_reach) = p.reach();
    if h < 2 * row_reach + 1 || w < 2 * col_reach + 1 {
        return Err(Error::InvalidParameter(format!(
            "{w}x{h} disparity map is too small for block size {b}"
        )));
    }

    let means = block_means(d, b, p.min_valid_fraction);
    let mut out = vec![f32::NAN; w * h];
    let norm = 2.0 * b as f64;
    for row in row_reach..h - row_reach {
        for col in col_reach..w - col_reach {
            let below = means[(row + b) * w + col];
            let above = means[(row - b) * w + col];
            if !below.is_nan() && !above.is_nan() {
                out[row * w + col] = ((below - above) / norm) as f32;
            }
        }
    }
    TextureMap::new(w, h, out)
}

/// Block means in f64; NaN where the block leaves the image or lacks
/// support. Sums run in a fixed row-major order over the block.
fn block_means(d: &DisparityMap, b: usize, min_valid_fraction: f64) -> Vec<f64> {
    let (w, h) = d.dims();
    let r = b / 2;
    let data = d.data();
    let area = (b * b) as f64;
    let mut means = vec![f64::NAN; w * h];
    for row in r..h - r {
        for col in r..w - r {
            let mut sum = 0.0f64;
            let mut count = 0usize;
            for rr in row - r..=row + r {
                for &v in &data[rr * w + col - r..=rr * w + col + r] {
                    if !v.is_nan() {
                        sum += v as f64;
                        count += 1;
                    }
                }
            }
            if count > 0 && count as f64 >= min_valid_fraction * area {
                means[row * w + col] = sum / count as f64;
            }
        }
    }
    means
}

/// Positive where the texture is valid and strictly above `threshold`.
pub fn binarize(t: &TextureMap, threshold: f64) -> Mask {
    let data = t
        .data
        .iter()
        .map(|&v| !v.is_nan() && v as f64 > threshold)
        .collect();
    Mask::new(t.width, t.height, data).expect("texture dims are valid")
}

/// Full-scale value of the 8-bit visualization, in px/row.
pub const VISUALIZATION_MAX: f32 = 1.0;

/// 8-bit rendering `clamp(T / 1.0, 0, 1) * 255`; invalid pixels are black.
pub fn texture_visualization(t: &TextureMap) -> GrayImage {
    let raw = t
        .data
        .iter()
        .map(|&v| {
            if v.is_nan() {
                0
            } else {
                ((v / VISUALIZATION_MAX).clamp(0.0, 1.0) * 255.0).round() as u8
            }
        })
        .collect();
    GrayImage::from_raw(t.width as u32, t.height as u32, raw).expect("dims match")
}

/// Writes raw texture values as PFM; invalid pixels become +inf.
pub fn save_texture_pfm(path: impl AsRef<std::path::Path>, t: &TextureMap) -> Result<()> {
    let data: Vec<f32> = t
        .data
        .iter()
        .map(|&v| if v.is_nan() { f32::INFINITY } else { v })
        .collect();
    crate::imaging::write_pfm(path, t.width, t.height, &data)
}

/// Reads a texture PFM written by [`save_texture_pfm`].
pub fn load_texture_pfm(path: impl AsRef<std::path::Path>) -> Result<TextureMap> {
    let pfm = crate::imaging::read_pfm(path)?;
    if pfm.channels != 1 {
        return Err(Error::Parse("texture pfm must be grayscale".into()));
    }
    let data = pfm
        .data
        .into_iter()
        .map(|v| if v.is_finite() { v } else { f32::NAN })
        .collect();
    TextureMap::new(pfm.width, pfm.height, data)
}
