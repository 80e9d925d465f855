//! Disparity maps, binary masks, camera geometry, file formats and the
//! analytic plane-scene generator.

mod io;
mod overlay;
mod synth;

pub use io::{
    load_disparity, load_mask, load_rgb, read_pfm, save_disparity, save_mask, save_rgb,
    write_pfm, DisparityFormat, PfmImage,
};
pub use image::RgbImage;
pub use overlay::{render_boundaries, render_overlay};
pub use synth::{
    add_gaussian_noise, named_scene, random_scene, synth_scene, Plane, PlaneEntry, PlaneKind,
    PlaneSceneSpec, Rect, SceneName, SyntheticScene,
};

use crate::error::{Error, Result};

/// Dense disparity in pixels. Invalid pixels are stored as NaN and surface
/// as `None` through [`DisparityMap::get`].
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DisparityMap {
    pub const INVALID: f32 = f32::NAN;

    /// Builds a map from row-major data. NaN marks invalid pixels; any other
    /// value must be finite and non-negative.
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if let Some(bad) = data.iter().find(|d| !d.is_nan() && !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "disparity values must be finite and non-negative, found {bad}"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn invalid(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "disparity map must be non-empty");
        Self {
            width,
            height,
            data: vec![Self::INVALID; width * height],
        }
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

    /// Raw row-major values, NaN where invalid.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f32> {
        let d = self.data[row * self.width + col];
        (!d.is_nan()).then_some(d)
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        !self.data[row * self.width + col].is_nan()
    }

    /// Sets a pixel; `None` marks it invalid.
    pub fn set(&mut self, row: usize, col: usize, value: Option<f32>) {
        let v = match value {
            Some(d) => {
                assert!(d.is_finite() && d >= 0.0, "invalid disparity {d}");
                d
            }
            None => Self::INVALID,
        };
        self.data[row * self.width + col] = v;
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| !d.is_nan()).count()
    }

    pub fn max_valid(&self) -> Option<f32> {
        self.data
            .iter()
            .filter(|d| !d.is_nan())
            .copied()
            .fold(None, |m, d| Some(m.map_or(d, |m: f32| m.max(d))))
    }

    pub fn flip_horizontal(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: flip_rows(&self.data, self.width),
        }
    }
}

/// Per-pixel binary labels. `true` is the positive class (ground or road).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        assert!(width > 0 && height > 0, "mask must be non-empty");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(width > 0 && height > 0, "mask must be non-empty");
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self {
            width,
            height,
            data,
        }
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

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    pub fn count_positive(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|b| !b).collect(),
        }
    }

    pub fn flip_horizontal(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: flip_rows(&self.data, self.width),
        }
    }
}

/// Rectified pinhole stereo rig.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub focal_length_px: f64,
    pub baseline_m: f64,
    pub camera_height_m: f64,
    pub horizon_row_v0: f64,
    pub principal_col_u0: f64,
}

impl CameraModel {
    pub const DEFAULT_FOCAL_PX: f64 = 700.0;
    pub const DEFAULT_BASELINE_M: f64 = 0.54;
    pub const DEFAULT_HEIGHT_M: f64 = 1.65;

    /// KITTI-like rig for an image of the given size: principal row at a
    /// third of the height, principal column at the center.
    pub fn kitti_like(width: usize, height: usize) -> Self {
        Self {
            focal_length_px: Self::DEFAULT_FOCAL_PX,
            baseline_m: Self::DEFAULT_BASELINE_M,
            camera_height_m: Self::DEFAULT_HEIGHT_M,
            horizon_row_v0: height as f64 / 3.0,
            principal_col_u0: width as f64 / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("focal_length_px", self.focal_length_px)?;
        positive("baseline_m", self.baseline_m)?;
        positive("camera_height_m", self.camera_height_m)?;
        if !self.horizon_row_v0.is_finite() || !self.principal_col_u0.is_finite() {
            return Err(Error::InvalidParameter("principal point must be finite".into()));
        }
        Ok(())
    }

    /// Row slope of the disparity of a horizontal ground plane, in px per row.
    pub fn flat_ground_slope(&self) -> f64 {
        self.baseline_m / self.camera_height_m
    }

    /// Disparity of a fronto-parallel surface at `depth_m`.
    pub fn disparity_at_depth(&self, depth_m: f64) -> f64 {
        self.focal_length_px * self.baseline_m / depth_m
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    if len != width * height {
        return Err(Error::InvalidParameter(format!(
            "data length {len} does not match {width}x{height}"
        )));
    }
    Ok(())
}

pub(crate) fn flip_rows<T: Copy>(data: &[T], width: usize) -> Vec<T> {
    data.chunks_exact(width)
        .flat_map(|row| row.iter().rev().copied())
        .collect()
}

pub(crate) fn ensure_same_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
