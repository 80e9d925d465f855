//! Sample extraction, training and inference for the ground and road
//! tasks.
//!
//! Class index 1 is the positive class (ground / road), 0 the negative.

mod infer;
mod samples;
mod train;

pub use infer::{
    detect_ground, segment_road, segment_road_patchwise, GroundDetection, RoadSegmentation,
};
pub use samples::{
    balance_classes, extract_ground_samples, extract_road_samples, load_ground_samples,
    save_ground_samples, GroundImage, GroundSample, RoadImage, RoadSample, RoadSampleSet,
};
pub use train::{evaluate, train, EpochMetrics, SampleSource, TrainConfig, TrainOutcome};

use image::RgbImage;

use crate::descriptor::TextureMap;
use crate::nn::{Shape, Tensor};

pub const NEGATIVE: usize = 0;
pub const POSITIVE: usize = 1;

/// Texture values are clamped to this magnitude before entering a network.
pub const TEXTURE_CLAMP: f32 = 1.0;

/// Side of the square region labeled by one road-net output.
pub const ROAD_CELL: usize = 4;

/// `(1, h, w)` tensor of `clamp(T, -1, 1)`, invalid pixels as 0.
pub fn texture_tensor(t: &TextureMap) -> Tensor<f32> {
    let (w, h) = t.dims();
    let data = t
        .data()
        .iter()
        .map(|&v| if v.is_nan() { 0.0 } else { v.clamp(-TEXTURE_CLAMP, TEXTURE_CLAMP) })
        .collect();
    Tensor::from_vec(Shape::new(1, h, w), data).expect("dims match")
}

/// `(3, h, w)` tensor with channels scaled to `[0, 1]`.
pub fn rgb_tensor(img: &RgbImage) -> Tensor<f32> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut data = vec![0.0f32; 3 * w * h];
    for (i, p) in img.pixels().enumerate() {
        for c in 0..3 {
            data[c * w * h + i] = p.0[c] as f32 / 255.0;
        }
    }
    Tensor::from_vec(Shape::new(3, h, w), data).expect("dims match")
}

/// Window of `h x w` starting at `(top, left)`; must lie inside `t`.
pub fn crop(t: &Tensor<f32>, top: usize, left: usize, h: usize, w: usize) -> Tensor<f32> {
    let s = t.shape();
    assert!(top + h <= s.height && left + w <= s.width, "crop outside tensor");
    let mut data = Vec::with_capacity(s.channels * h * w);
    for c in 0..s.channels {
        for y in top..top + h {
            let start = (c * s.height + y) * s.width + left;
            data.extend_from_slice(&t.data()[start..start + w]);
        }
    }
    Tensor::from_vec(Shape::new(s.channels, h, w), data).expect("sizes match")
}

/// Top-left corner of a `size`-wide window centred on `center`, shifted to
/// stay inside `[0, extent)`.
pub fn clamped_origin(center: usize, size: usize, extent: usize) -> usize {
    center.saturating_sub(size / 2).min(extent.saturating_sub(size))
}

/// Mirror index without repeating the edge sample (`-1 -> 1`).
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m < n as isize { m } else { period - m }) as usize
}

/// Reflection padding on each side.
pub fn reflect_pad(t: &Tensor<f32>, top: usize, bottom: usize, left: usize, right: usize) -> Tensor<f32> {
    let s = t.shape();
    let (h, w) = (s.height + top + bottom, s.width + left + right);
    let cols: Vec<usize> = (0..w).map(|x| reflect(x as isize - left as isize, s.width)).collect();
    let mut data = Vec::with_capacity(s.channels * h * w);
    for c in 0..s.channels {
        for y in 0..h {
            let sy = reflect(y as isize - top as isize, s.height);
            let row = &t.data()[(c * s.height + sy) * s.width..][..s.width];
            data.extend(cols.iter().map(|&x| row[x]));
        }
    }
    Tensor::from_vec(Shape::new(s.channels, h, w), data).expect("sizes match")
}

/// Padding `(top, bottom, left, right)` that lets a `patch`-sized window
/// slide with stride 4 so each 4x4 cell of an `h x w` image sits at a
/// window centre.
pub fn road_padding(h: usize, w: usize, patch: usize) -> (usize, usize, usize, usize) {
    let margin = (patch - ROAD_CELL) / 2;
    let extra = |n: usize| n.div_ceil(ROAD_CELL) * ROAD_CELL - n;
    (margin, margin + extra(h), margin, margin + extra(w))
}
