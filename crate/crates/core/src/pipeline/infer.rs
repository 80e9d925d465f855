use image::RgbImage;
use rayon::prelude::*;

use super::samples::window_has_valid;
use super::{clamped_origin, crop, reflect_pad, rgb_tensor, road_padding, texture_tensor, POSITIVE, ROAD_CELL};
use crate::descriptor::{texture_map, DescriptorParams, TextureMap};
use crate::error::{Error, Result};
use crate::imaging::{ensure_same_dims, DisparityMap, Mask};
use crate::models::FcnNet;
use crate::nn::{argmax, Network, Tensor};
use crate::superpixel::{slic_segment, SlicParams, SuperpixelLabeling};

#[derive(Debug, Clone)]
pub struct GroundDetection {
    pub mask: Mask,
    pub texture: TextureMap,
    pub labeling: SuperpixelLabeling,
    /// Per-region decision; regions without valid texture are `false`.
    pub region_ground: Vec<bool>,
}

/// Texture map, superpixels on the RGB image, one network decision per
/// region from its centroid patch, projected back to pixels.
pub fn detect_ground(
    rgb: &RgbImage,
    disparity: &DisparityMap,
    net: &Network<f32>,
    descriptor: &DescriptorParams,
    slic: &SlicParams,
) -> Result<GroundDetection> {
    let (w, h) = disparity.dims();
    ensure_same_dims((w, h), (rgb.width() as usize, rgb.height() as usize))?;
    let shape = net.input_shapes()[0];
    if net.input_shapes().len() != 1 || shape.channels != 1 || shape.height != shape.width {
        return Err(Error::UnsupportedNetwork(format!(
            "ground detection needs a single square 1-channel input, got {:?}",
            net.input_shapes()
        )));
    }
    let patch = shape.height;
    if w < patch || h < patch {
        return Err(Error::InvalidParameter(format!(
            "image {w}x{h} is smaller than the {patch}x{patch} patch"
        )));
    }
    let texture = texture_map(disparity, descriptor)?;
    let encoded = texture_tensor(&texture);
    let labeling = slic_segment(rgb, slic)?;
    let centers = labeling.region_patch_centers();
    let decisions: Vec<bool> = centers
        .par_iter()
        .map(|c| -> Result<bool> {
            let top = clamped_origin(c.row, patch, h);
            let left = clamped_origin(c.col, patch, w);
            if !window_has_valid(&texture, top, left, patch) {
                return Ok(false);
            }
            let logits = net.forward(&[&crop(&encoded, top, left, patch, patch)])?;
            Ok(argmax(logits.data()) == POSITIVE)
        })
        .collect::<Result<_>>()?;
    let mut region_ground = vec![false; labeling.region_count()];
    for (c, d) in centers.iter().zip(decisions) {
        region_ground[c.region] = d;
    }
    let mask = labeling.project_region_classes(&region_ground)?;
    Ok(GroundDetection {
        mask,
        texture,
        labeling,
        region_ground,
    })
}

#[derive(Debug, Clone)]
pub struct RoadSegmentation {
    pub mask: Mask,
    /// `(classes, ceil(h/4), ceil(w/4))` raw scores, one per 4x4 cell.
    pub scores: Tensor<f32>,
}

fn padded_inputs(rgb: &RgbImage, texture: &TextureMap, patch: usize) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let dims = texture.dims();
    ensure_same_dims(dims, (rgb.width() as usize, rgb.height() as usize))?;
    let (t, b, l, r) = road_padding(dims.1, dims.0, patch);
    Ok((
        reflect_pad(&rgb_tensor(rgb), t, b, l, r),
        reflect_pad(&texture_tensor(texture), t, b, l, r),
    ))
}

fn cells_to_mask(scores: &Tensor<f32>, w: usize, h: usize) -> Mask {
    let s = scores.shape();
    Mask::from_fn(w, h, |row, col| {
        let (i, j) = (row / ROAD_CELL, col / ROAD_CELL);
        let cell: Vec<f32> = (0..s.channels).map(|c| scores.at(c, i, j)).collect();
        argmax(&cell) == POSITIVE
    })
}

/// Runs the fully convolutional network once over the padded pair; each
/// output location labels its 4x4 cell.
pub fn segment_road(rgb: &RgbImage, texture: &TextureMap, fcn: &FcnNet<f32>) -> Result<RoadSegmentation> {
    let patch = fcn.patch_shapes()[0].height;
    if fcn.stride() != ROAD_CELL {
        return Err(Error::UnsupportedNetwork(format!(
            "road segmentation needs output stride {ROAD_CELL}, network has {}",
            fcn.stride()
        )));
    }
    let (prgb, ptex) = padded_inputs(rgb, texture, patch)?;
    let scores = fcn.scores(&[&prgb, &ptex])?;
    let (w, h) = texture.dims();
    let expected = (w.div_ceil(ROAD_CELL), h.div_ceil(ROAD_CELL));
    ensure_same_dims(expected, (scores.shape().width, scores.shape().height))?;
    Ok(RoadSegmentation {
        mask: cells_to_mask(&scores, w, h),
        scores,
    })
}

/// Reference path: classifies the patch around every 4x4 cell separately.
pub fn segment_road_patchwise(rgb: &RgbImage, texture: &TextureMap, net: &Network<f32>) -> Result<RoadSegmentation> {
    let patch = net.input_shapes()[0].height;
    let (prgb, ptex) = padded_inputs(rgb, texture, patch)?;
    let (w, h) = texture.dims();
    let (gw, gh) = (w.div_ceil(ROAD_CELL), h.div_ceil(ROAD_CELL));
    let cells: Vec<Vec<f32>> = (0..gh * gw)
        .into_par_iter()
        .map(|k| -> Result<Vec<f32>> {
            let (i, j) = (k / gw, k % gw);
            let (top, left) = (i * ROAD_CELL, j * ROAD_CELL);
            let out = net.forward(&[&crop(&prgb, top, left, patch, patch), &crop(&ptex, top, left, patch, patch)])?;
            Ok(out.into_data())
        })
        .collect::<Result<_>>()?;
    let classes = cells.first().map_or(0, Vec::len);
    let mut data = vec![0.0f32; classes * gh * gw];
    for (k, cell) in cells.iter().enumerate() {
        for (c, &v) in cell.iter().enumerate() {
            data[c * gh * gw + k] = v;
        }
    }
    let scores = Tensor::from_vec(crate::nn::Shape::new(classes, gh, gw), data)?;
    Ok(RoadSegmentation {
        mask: cells_to_mask(&scores, w, h),
        scores,
    })
}
