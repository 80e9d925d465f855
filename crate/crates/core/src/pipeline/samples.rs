use std::path::Path;

use image::RgbImage;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{clamped_origin, crop, reflect_pad, rgb_tensor, road_padding, texture_tensor, NEGATIVE, POSITIVE, ROAD_CELL};
use crate::descriptor::{texture_map, DescriptorParams, TextureMap};
use crate::error::{Error, Result};
use crate::imaging::{ensure_same_dims, DisparityMap, Mask};
use crate::nn::{ByteReader, ByteWriter, Shape, Tensor};
use crate::superpixel::{slic_segment, SlicParams};

/// One training image for the ground task.
#[derive(Debug, Clone)]
pub struct GroundImage {
    pub rgb: RgbImage,
    pub disparity: DisparityMap,
    pub mask: Mask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundSample {
    /// `(1, P, P)` encoded texture.
    pub patch: Tensor<f32>,
    pub label: usize,
    pub image: usize,
    pub region: usize,
}

/// Candidate patches for one image: one per superpixel, centred on its
/// rounded centroid and shifted inside the image. Regions whose window has
/// no valid texture are skipped (inference never consults the network for
/// them).
fn ground_candidates(
    index: usize,
    img: &GroundImage,
    descriptor: &DescriptorParams,
    slic: &SlicParams,
    patch: usize,
) -> Result<Vec<GroundSample>> {
    let dims = img.disparity.dims();
    ensure_same_dims(dims, (img.rgb.width() as usize, img.rgb.height() as usize))?;
    ensure_same_dims(dims, img.mask.dims())?;
    let (w, h) = dims;
    if w < patch || h < patch {
        return Err(Error::InvalidParameter(format!(
            "image {index} ({w}x{h}) is smaller than the {patch}x{patch} patch"
        )));
    }
    let texture = texture_map(&img.disparity, descriptor)?;
    let encoded = texture_tensor(&texture);
    let labeling = slic_segment(&img.rgb, slic)?;
    let majority = labeling.region_majority(&img.mask)?;
    let mut out = Vec::new();
    for c in labeling.region_patch_centers() {
        let top = clamped_origin(c.row, patch, h);
        let left = clamped_origin(c.col, patch, w);
        if !window_has_valid(&texture, top, left, patch) {
            continue;
        }
        out.push(GroundSample {
            patch: crop(&encoded, top, left, patch, patch),
            label: if majority[c.region] { POSITIVE } else { NEGATIVE },
            image: index,
            region: c.region,
        });
    }
    Ok(out)
}

pub(crate) fn window_has_valid(t: &TextureMap, top: usize, left: usize, size: usize) -> bool {
    (top..top + size).any(|r| (left..left + size).any(|c| t.get(r, c).is_some()))
}

/// Superpixel-centred texture patches with region-majority labels,
/// balanced to equal class counts.
pub fn extract_ground_samples(
    images: &[GroundImage],
    descriptor: &DescriptorParams,
    slic: &SlicParams,
    patch: usize,
    seed: u64,
) -> Result<Vec<GroundSample>> {
    let per_image: Vec<Vec<GroundSample>> = images
        .par_iter()
        .enumerate()
        .map(|(i, img)| ground_candidates(i, img, descriptor, slic, patch))
        .collect::<Result<_>>()?;
    balance_classes(per_image.into_iter().flatten().collect(), |s| s.label, seed)
}

/// Uniformly subsamples (seeded) every class down to the rarest class's
/// count; survivors keep their original order.
pub fn balance_classes<S>(items: Vec<S>, label: impl Fn(&S) -> usize, seed: u64) -> Result<Vec<S>> {
    let classes = items.iter().map(&label).max().map_or(0, |m| m + 1).max(2);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, s) in items.iter().enumerate() {
        by_class[label(s)].push(i);
    }
    let keep_n = by_class.iter().map(Vec::len).min().unwrap_or(0);
    if keep_n == 0 {
        return Err(Error::Empty("a class has no samples; cannot balance".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; items.len()];
    for members in &by_class {
        for j in sample(&mut rng, members.len(), keep_n) {
            keep[members[j]] = true;
        }
    }
    Ok(items.into_iter().zip(keep).filter_map(|(s, k)| k.then_some(s)).collect())
}

/// One training image for the road task.
#[derive(Debug, Clone)]
pub struct RoadImage {
    pub rgb: RgbImage,
    pub texture: TextureMap,
    pub mask: Mask,
}

/// A single-class 4x4 cell; `row`/`col` are its top-left pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoadSample {
    pub image: usize,
    pub row: usize,
    pub col: usize,
    pub label: usize,
}

/// Road samples over reflection-padded inputs; patches are cut on demand.
#[derive(Debug, Clone)]
pub struct RoadSampleSet {
    pub patch: usize,
    padded: Vec<(Tensor<f32>, Tensor<f32>)>,
    pub samples: Vec<RoadSample>,
}

impl RoadSampleSet {
    /// `(rgb, texture)` patches whose central 4x4 cell is the sample's.
    pub fn patches(&self, i: usize) -> (Tensor<f32>, Tensor<f32>) {
        let s = self.samples[i];
        let (rgb, tex) = &self.padded[s.image];
        let p = self.patch;
        (crop(rgb, s.row, s.col, p, p), crop(tex, s.row, s.col, p, p))
    }
}

/// One sample per 4x4 cell whose mask is single-class; mixed cells and
/// cells overhanging the image edge are skipped. `max_samples > 0` keeps a
/// seeded uniform subset of that size.
pub fn extract_road_samples(
    images: &[RoadImage],
    patch: usize,
    max_samples: usize,
    seed: u64,
) -> Result<RoadSampleSet> {
    if patch < ROAD_CELL || !(patch - ROAD_CELL).is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "road patch {patch} must be 4 plus an even margin"
        )));
    }
    let mut padded = Vec::with_capacity(images.len());
    let mut samples = Vec::new();
    for (i, img) in images.iter().enumerate() {
        let dims = img.mask.dims();
        ensure_same_dims(dims, (img.rgb.width() as usize, img.rgb.height() as usize))?;
        ensure_same_dims(dims, img.texture.dims())?;
        let (w, h) = dims;
        let (t, b, l, r) = road_padding(h, w, patch);
        padded.push((
            reflect_pad(&rgb_tensor(&img.rgb), t, b, l, r),
            reflect_pad(&texture_tensor(&img.texture), t, b, l, r),
        ));
        for row in (0..h / ROAD_CELL).map(|k| k * ROAD_CELL) {
            for col in (0..w / ROAD_CELL).map(|k| k * ROAD_CELL) {
                let first = img.mask.get(row, col);
                let uniform = (row..row + ROAD_CELL)
                    .all(|y| (col..col + ROAD_CELL).all(|x| img.mask.get(y, x) == first));
                if uniform {
                    samples.push(RoadSample {
                        image: i,
                        row,
                        col,
                        label: if first { POSITIVE } else { NEGATIVE },
                    });
                }
            }
        }
    }
    if max_samples > 0 && samples.len() > max_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, samples.len(), max_samples).into_vec();
        idx.sort_unstable();
        samples = idx.into_iter().map(|i| samples[i]).collect();
    }
    Ok(RoadSampleSet {
        patch,
        padded,
        samples,
    })
}

const SAMPLE_MAGIC: &[u8; 8] = b"DTEXSMP\0";
const SAMPLE_VERSION: u32 = 1;

pub fn save_ground_samples(path: impl AsRef<Path>, samples: &[GroundSample]) -> Result<()> {
    let path = path.as_ref();
    let mut w = ByteWriter::new();
    w.bytes(SAMPLE_MAGIC);
    w.u32(SAMPLE_VERSION);
    w.len_u32(samples.len());
    let shape = samples.first().map_or(Shape::new(1, 0, 0), |s| s.patch.shape());
    for d in [shape.channels, shape.height, shape.width] {
        w.len_u32(d);
    }
    for s in samples {
        if s.patch.shape() != shape {
            return Err(Error::Shape("samples have differing patch shapes".into()));
        }
        w.len_u32(s.image);
        w.len_u32(s.region);
        w.u8(s.label as u8);
        w.f32s(s.patch.data());
    }
    std::fs::write(path, w.finish()).map_err(|e| Error::io(path, e))
}

pub fn load_ground_samples(path: impl AsRef<Path>) -> Result<Vec<GroundSample>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = ByteReader::new(&bytes);
    r.expect(SAMPLE_MAGIC)?;
    if r.u32()? != SAMPLE_VERSION {
        return Err(Error::Parse("unsupported sample cache version".into()));
    }
    let n = r.usize()?;
    let shape = Shape::new(r.usize()?, r.usize()?, r.usize()?);
    let mut out = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let image = r.usize()?;
        let region = r.usize()?;
        let label = r.u8()? as usize;
        let patch = Tensor::from_vec(shape, r.f32s(shape.len())?)?;
        out.push(GroundSample {
            patch,
            label,
            image,
            region,
        });
    }
    r.finish()?;
    Ok(out)
}
