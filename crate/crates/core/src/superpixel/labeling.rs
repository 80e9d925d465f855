use std::path::Path;

use image::{ImageBuffer, Luma, RgbImage};

use crate::error::{Error, Result};
use crate::imaging::{ensure_same_dims, render_boundaries, Mask};

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub pixel_count: usize,
    /// Mean (row, col) of member pixels.
    pub centroid: (f64, f64),
    /// Mean 8-bit RGB of member pixels; zero when built without an image.
    pub mean_color: [f64; 3],
}

/// Integer patch center of a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionCenter {
    pub region: usize,
    pub row: usize,
    pub col: usize,
}

/// Dense region ids `0..R` over an image grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelLabeling {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    regions: Vec<Region>,
}

impl SuperpixelLabeling {
    /// Builds a labeling from raw ids. Ids must be dense: every id in
    /// `0..=max` occurs.
    pub fn new(width: usize, height: usize, labels: Vec<u32>, image: Option<&RgbImage>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "label grid length {} does not match {width}x{height}",
                labels.len()
            )));
        }
        if let Some(img) = image {
            ensure_same_dims((width, height), (img.width() as usize, img.height() as usize))?;
        }
        let count = *labels.iter().max().expect("non-empty") as usize + 1;
        let mut acc = vec![[0.0f64; 6]; count];
        let mut sizes = vec![0usize; count];
        for (i, &l) in labels.iter().enumerate() {
            let a = &mut acc[l as usize];
            a[0] += (i / width) as f64;
            a[1] += (i % width) as f64;
            if let Some(img) = image {
                let px = img.get_pixel((i % width) as u32, (i / width) as u32).0;
                a[2] += px[0] as f64;
                a[3] += px[1] as f64;
                a[4] += px[2] as f64;
            }
            sizes[l as usize] += 1;
        }
        if let Some(missing) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidParameter(format!(
                "region ids are not dense: id {missing} is unused"
            )));
        }
        let regions = acc
            .iter()
            .zip(&sizes)
            .map(|(a, &s)| {
                let n = s as f64;
                Region {
                    pixel_count: s,
                    centroid: (a[0] / n, a[1] / n),
                    mean_color: [a[2] / n, a[3] / n, a[4] / n],
                }
            })
            .collect();
        Ok(Self {
            width,
            height,
            labels,
            regions,
        })
    }

    pub(crate) fn from_labels(img: &RgbImage, labels: Vec<u32>) -> Result<Self> {
        Self::new(img.width() as usize, img.height() as usize, labels, Some(img))
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

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, row: usize, col: usize) -> usize {
        self.labels[row * self.width + col] as usize
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    /// One center per region: the centroid rounded half-up.
    pub fn region_patch_centers(&self) -> Vec<RegionCenter> {
        self.regions
            .iter()
            .enumerate()
            .map(|(region, r)| RegionCenter {
                region,
                row: (r.centroid.0 + 0.5).floor() as usize,
                col: (r.centroid.1 + 0.5).floor() as usize,
            })
            .collect()
    }

    /// Paints each pixel with its region's class.
    pub fn project_region_classes(&self, classes: &[bool]) -> Result<Mask> {
        if classes.len() < self.regions.len() {
            return Err(Error::MissingRegion(classes.len()));
        }
        let data = self.labels.iter().map(|&l| classes[l as usize]).collect();
        Mask::new(self.width, self.height, data)
    }

    /// Strict per-region majority of `mask`; ties are negative.
    pub fn region_majority(&self, mask: &Mask) -> Result<Vec<bool>> {
        ensure_same_dims(self.dims(), mask.dims())?;
        let mut positive = vec![0usize; self.regions.len()];
        for (&l, &m) in self.labels.iter().zip(mask.data()) {
            if m {
                positive[l as usize] += 1;
            }
        }
        Ok(positive
            .iter()
            .zip(&self.regions)
            .map(|(&p, r)| 2 * p > r.pixel_count)
            .collect())
    }

    /// Saves region ids as a single-channel 16-bit PNG.
    pub fn save_png16(&self, path: impl AsRef<Path>) -> Result<()> {
        if self.regions.len() > u16::MAX as usize + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} regions do not fit in 16 bits",
                self.regions.len()
            )));
        }
        let raw = self.labels.iter().map(|&l| l as u16).collect();
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, raw).expect("dims match");
        buf.save(path.as_ref())?;
        Ok(())
    }

    /// `image` with region boundaries drawn in `color`.
    pub fn boundary_overlay(&self, image: &RgbImage, color: [u8; 3]) -> Result<RgbImage> {
        ensure_same_dims(self.dims(), (image.width() as usize, image.height() as usize))?;
        render_boundaries(image, &self.labels, color)
    }
}
