use image::{Rgb, RgbImage};

use super::{ensure_same_dims, Mask};
use crate::error::{Error, Result};

/// Alpha-blends `color` into every masked pixel; unmasked pixels are copied.
pub fn render_overlay(image: &RgbImage, mask: &Mask, color: [u8; 3], alpha: f32) -> Result<RgbImage> {
    ensure_same_dims(
        (image.width() as usize, image.height() as usize),
        mask.dims(),
    )?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let mut out = image.clone();
    for (x, y, px) in out.enumerate_pixels_mut() {
        if mask.get(y as usize, x as usize) {
            for (ch, &c) in px.0.iter_mut().zip(color.iter()) {
                let blended = (1.0 - alpha) * *ch as f32 + alpha * c as f32;
                *ch = blended.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(out)
}

/// Paints pixels whose right or lower neighbour carries a different label.
pub fn render_boundaries(
    image: &RgbImage,
    labels: &[u32],
    color: [u8; 3],
) -> Result<RgbImage> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if labels.len() != w * h {
        return Err(Error::InvalidParameter(format!(
            "label grid length {} does not match {w}x{h}",
            labels.len()
        )));
    }
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            let edge = (x + 1 < w && labels[y * w + x + 1] != l)
                || (y + 1 < h && labels[(y + 1) * w + x] != l);
            if edge {
                out.put_pixel(x as u32, y as u32, Rgb(color));
            }
        }
    }
    Ok(out)
}
