use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, RgbImage};

use super::{DisparityMap, Mask};
use crate::error::{Error, Result};

/// On-disk disparity encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisparityFormat {
    /// Single-channel 16-bit PNG, disparity = value / 256, 0 = invalid.
    KittiPng16,
    /// Grayscale portable float map; values <= 0 are invalid.
    Pfm,
}

impl DisparityFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "png" => Some(Self::KittiPng16),
            "pfm" => Some(Self::Pfm),
            _ => None,
        }
    }
}

const KITTI_SCALE: f32 = 256.0;

pub fn load_disparity(path: impl AsRef<Path>, format: DisparityFormat) -> Result<DisparityMap> {
    let path = path.as_ref();
    match format {
        DisparityFormat::KittiPng16 => {
            let img = image::open(path)?;
            let DynamicImage::ImageLuma16(buf) = img else {
                return Err(Error::Parse(format!(
                    "{}: expected a single-channel 16-bit PNG, found {:?}",
                    path.display(),
                    img.color()
                )));
            };
            let (w, h) = buf.dimensions();
            let data = buf
                .into_raw()
                .into_iter()
                .map(|v| {
                    if v == 0 {
                        DisparityMap::INVALID
                    } else {
                        v as f32 / KITTI_SCALE
                    }
                })
                .collect();
            DisparityMap::new(w as usize, h as usize, data)
        }
        DisparityFormat::Pfm => {
            let pfm = read_pfm(path)?;
            if pfm.channels != 1 {
                return Err(Error::Parse(format!(
                    "{}: expected a grayscale (Pf) map",
                    path.display()
                )));
            }
            let data = pfm
                .data
                .into_iter()
                .map(|v| if v.is_finite() && v > 0.0 { v } else { DisparityMap::INVALID })
                .collect();
            DisparityMap::new(pfm.width, pfm.height, data)
        }
    }
}

pub fn save_disparity(
    path: impl AsRef<Path>,
    map: &DisparityMap,
    format: DisparityFormat,
) -> Result<()> {
    let path = path.as_ref();
    match format {
        DisparityFormat::KittiPng16 => {
            let max = u16::MAX as f32 / KITTI_SCALE;
            let mut raw = Vec::with_capacity(map.data().len());
            for &d in map.data() {
                if d.is_nan() {
                    raw.push(0u16);
                } else if d > max {
                    return Err(Error::InvalidParameter(format!(
                        "disparity {d} exceeds the 16-bit fixed-point range ({max})"
                    )));
                } else {
                    // Valid values never quantize to the invalid code.
                    raw.push(((d * KITTI_SCALE).round() as u16).max(1));
                }
            }
            let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
                ImageBuffer::from_raw(map.width() as u32, map.height() as u32, raw)
                    .expect("buffer length matches dimensions");
            buf.save(path)?;
            Ok(())
        }
        DisparityFormat::Pfm => {
            let data = map
                .data()
                .iter()
                .map(|&d| if d.is_nan() { 0.0 } else { d })
                .collect::<Vec<_>>();
            write_pfm(path, map.width(), map.height(), &data)
        }
    }
}

/// Decoded portable float map, rows top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<PfmImage> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let parse_err = |msg: &str| Error::Parse(format!("{}: {msg}", path.display()));

    let mut tokens = Vec::new();
    // Header is three whitespace-separated fields after the magic, terminated
    // by a single whitespace byte before the raster.
    while tokens.len() < 4 {
        let mut line = String::new();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Err(parse_err("truncated header"));
        }
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    if tokens.len() != 4 {
        return Err(parse_err("malformed header"));
    }
    let channels = match tokens[0].as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(parse_err(&format!("bad magic {other:?}"))),
    };
    let width: usize = tokens[1].parse().map_err(|_| parse_err("bad width"))?;
    let height: usize = tokens[2].parse().map_err(|_| parse_err("bad height"))?;
    let scale: f32 = tokens[3].parse().map_err(|_| parse_err("bad scale"))?;
    if width == 0 || height == 0 || scale == 0.0 || !scale.is_finite() {
        return Err(parse_err("invalid dimensions or scale"));
    }
    let little_endian = scale < 0.0;

    let count = width * height * channels;
    let mut bytes = vec![0u8; count * 4];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| parse_err("raster shorter than header dimensions"))?;
    let mut trailing = [0u8; 1];
    if reader.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(parse_err("raster longer than header dimensions"));
    }

    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| {
            let b = [c[0], c[1], c[2], c[3]];
            if little_endian {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();

    // PFM stores the bottom row first.
    let row_len = width * channels;
    let data = values
        .chunks_exact(row_len)
        .rev()
        .flatten()
        .copied()
        .collect();
    Ok(PfmImage {
        width,
        height,
        channels,
        data,
    })
}

/// Writes a grayscale little-endian PFM from top-to-bottom row-major data.
pub fn write_pfm(path: impl AsRef<Path>, width: usize, height: usize, data: &[f32]) -> Result<()> {
    let path = path.as_ref();
    if data.len() != width * height {
        return Err(Error::InvalidParameter(format!(
            "pfm data length {} does not match {width}x{height}",
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(32 + data.len() * 4);
    write!(out, "Pf\n{width} {height}\n-1.0\n").expect("write to vec");
    for row in data.chunks_exact(width).rev() {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads an 8-bit mask; values above 127 are the positive class.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let img = image::open(path.as_ref())?.to_luma8();
    let (w, h) = img.dimensions();
    Mask::new(
        w as usize,
        h as usize,
        img.into_raw().into_iter().map(|v| v > 127).collect(),
    )
}

/// Saves a mask as 8-bit PNG: 0 = negative, 255 = positive.
pub fn save_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    let raw = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let img = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .expect("buffer length matches dimensions");
    img.save(path.as_ref())?;
    Ok(())
}

pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    Ok(image::open(path.as_ref())?.to_rgb8())
}

pub fn save_rgb(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    img.save(path.as_ref())?;
    Ok(())
}
