//! Closed-form disparity for planar scenes.
//!
//! A plane with unit normal `n` (camera frame: x right, y down, z forward)
//! at perpendicular distance `dist` from the left camera center has
//! disparity `B / dist * (n.x (u - u0) + n.y (v - v0) + n.z f)` at pixel
//! `(u, v)`. Every plane kind below is a choice of `n` and `dist`.

use std::str::FromStr;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{CameraModel, DisparityMap, Mask};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlaneKind {
    HorizontalGround,
    LateralSlopeGround,
    LongitudinalSlopeGround,
    FrontalObstacle,
    LeftLateralObstacle,
    RightLateralObstacle,
}

impl PlaneKind {
    pub fn is_ground(self) -> bool {
        matches!(
            self,
            PlaneKind::HorizontalGround
                | PlaneKind::LateralSlopeGround
                | PlaneKind::LongitudinalSlopeGround
        )
    }
}

/// Geometry of one plane. Angles are in degrees, distances in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Plane {
    /// Level ground `height_m` below the camera.
    HorizontalGround { height_m: f64 },
    /// Ground rolled about the optical axis; positive roll brings the right
    /// side closer to the camera.
    LateralSlopeGround { roll_deg: f64, height_m: f64 },
    /// Ground pitched about the x axis; positive pitch rises ahead (uphill).
    LongitudinalSlopeGround { pitch_deg: f64, height_m: f64 },
    /// Fronto-parallel surface at depth `depth_m`.
    FrontalObstacle { depth_m: f64 },
    /// Vertical wall parallel to the optical axis, `offset_m` to the left.
    LeftLateralObstacle { offset_m: f64 },
    /// Vertical wall parallel to the optical axis, `offset_m` to the right.
    RightLateralObstacle { offset_m: f64 },
}

impl Plane {
    pub fn kind(&self) -> PlaneKind {
        match self {
            Plane::HorizontalGround { .. } => PlaneKind::HorizontalGround,
            Plane::LateralSlopeGround { .. } => PlaneKind::LateralSlopeGround,
            Plane::LongitudinalSlopeGround { .. } => PlaneKind::LongitudinalSlopeGround,
            Plane::FrontalObstacle { .. } => PlaneKind::FrontalObstacle,
            Plane::LeftLateralObstacle { .. } => PlaneKind::LeftLateralObstacle,
            Plane::RightLateralObstacle { .. } => PlaneKind::RightLateralObstacle,
        }
    }

    fn validate(&self) -> Result<()> {
        let (dist, angle) = match *self {
            Plane::HorizontalGround { height_m } => (height_m, 0.0),
            Plane::LateralSlopeGround { roll_deg, height_m } => (height_m, roll_deg),
            Plane::LongitudinalSlopeGround { pitch_deg, height_m } => (height_m, pitch_deg),
            Plane::FrontalObstacle { depth_m } => (depth_m, 0.0),
            Plane::LeftLateralObstacle { offset_m } | Plane::RightLateralObstacle { offset_m } => {
                (offset_m, 0.0)
            }
        };
        if !(dist.is_finite() && dist > 0.0) {
            return Err(Error::InvalidScene(format!("{self:?}: distance must be positive")));
        }
        if !(angle.is_finite() && angle.abs() < 45.0) {
            return Err(Error::InvalidScene(format!("{self:?}: slope must be within ±45°")));
        }
        Ok(())
    }

    /// Unit normal and perpendicular distance to the camera center.
    fn normal_and_distance(&self) -> ([f64; 3], f64) {
        match *self {
            Plane::HorizontalGround { height_m } => ([0.0, 1.0, 0.0], height_m),
            Plane::LateralSlopeGround { roll_deg, height_m } => {
                let r = roll_deg.to_radians();
                ([r.sin(), r.cos(), 0.0], height_m)
            }
            Plane::LongitudinalSlopeGround { pitch_deg, height_m } => {
                let p = pitch_deg.to_radians();
                ([0.0, p.cos(), p.sin()], height_m)
            }
            Plane::FrontalObstacle { depth_m } => ([0.0, 0.0, 1.0], depth_m),
            Plane::LeftLateralObstacle { offset_m } => ([-1.0, 0.0, 0.0], offset_m),
            Plane::RightLateralObstacle { offset_m } => ([1.0, 0.0, 0.0], offset_m),
        }
    }

    /// Disparity at pixel (row, col); may be negative where the plane lies
    /// behind the camera.
    pub fn disparity(&self, cam: &CameraModel, row: f64, col: f64) -> f64 {
        let (n, dist) = self.normal_and_distance();
        cam.baseline_m / dist
            * (n[0] * (col - cam.principal_col_u0)
                + n[1] * (row - cam.horizon_row_v0)
                + n[2] * cam.focal_length_px)
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn new(top: usize, left: usize, height: usize, width: usize) -> Self {
        Self {
            top,
            left,
            height,
            width,
        }
    }

    pub fn bottom(&self) -> usize {
        self.top + self.height
    }

    pub fn right(&self) -> usize {
        self.left + self.width
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.top..self.bottom()).contains(&row) && (self.left..self.right()).contains(&col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneEntry {
    pub plane: Plane,
    pub footprint: Rect,
}

impl PlaneEntry {
    pub fn new(plane: Plane, footprint: Rect) -> Self {
        Self { plane, footprint }
    }
}

/// Planes painted in order; later entries overwrite earlier ones.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSceneSpec {
    pub width: usize,
    pub height: usize,
    pub planes: Vec<PlaneEntry>,
}

impl PlaneSceneSpec {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            planes: Vec::new(),
        }
    }

    pub fn with_plane(mut self, plane: Plane, footprint: Rect) -> Self {
        self.planes.push(PlaneEntry::new(plane, footprint));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidScene("image dimensions must be positive".into()));
        }
        for (i, entry) in self.planes.iter().enumerate() {
            entry.plane.validate()?;
            let fp = entry.footprint;
            if fp.width == 0 || fp.height == 0 {
                return Err(Error::InvalidScene(format!("plane {i}: empty footprint")));
            }
            if fp.right() > self.width || fp.bottom() > self.height {
                return Err(Error::InvalidScene(format!(
                    "plane {i}: footprint {fp:?} exceeds {}x{} image",
                    self.width, self.height
                )));
            }
        }
        Ok(())
    }
}

/// Output of [`synth_scene`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub disparity: DisparityMap,
    /// Ground kinds positive, obstacles and empty space negative.
    pub mask: Mask,
    /// Index into the [`PlaneSceneSpec`] plane list of the entry visible at each pixel.
    pub plane_index: Vec<Option<usize>>,
    /// Flat-shaded color rendering with mild deterministic texture, suitable
    /// as the left image for superpixel segmentation.
    pub rgb: RgbImage,
}

impl SyntheticScene {
    pub fn width(&self) -> usize {
        self.disparity.width()
    }

    pub fn height(&self) -> usize {
        self.disparity.height()
    }

    pub fn plane_at(&self, row: usize, col: usize) -> Option<usize> {
        self.plane_index[row * self.width() + col]
    }

    /// Pixels whose neighbourhood `[row ± row_reach] x [col ± col_reach]`
    /// lies inside the image, on a single plane, with valid disparity.
    pub fn interior(&self, row_reach: usize, col_reach: usize) -> Vec<bool> {
        let (w, h) = (self.width(), self.height());
        let mut out = vec![false; w * h];
        for row in row_reach..h.saturating_sub(row_reach) {
            'px: for col in col_reach..w.saturating_sub(col_reach) {
                let Some(id) = self.plane_at(row, col) else {
                    continue;
                };
                for r in row - row_reach..=row + row_reach {
                    for c in col - col_reach..=col + col_reach {
                        if self.plane_at(r, c) != Some(id) || !self.disparity.is_valid(r, c) {
                            continue 'px;
                        }
                    }
                }
                out[row * w + col] = true;
            }
        }
        out
    }
}

const SKY_RGB: [u8; 3] = [135, 180, 230];
const OBSTACLE_PALETTE: [[u8; 3]; 6] = [
    [170, 60, 50],
    [60, 110, 170],
    [190, 160, 60],
    [80, 150, 80],
    [150, 80, 160],
    [205, 120, 60],
];

fn plane_color(kind: PlaneKind, index: usize) -> [u8; 3] {
    match kind {
        PlaneKind::HorizontalGround => [110, 110, 115],
        PlaneKind::LateralSlopeGround => [128, 118, 104],
        PlaneKind::LongitudinalSlopeGround => [98, 112, 100],
        _ => OBSTACLE_PALETTE[index % OBSTACLE_PALETTE.len()],
    }
}

/// Small deterministic per-pixel jitter in [-6, 6].
fn texture_jitter(row: usize, col: usize) -> i32 {
    let mut x = (row as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (col as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    x ^= x >> 31;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 29;
    (x % 13) as i32 - 6
}

/// Rasterizes the planes of `spec` into disparity, ground mask and color.
///
/// Zero disparity (points at infinity) is stored as invalid. Negative
/// disparity anywhere inside a footprint rejects the scene.
pub fn synth_scene(spec: &PlaneSceneSpec, cam: &CameraModel) -> Result<SyntheticScene> {
    spec.validate()?;
    cam.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut disparity = DisparityMap::invalid(w, h);
    let mut plane_index = vec![None; w * h];

    for (i, entry) in spec.planes.iter().enumerate() {
        let fp = entry.footprint;
        for row in fp.top..fp.bottom() {
            for col in fp.left..fp.right() {
                let d = entry.plane.disparity(cam, row as f64, col as f64);
                if d < 0.0 {
                    return Err(Error::InvalidScene(format!(
                        "plane {i} ({:?}) has negative disparity {d:.3} at row {row}, col {col}",
                        entry.plane.kind()
                    )));
                }
                let d = d as f32;
                disparity.set(row, col, (d > 0.0).then_some(d));
                plane_index[row * w + col] = Some(i);
            }
        }
    }

    let mask = Mask::new(
        w,
        h,
        plane_index
            .iter()
            .map(|p| p.is_some_and(|i| spec.planes[i].plane.kind().is_ground()))
            .collect(),
    )?;

    let rgb = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let (row, col) = (y as usize, x as usize);
        let base = match plane_index[row * w + col] {
            Some(i) => plane_color(spec.planes[i].plane.kind(), i),
            None => SKY_RGB,
        };
        let j = texture_jitter(row, col);
        Rgb(base.map(|c| (c as i32 + j).clamp(0, 255) as u8))
    });

    Ok(SyntheticScene {
        disparity,
        mask,
        plane_index,
        rgb,
    })
}

/// Adds i.i.d. Gaussian noise to every valid pixel; results <= 0 become
/// invalid.
pub fn add_gaussian_noise(map: &DisparityMap, sigma: f64, seed: u64) -> Result<DisparityMap> {
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidParameter(format!("noise sigma {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = map
        .data()
        .iter()
        .map(|&d| {
            if d.is_nan() {
                return d;
            }
            let noisy = (d as f64 + normal.sample(&mut rng)) as f32;
            if noisy > 0.0 {
                noisy
            } else {
                DisparityMap::INVALID
            }
        })
        .collect();
    DisparityMap::new(map.width(), map.height(), data)
}

/// Built-in scenes exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneName {
    SixPlanes,
    FlatGround,
    LateralSlope,
    LongitudinalSlope,
}

impl SceneName {
    pub const ALL: [SceneName; 4] = [
        SceneName::SixPlanes,
        SceneName::FlatGround,
        SceneName::LateralSlope,
        SceneName::LongitudinalSlope,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SceneName::SixPlanes => "six-planes",
            SceneName::FlatGround => "flat-ground",
            SceneName::LateralSlope => "lateral-slope",
            SceneName::LongitudinalSlope => "longitudinal-slope",
        }
    }
}

impl FromStr for SceneName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SceneName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidScene(format!(
                    "unknown scene {s:?}; expected one of six-planes, flat-ground, \
                     lateral-slope, longitudinal-slope"
                ))
            })
    }
}

/// Minimum disparity at the far edge of generated ground footprints.
const GROUND_MIN_DISPARITY: f64 = 0.5;

/// Footprint covering columns `[left, right)` from the first row where the
/// ground disparity reaches [`GROUND_MIN_DISPARITY`] in every column down to
/// the bottom of the image.
fn ground_footprint(
    plane: &Plane,
    cam: &CameraModel,
    left: usize,
    right: usize,
    image_height: usize,
) -> Result<Rect> {
    let top = (0..image_height).find(|&row| {
        (left..right).all(|col| plane.disparity(cam, row as f64, col as f64) >= GROUND_MIN_DISPARITY)
    });
    match top {
        Some(top) => Ok(Rect::new(top, left, image_height - top, right - left)),
        None => Err(Error::InvalidScene(format!(
            "{plane:?} is not visible in columns {left}..{right}"
        ))),
    }
}

/// First row at which `ground` reaches disparity `d` in column `col`.
fn contact_row(ground: &Plane, cam: &CameraModel, col: usize, d: f64, image_height: usize) -> usize {
    (0..image_height)
        .find(|&row| ground.disparity(cam, row as f64, col as f64) >= d)
        .unwrap_or(image_height)
}

/// Fronto-parallel box standing on `ground`, centered on `center_col`.
fn standing_box(
    ground: &Plane,
    cam: &CameraModel,
    depth_m: f64,
    center_col: usize,
    box_width: usize,
    box_height: usize,
    image: (usize, usize),
) -> Result<PlaneEntry> {
    let (w, h) = image;
    let d = cam.disparity_at_depth(depth_m);
    let bottom = contact_row(ground, cam, center_col, d, h).max(1);
    let top = bottom.saturating_sub(box_height);
    let left = center_col.saturating_sub(box_width / 2);
    let right = (left + box_width).min(w);
    if right <= left || bottom <= top {
        return Err(Error::InvalidScene("obstacle footprint is empty".into()));
    }
    Ok(PlaneEntry::new(
        Plane::FrontalObstacle { depth_m },
        Rect::new(top, left, bottom - top, right - left),
    ))
}

/// The six plane types side by side: three ground bands (level, rolled,
/// pitched) with a frontal box and two lateral walls painted over them.
fn six_planes(width: usize, height: usize, cam: &CameraModel) -> Result<PlaneSceneSpec> {
    let h_m = cam.camera_height_m;
    let (c1, c2) = (width / 3, 2 * width / 3);
    let flat = Plane::HorizontalGround { height_m: h_m };
    let rolled = Plane::LateralSlopeGround {
        roll_deg: 6.0,
        height_m: h_m,
    };
    let pitched = Plane::LongitudinalSlopeGround {
        pitch_deg: 3.0,
        height_m: h_m,
    };
    let mut spec = PlaneSceneSpec::new(width, height);
    spec.planes.push(PlaneEntry::new(flat, ground_footprint(&flat, cam, 0, c1, height)?));
    spec.planes.push(PlaneEntry::new(rolled, ground_footprint(&rolled, cam, c1, c2, height)?));
    spec.planes.push(PlaneEntry::new(pitched, ground_footprint(&pitched, cam, c2, width, height)?));

    spec.planes.push(standing_box(
        &rolled,
        cam,
        18.9,
        width / 2,
        (width / 8).max(4),
        (height / 6).max(4),
        (width, height),
    )?);

    let v0 = cam.horizon_row_v0.max(0.0) as usize;
    let wall_top = v0.saturating_sub(height / 6);
    let wall_bottom = (v0 + height / 3).min(height);
    let wall_w = (width / 10).max(4);
    spec.planes.push(PlaneEntry::new(
        Plane::LeftLateralObstacle { offset_m: 3.0 },
        Rect::new(wall_top, 0, wall_bottom - wall_top, wall_w),
    ));
    spec.planes.push(PlaneEntry::new(
        Plane::RightLateralObstacle { offset_m: 3.0 },
        Rect::new(wall_top, width - wall_w, wall_bottom - wall_top, wall_w),
    ));
    Ok(spec)
}

/// A single ground plane across the full width with one frontal box.
fn single_ground(ground: Plane, width: usize, height: usize, cam: &CameraModel) -> Result<PlaneSceneSpec> {
    let mut spec = PlaneSceneSpec::new(width, height);
    spec.planes.push(PlaneEntry::new(ground, ground_footprint(&ground, cam, 0, width, height)?));
    spec.planes.push(standing_box(
        &ground,
        cam,
        18.9,
        width / 2,
        (width / 10).max(4),
        (height / 8).max(4),
        (width, height),
    )?);
    Ok(spec)
}

pub fn named_scene(
    name: SceneName,
    width: usize,
    height: usize,
    cam: &CameraModel,
) -> Result<PlaneSceneSpec> {
    cam.validate()?;
    let h_m = cam.camera_height_m;
    match name {
        SceneName::SixPlanes => six_planes(width, height, cam),
        SceneName::FlatGround => single_ground(Plane::HorizontalGround { height_m: h_m }, width, height, cam),
        SceneName::LateralSlope => single_ground(
            Plane::LateralSlopeGround {
                roll_deg: 8.0,
                height_m: h_m,
            },
            width,
            height,
            cam,
        ),
        SceneName::LongitudinalSlope => single_ground(
            Plane::LongitudinalSlopeGround {
                pitch_deg: 4.0,
                height_m: h_m,
            },
            width,
            height,
            cam,
        ),
    }
}

fn random_ground(rng: &mut ChaCha8Rng, height_m: f64) -> Plane {
    let signed = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        let mag = rng.random_range(lo..hi);
        if rng.random_bool(0.5) {
            mag
        } else {
            -mag
        }
    };
    match rng.random_range(0..3) {
        0 => Plane::HorizontalGround { height_m },
        1 => Plane::LateralSlopeGround {
            roll_deg: signed(rng, 2.0, 10.0),
            height_m,
        },
        _ => Plane::LongitudinalSlopeGround {
            pitch_deg: signed(rng, 1.0, 4.0),
            height_m,
        },
    }
}

/// Seeded random scene: one or two ground planes, then one to four
/// obstacles (frontal boxes and lateral walls).
pub fn random_scene(seed: u64, width: usize, height: usize, cam: &CameraModel) -> Result<PlaneSceneSpec> {
    cam.validate()?;
    if width < 16 || height < 16 {
        return Err(Error::InvalidScene("random scenes need at least 16x16 pixels".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = PlaneSceneSpec::new(width, height);

    let h_m = rng.random_range(0.85..1.15) * cam.camera_height_m;
    let ground = random_ground(&mut rng, h_m);
    spec.planes.push(PlaneEntry::new(ground, ground_footprint(&ground, cam, 0, width, height)?));
    if rng.random_bool(0.3) {
        let second = random_ground(&mut rng, h_m);
        let split = rng.random_range(width / 3..2 * width / 3);
        let (left, right) = if rng.random_bool(0.5) { (0, split) } else { (split, width) };
        if let Ok(fp) = ground_footprint(&second, cam, left, right, height) {
            spec.planes.push(PlaneEntry::new(second, fp));
        }
    }

    let v0 = cam.horizon_row_v0.clamp(0.0, height as f64 - 1.0) as usize;
    let obstacles = rng.random_range(1..=4);
    for _ in 0..obstacles {
        match rng.random_range(0..4) {
            0 | 1 => {
                let box_w = rng.random_range(width / 12..=width / 4).max(4);
                let box_h = rng.random_range(height / 8..=height / 3).max(4);
                let col = rng.random_range(width / 8..width - width / 8);
                // contact row somewhere on the visible ground below the horizon
                let top_ground = spec.planes[0].footprint.top;
                let contact = rng.random_range((top_ground + (height - top_ground) / 6)..height);
                let d = ground.disparity(cam, contact as f64, col as f64);
                if d <= GROUND_MIN_DISPARITY {
                    continue;
                }
                let depth_m = cam.focal_length_px * cam.baseline_m / d;
                spec.planes.push(standing_box(
                    &ground,
                    cam,
                    depth_m,
                    col,
                    box_w,
                    box_h,
                    (width, height),
                )?);
            }
            side => {
                let wall_w = rng.random_range(width / 12..=width / 5).max(4);
                let top = rng.random_range(v0.saturating_sub(height / 4)..=v0);
                let bottom = rng.random_range((v0 + (height - v0) / 3)..=height).max(top + 4).min(height);
                let offset_m = rng.random_range(2.5..6.0);
                let (plane, left) = if side == 2 {
                    (Plane::LeftLateralObstacle { offset_m }, 0)
                } else {
                    (Plane::RightLateralObstacle { offset_m }, width - wall_w)
                };
                spec.planes.push(PlaneEntry::new(plane, Rect::new(top, left, bottom - top, wall_w)));
            }
        }
    }
    Ok(spec)
}
