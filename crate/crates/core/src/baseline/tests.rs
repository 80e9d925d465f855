use proptest::prelude::*;

use super::*;
use crate::imaging::{named_scene, synth_scene, CameraModel, Plane, PlaneSceneSpec, Rect, SceneName};

fn flat(w: usize, h: usize) -> (DisparityMap, CameraModel) {
    let cam = CameraModel::kitti_like(w, h);
    let spec = PlaneSceneSpec::new(w, h).with_plane(
        Plane::HorizontalGround { height_m: cam.camera_height_m },
        Rect::new(h / 3 + 2, 0, h - h / 3 - 2, w),
    );
    (synth_scene(&spec, &cam).unwrap().disparity, cam)
}

#[test]
fn single_pixel_histogram() {
    let mut d = DisparityMap::invalid(4, 3);
    d.set(1, 2, Some(10.0));
    let h = v_disparity(&d, 20, 1.0).unwrap();
    assert_eq!(h.total(), 1);
    assert_eq!(h.count(1, 10), 1);
}

#[test]
fn out_of_range_clamps_to_last_bin() {
    let mut d = DisparityMap::invalid(2, 1);
    d.set(0, 0, Some(99.0));
    let h = v_disparity(&d, 5, 1.0).unwrap();
    assert_eq!(h.count(0, 4), 1);
}

#[test]
fn all_invalid_gives_zero_histogram_and_fit_error() {
    let h = v_disparity(&DisparityMap::invalid(5, 5), 8, 1.0).unwrap();
    assert!(h.counts.iter().all(|&c| c == 0));
    assert!(matches!(fit_ground_line(&h), Err(Error::Empty(_))));
}

#[test]
fn single_row_is_degenerate() {
    let mut d = DisparityMap::invalid(6, 4);
    for c in 0..6 {
        d.set(2, c, Some(5.0 + c as f32));
    }
    let h = v_disparity(&d, 16, 1.0).unwrap();
    assert!(matches!(fit_ground_line(&h), Err(Error::DegenerateFit(_))));
}

#[test]
fn flat_ground_slope_matches_baseline_over_height() {
    let (d, cam) = flat(1242, 375);
    let h = v_disparity(&d, bins_for(&d, 1.0), 1.0).unwrap();
    let g = fit_ground_line(&h).unwrap();
    let want = cam.baseline_m / cam.camera_height_m;
    assert!(((g.alpha - want) / want).abs() < 0.01, "{} vs {want}", g.alpha);
    // Flat ground: every pixel recovered even at half a pixel.
    let m = classify_by_profile(&d, &g, 0.5);
    assert!(m.count_positive() as f64 >= 0.99 * d.valid_count() as f64);
    let m = classify_by_profile(&d, &g, 1.0);
    assert_eq!(m.count_positive(), d.valid_count());
}

#[test]
fn frontal_obstacle_does_not_move_slope() {
    let (w, h) = (1242, 375);
    let (clean, cam) = flat(w, h);
    let alpha0 = fit_ground_line(&v_disparity(&clean, bins_for(&clean, 1.0), 1.0).unwrap()).unwrap().alpha;
    let spec = PlaneSceneSpec::new(w, h)
        .with_plane(
            Plane::HorizontalGround { height_m: cam.camera_height_m },
            Rect::new(h / 3 + 2, 0, h - h / 3 - 2, w),
        )
        .with_plane(Plane::FrontalObstacle { depth_m: 12.0 }, Rect::new(60, 300, 200, 600));
    let scene = synth_scene(&spec, &cam).unwrap();
    let obstacle = scene.plane_index.iter().filter(|p| **p == Some(1)).count();
    assert!(obstacle as f64 >= 0.2 * scene.disparity.valid_count() as f64);
    let g = fit_ground_line(&v_disparity(&scene.disparity, bins_for(&scene.disparity, 1.0), 1.0).unwrap()).unwrap();
    assert!(((g.alpha - alpha0) / alpha0).abs() < 0.02);
    // Obstacle pixels are ground only near the rows where the line meets
    // the obstacle's disparity.
    let m = classify_by_profile(&scene.disparity, &g, 1.0);
    let d_obs = cam.disparity_at_depth(12.0);
    for row in 60..260 {
        let e = g.expected(row).unwrap_or(f64::NAN);
        let near = (d_obs - e).abs() <= 1.0;
        for col in (300..900).step_by(50) {
            if m.get(row, col) {
                assert!(near, "row {row}");
            }
        }
    }
}

fn pixel_accuracy(pred: &Mask, truth: &Mask) -> f64 {
    let agree = pred.data().iter().zip(truth.data()).filter(|(a, b)| a == b).count();
    agree as f64 / truth.data().len() as f64
}

#[test]
fn lateral_slope_residual_grows_off_centre() {
    let cam = CameraModel::kitti_like(1242, 375);
    let roll = 8.0f64;
    let scene = synth_scene(&named_scene(SceneName::LateralSlope, 1242, 375, &cam).unwrap(), &cam).unwrap();
    // Best possible single line: exact along the principal column.
    let alpha = cam.flat_ground_slope() * roll.to_radians().cos();
    let g = GroundProfile {
        alpha,
        beta: -alpha * cam.horizon_row_v0,
        first_row: 0,
        last_row: 374,
    };
    let m = classify_by_profile(&scene.disparity, &g, 1.0);
    let hits = |cols: std::ops::Range<usize>| {
        let (mut hit, mut total) = (0, 0);
        for row in 0..375 {
            for col in cols.clone() {
                if scene.mask.get(row, col) {
                    total += 1;
                    hit += m.get(row, col) as usize;
                }
            }
        }
        hit as f64 / total as f64
    };
    assert!(hits(611..631) > 0.99);
    assert!(hits(0..150) < 0.01);
    assert!(hits(1092..1242) < 0.01);
}

#[test]
fn flat_scene_detection_is_accurate() {
    let cam = CameraModel::kitti_like(1242, 375);
    let scene = synth_scene(&named_scene(SceneName::FlatGround, 1242, 375, &cam).unwrap(), &cam).unwrap();
    let (m, g) = detect_ground_vdisparity(&scene.disparity, &BaselineParams::default()).unwrap();
    assert!(((g.alpha - cam.flat_ground_slope()) / cam.flat_ground_slope()).abs() < 0.01);
    assert!(pixel_accuracy(&m, &scene.mask) >= 0.99);
}

#[test]
fn pgm_export() {
    let (d, _) = flat(200, 90);
    let h = v_disparity(&d, bins_for(&d, 1.0), 1.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("v.pgm");
    h.save_pgm(&p).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    let header = format!("P5\n{} 90\n255\n", h.bins);
    assert!(bytes.starts_with(header.as_bytes()));
    assert_eq!(bytes.len(), header.len() + h.bins * 90);
}

proptest! {
    #[test]
    fn histogram_conserves_mass(values in proptest::collection::vec(proptest::option::of(0.0f32..80.0), 48), bw in 0.5f64..3.0) {
        let data = values.iter().map(|v| v.unwrap_or(f32::NAN)).collect();
        let d = DisparityMap::new(8, 6, data).unwrap();
        let h = v_disparity(&d, 20, bw).unwrap();
        prop_assert_eq!(h.total(), d.valid_count() as u64);
    }
}
