use std::collections::VecDeque;

use dtex::imaging::{named_scene, synth_scene, CameraModel, SceneName};
use dtex::superpixel::{slic_segment, SlicParams, SuperpixelLabeling};
use image::{Rgb, RgbImage};
use proptest::prelude::*;

fn is_four_connected(lab: &SuperpixelLabeling, region: usize) -> bool {
    let (w, h) = lab.dims();
    let labels = lab.labels();
    let Some(start) = labels.iter().position(|&l| l as usize == region) else {
        return false;
    };
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut reached = 0;
    while let Some(i) = queue.pop_front() {
        reached += 1;
        let (r, c) = (i / w, i % w);
        let mut nbrs = Vec::new();
        if c > 0 {
            nbrs.push(i - 1);
        }
        if c + 1 < w {
            nbrs.push(i + 1);
        }
        if r > 0 {
            nbrs.push(i - w);
        }
        if r + 1 < h {
            nbrs.push(i + w);
        }
        for j in nbrs {
            if !seen[j] && labels[j] as usize == region {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    reached == lab.regions()[region].pixel_count
}

#[test]
fn uniform_image_gives_voronoi_grid() {
    let img = RgbImage::from_pixel(100, 100, Rgb([120, 90, 60]));
    let p = SlicParams {
        region_count: 25,
        compactness: 10.0,
        ..SlicParams::default()
    };
    let lab = slic_segment(&img, &p).unwrap();
    assert_eq!(lab.region_count(), 25);

    // the 5x5 seed lattice at cell centers
    let lattice: Vec<(f64, f64)> = (0..5)
        .flat_map(|i| (0..5).map(move |j| (10.0 + 20.0 * i as f64, 10.0 + 20.0 * j as f64)))
        .collect();
    for region in lab.regions() {
        assert!((340..=460).contains(&region.pixel_count), "{}", region.pixel_count);
        let nearest = lattice
            .iter()
            .map(|&(r, c)| (region.centroid.0 - r).abs().max((region.centroid.1 - c).abs()))
            .fold(f64::INFINITY, f64::min);
        assert!(nearest <= 1.0, "centroid {:?} off-grid by {nearest}", region.centroid);
    }

    let mut agree = 0;
    for row in 0..100 {
        for col in 0..100 {
            let owner = lab.label(row, col);
            let (cr, cc) = lab.regions()[owner].centroid;
            let d_own = (row as f64 - cr).hypot(col as f64 - cc);
            let d_min = lab
                .regions()
                .iter()
                .map(|r| (row as f64 - r.centroid.0).hypot(col as f64 - r.centroid.1))
                .fold(f64::INFINITY, f64::min);
            if d_own <= d_min + 1.0 {
                agree += 1;
            }
        }
    }
    assert!(agree >= 9_900, "only {agree} pixels agree with the Voronoi oracle");
}

#[test]
fn single_region_covers_image() {
    let img = RgbImage::from_fn(100, 100, |x, y| Rgb([(x * 2) as u8, (y * 2) as u8, 40]));
    let lab = slic_segment(&img, &SlicParams::with_region_count(1)).unwrap();
    assert_eq!(lab.region_count(), 1);
    assert_eq!(lab.regions()[0].centroid, (49.5, 49.5));
    let c = lab.region_patch_centers()[0];
    assert_eq!((c.row, c.col), (50, 50));
}

#[test]
fn two_color_halves_split_on_the_edge() {
    // 100 wide, 50 tall; the color edge is between columns 49 and 50
    let img = RgbImage::from_fn(100, 50, |x, _| {
        if x < 50 {
            Rgb([200, 30, 30])
        } else {
            Rgb([30, 30, 200])
        }
    });
    let lab = slic_segment(&img, &SlicParams::with_region_count(2)).unwrap();
    assert_eq!(lab.region_count(), 2);
    for row in 0..50 {
        for col in 0..100 {
            assert_eq!(lab.label(row, col), lab.label(0, if col < 50 { 0 } else { 99 }));
        }
    }
    assert_ne!(lab.label(0, 0), lab.label(0, 99));

    // brute-force check at the boundary: each edge pixel is strictly closer
    // (in the SLIC metric) to its own region's color/position than the other
    let s = (5000.0f64 / 2.0).sqrt();
    let lab_of = |x: u32| dtex::superpixel::rgb_to_lab(img.get_pixel(x, 0).0);
    for (col, own, other) in [(49u32, 0usize, 99usize), (50, 99, 0)] {
        let px = lab_of(col);
        let d = |target: usize| {
            let r = &lab.regions()[lab.label(0, target)];
            let c = dtex::superpixel::rgb_to_lab([
                r.mean_color[0].round() as u8,
                r.mean_color[1].round() as u8,
                r.mean_color[2].round() as u8,
            ]);
            let dc: f64 = (0..3).map(|i| (px[i] - c[i]).powi(2)).sum();
            let ds = (25.0 - r.centroid.0).powi(2) + (col as f64 - r.centroid.1).powi(2);
            dc + (10.0 / s).powi(2) * ds
        };
        assert!(d(own) < d(other));
    }
}

#[test]
fn kitti_sized_scene_properties() {
    let (w, h) = (1242, 375);
    let cam = CameraModel::kitti_like(w, h);
    let scene = synth_scene(&named_scene(SceneName::SixPlanes, w, h, &cam).unwrap(), &cam).unwrap();
    let p = SlicParams::default();
    let lab = slic_segment(&scene.rgb, &p).unwrap();
    let again = slic_segment(&scene.rgb, &p).unwrap();
    assert_eq!(lab, again, "segmentation must be deterministic");

    assert!(lab.region_count() >= 300 && lab.region_count() <= 900, "{}", lab.region_count());
    let total: usize = lab.regions().iter().map(|r| r.pixel_count).sum();
    assert_eq!(total, w * h);
    let s2 = (w * h) as f64 / p.region_count as f64;
    for (i, r) in lab.regions().iter().enumerate() {
        assert!(is_four_connected(&lab, i), "region {i} is not 4-connected");
        assert!(r.pixel_count as f64 >= p.connectivity_min_fraction * s2 * 0.99 - 1.0);
    }

    // boundary adherence: almost every region lies on one plane
    let mut pure = 0;
    for i in 0..lab.region_count() {
        let mut counts = std::collections::HashMap::new();
        for (l, plane) in lab.labels().iter().zip(&scene.plane_index) {
            if *l as usize == i {
                *counts.entry(*plane).or_insert(0usize) += 1;
            }
        }
        let max = counts.values().max().copied().unwrap_or(0);
        if max as f64 >= 0.95 * lab.regions()[i].pixel_count as f64 {
            pure += 1;
        }
    }
    assert!(pure as f64 >= 0.95 * lab.region_count() as f64, "{pure}/{}", lab.region_count());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn labels_partition_and_regions_connected(
        w in 8u32..48, h in 8u32..48, k in 1usize..30, seed in any::<u32>(),
    ) {
        let img = RgbImage::from_fn(w, h, |x, y| {
            let v = (x.wrapping_mul(2654435761).wrapping_add(y.wrapping_mul(40503)).wrapping_add(seed)) >> 7;
            Rgb([(v & 0xff) as u8, ((v >> 8) & 0xff) as u8, (x * 5) as u8])
        });
        let k = k.min((w * h) as usize);
        let lab = slic_segment(&img, &SlicParams::with_region_count(k)).unwrap();
        prop_assert_eq!(lab.labels().len(), (w * h) as usize);
        prop_assert!(lab.region_count() >= 1);
        for i in 0..lab.region_count() {
            prop_assert!(is_four_connected(&lab, i));
        }
    }
}
