//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use dtex::baseline::{bins_for, detect_ground_vdisparity, fit_ground_line, v_disparity, BaselineParams};
use dtex::descriptor::{binarize, texture_map, DescriptorParams, TextureMap};
use dtex::eval::{compare_report, confusion, metrics, MethodResult, SceneResults};
use dtex::imaging::{
    add_gaussian_noise, named_scene, random_scene, synth_scene, CameraModel, DisparityMap, Mask,
    Plane, PlaneSceneSpec, Rect, SceneName, SyntheticScene,
};
use dtex::models::{build_ground_net, fcn_convert, FusionNetSpec, GroundNetSpec};
use dtex::nn::{grad_check, network_to_bytes, Dense, Layer, Network, ParamSelection, Shape, Tensor};
use dtex::pipeline::{
    detect_ground, extract_ground_samples, extract_road_samples, segment_road,
    segment_road_patchwise, train, GroundImage, RoadImage, TrainConfig,
};
use dtex::superpixel::SlicParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KITTI: (usize, usize) = (1242, 375);
/// Resolution and superpixel count of the generated training/test suite.
const SUITE: (usize, usize, usize) = (320, 160, 128);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn scene(name: SceneName, (w, h): (usize, usize)) -> SyntheticScene {
    let cam = CameraModel::kitti_like(w, h);
    synth_scene(&named_scene(name, w, h, &cam).unwrap(), &cam).unwrap()
}

fn ground_image(seed: u64) -> GroundImage {
    let (w, h, _) = SUITE;
    let cam = CameraModel::kitti_like(w, h);
    let s = synth_scene(&random_scene(seed, w, h, &cam).unwrap(), &cam).unwrap();
    GroundImage {
        rgb: s.rgb,
        disparity: s.disparity,
        mask: s.mask,
    }
}

fn accuracy(pred: &Mask, gt: &Mask) -> f64 {
    metrics(&confusion(pred, gt, None).unwrap()).unwrap().accuracy
}

/// Criterion 1: interior ground positive, interior obstacles negative.
fn descriptor_separation() -> Verdict {
    let s = scene(SceneName::SixPlanes, KITTI);
    let mut pass = true;
    let mut parts = Vec::new();
    for b in [1, 3] {
        let p = DescriptorParams::with_block_size(b);
        let t0 = Instant::now();
        let t = texture_map(&s.disparity, &p).unwrap();
        let m = binarize(&t, p.threshold);
        let elapsed = t0.elapsed();
        let (rr, cr) = p.reach();
        let interior = s.interior(rr, cr);
        let (mut g, mut gp, mut o, mut on) = (0usize, 0usize, 0usize, 0usize);
        for (i, &inside) in interior.iter().enumerate() {
            if !inside {
                continue;
            }
            let positive = m.data()[i];
            if s.mask.data()[i] {
                g += 1;
                gp += positive as usize;
            } else {
                o += 1;
                on += !positive as usize;
            }
        }
        let (gr, or) = (gp as f64 / g as f64, on as f64 / o as f64);
        pass &= gr >= 0.99 && or >= 0.99 && elapsed < Duration::from_secs(1);
        parts.push(format!(
            "b={b}: ground {:.4} ({g} px), obstacle {:.4} ({o} px), {:.0} ms",
            gr,
            or,
            elapsed.as_secs_f64() * 1e3
        ));
    }
    verdict(pass, parts.join("; "))
}

/// Criterion 2: texture equals the analytic row slope on affine fields and
/// b=1 and b=3 agree on their common support.
fn descriptor_exactness() -> Verdict {
    let (w, h) = (200, 150);
    let fields: [(f64, f64, f64); 4] = [(0.327, 0.0, 3.0), (0.3, 0.07, 1.5), (0.125, -0.25, 60.0), (0.0, 0.11, 20.0)];
    let mut max_err = 0.0f64;
    let mut max_pair = 0.0f64;
    let mut compared = 0usize;
    for &(a, bcol, c) in &fields {
        let data = (0..h)
            .flat_map(|v| (0..w).map(move |u| (a * v as f64 + bcol * u as f64 + c) as f32))
            .collect();
        let d = DisparityMap::new(w, h, data).unwrap();
        let t1 = texture_map(&d, &DescriptorParams::with_block_size(1)).unwrap();
        let t3 = texture_map(&d, &DescriptorParams::with_block_size(3)).unwrap();
        for t in [&t1, &t3] {
            for v in t.data().iter().filter(|v| !v.is_nan()) {
                max_err = max_err.max((*v as f64 - a).abs());
            }
        }
        for (x, y) in t1.data().iter().zip(t3.data()) {
            if !x.is_nan() && !y.is_nan() {
                compared += 1;
                max_pair = max_pair.max((x - y).abs() as f64);
            }
        }
    }
    // Dyadic field: every block mean is exact, so both sizes agree bitwise.
    let dyadic = DisparityMap::new(
        64,
        64,
        (0..64).flat_map(|v| (0..64).map(move |u| 0.25 * v as f32 + 0.5 * u as f32 + 8.0)).collect(),
    )
    .unwrap();
    let d1 = texture_map(&dyadic, &DescriptorParams::with_block_size(1)).unwrap();
    let d3 = texture_map(&dyadic, &DescriptorParams::with_block_size(3)).unwrap();
    let bitwise = d1
        .data()
        .iter()
        .zip(d3.data())
        .filter(|(x, y)| !x.is_nan() && !y.is_nan())
        .all(|(x, y)| x.to_bits() == y.to_bits());
    verdict(
        max_err <= 1e-5 && max_pair <= 1e-5 && bitwise && compared > 0,
        format!(
            "max |T - slope| = {max_err:.2e}, max |T1 - T3| = {max_pair:.2e} over {compared} px, dyadic field bit-identical: {bitwise}"
        ),
    )
}

/// Accuracy of the binarized texture over plane pixels where both block
/// sizes give a valid value.
fn binary_accuracies(s: &SyntheticScene, noisy: &DisparityMap) -> (f64, f64) {
    let maps: Vec<(TextureMap, Mask)> = [1, 3]
        .iter()
        .map(|&b| {
            let p = DescriptorParams::with_block_size(b);
            let t = texture_map(noisy, &p).unwrap();
            let m = binarize(&t, p.threshold);
            (t, m)
        })
        .collect();
    let (mut n, mut hit1, mut hit3) = (0usize, 0usize, 0usize);
    for i in 0..s.mask.data().len() {
        let valid = s.plane_index[i].is_some() && maps.iter().all(|(t, _)| !t.data()[i].is_nan());
        if valid {
            n += 1;
            hit1 += (maps[0].1.data()[i] == s.mask.data()[i]) as usize;
            hit3 += (maps[1].1.data()[i] == s.mask.data()[i]) as usize;
        }
    }
    (hit1 as f64 / n as f64, hit3 as f64 / n as f64)
}

/// Criterion 3: under sigma = 0.5 px noise, b=3 beats b=1 for every seed.
fn noise_ablation() -> Verdict {
    let s = scene(SceneName::SixPlanes, KITTI);
    let mut wins = 0;
    let mut worst_margin = f64::INFINITY;
    let mut means = (0.0, 0.0);
    for seed in 0..10 {
        let noisy = add_gaussian_noise(&s.disparity, 0.5, seed).unwrap();
        let (a1, a3) = binary_accuracies(&s, &noisy);
        wins += (a3 > a1) as usize;
        worst_margin = worst_margin.min(a3 - a1);
        means = (means.0 + a1 / 10.0, means.1 + a3 / 10.0);
    }
    verdict(
        wins == 10,
        format!(
            "b=3 > b=1 on {wins}/10 seeds; mean accuracy b=1 {:.4}, b=3 {:.4}; smallest margin {:.4}",
            means.0, means.1, worst_margin
        ),
    )
}

fn rand_input(shape: Shape, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_vec(shape, (0..shape.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn randomize_biases(net: &mut Network<f64>, rng: &mut ChaCha8Rng) {
    for (i, p) in net.params_mut().into_iter().enumerate() {
        if i % 2 == 1 {
            p.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
        }
    }
}

/// Criterion 4: central finite differences agree with backprop.
fn gradient_verification() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut lines = Vec::new();
    let mut pass = true;
    let mut check = |name: &str, mut net: Network<f64>, sel: ParamSelection, rng: &mut ChaCha8Rng| {
        randomize_biases(&mut net, rng);
        let inputs: Vec<Tensor<f64>> = net.input_shapes().iter().map(|&s| rand_input(s, rng)).collect();
        let refs: Vec<&Tensor<f64>> = inputs.iter().collect();
        let mut worst = 0.0f64;
        let (mut checked, mut excluded) = (0, 0);
        for label in 0..2 {
            let r = grad_check(&net, &refs, label, 1e-5, sel).unwrap();
            worst = worst.max(r.max_relative_error);
            checked += r.checked;
            excluded += r.excluded;
        }
        pass &= worst < 1e-5 && checked > 0;
        lines.push(format!("{name} {worst:.1e} ({checked} checked, {excluded} excluded)"));
    };

    let dense = |i, o| Layer::<f64>::Dense(Dense::zeros(i, o));
    let with_weights = |mut net: Network<f64>, rng: &mut ChaCha8Rng| {
        for (i, p) in net.params_mut().into_iter().enumerate() {
            if i % 2 == 0 {
                p.iter_mut().for_each(|w| *w = rng.random_range(-0.5..0.5));
            }
        }
        net
    };
    let v = |n| vec![Shape::vector(n)];
    let nets = [
        ("fc+softmax", Network::new("fc", 0, v(6), vec![vec![]], vec![dense(6, 2)]).unwrap()),
        ("relu", Network::new("relu", 0, v(6), vec![vec![]], vec![dense(6, 5), Layer::Relu, dense(5, 2)]).unwrap()),
        (
            "conv",
            Network::new("conv", 0, vec![Shape::new(2, 7, 6)], vec![vec![Layer::conv(2, 3, 3)]], vec![dense(3 * 5 * 4, 2)]).unwrap(),
        ),
        (
            "maxpool",
            Network::new(
                "pool",
                0,
                vec![Shape::new(2, 6, 8)],
                vec![vec![Layer::conv(2, 2, 3), Layer::MaxPool]],
                vec![dense(2 * 2 * 3, 2)],
            )
            .unwrap(),
        ),
    ];
    for (name, net) in nets {
        let net = with_weights(net, &mut rng);
        check(name, net, ParamSelection::All, &mut rng);
    }
    let narrow_ground = GroundNetSpec { patch: 32, conv1: 3, conv2: 3, hidden: 8, classes: 2 };
    let narrow_fusion = FusionNetSpec { patch: 30, conv3: 4, conv1x1: 2, hidden: 8, classes: 2 };
    check("ground(narrow)", narrow_ground.build(1).unwrap(), ParamSelection::All, &mut rng);
    check("fusion(narrow)", narrow_fusion.build(2).unwrap(), ParamSelection::All, &mut rng);
    let sample = ParamSelection::Sample { per_tensor: 40, seed: 5 };
    check("ground_v1(full)", GroundNetSpec::default().build(3).unwrap(), sample, &mut rng);
    check("fusion_v1(full)", FusionNetSpec::default().build(4).unwrap(), sample, &mut rng);
    let elapsed = t0.elapsed();
    pass &= elapsed < Duration::from_secs(120);
    verdict(pass, format!("{}; {:.1} s", lines.join(", "), elapsed.as_secs_f64()))
}

fn road_image(seed: u64, w: usize, h: usize) -> RoadImage {
    let cam = CameraModel::kitti_like(w, h);
    let s = synth_scene(&random_scene(seed, w, h, &cam).unwrap(), &cam).unwrap();
    RoadImage {
        texture: texture_map(&s.disparity, &DescriptorParams::default()).unwrap(),
        rgb: s.rgb,
        mask: s.mask,
    }
}

/// Criterion 5: FCN inference equals patchwise classification.
fn fcn_equivalence() -> Verdict {
    let (w, h) = (128, 64);
    let train_images: Vec<RoadImage> = (0..4).map(|s| road_image(500 + s, w, h)).collect();
    let set = extract_road_samples(&train_images, 30, 600, 1).unwrap();
    let cfg = TrainConfig { epochs: 2, batch_size: 32, seed: 3, ..TrainConfig::default() };
    let out = train(FusionNetSpec::default().build(3).unwrap(), &set, &cfg).unwrap();
    let net = out.network;
    let test = road_image(900, w, h);
    let fcn = fcn_convert(&net).unwrap();
    let a = segment_road(&test.rgb, &test.texture, &fcn).unwrap();
    let b = segment_road_patchwise(&test.rgb, &test.texture, &net).unwrap();
    let s = a.scores.shape();
    let locations = s.height * s.width;
    let mut same_labels = 0;
    for i in 0..s.height {
        for j in 0..s.width {
            let la = a.scores.at(1, i, j) > a.scores.at(0, i, j);
            let lb = b.scores.at(1, i, j) > b.scores.at(0, i, j);
            same_labels += (la == lb) as usize;
        }
    }
    let dev = a
        .scores
        .data()
        .iter()
        .zip(b.scores.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f32, f32::max);
    let val = out.trace.last().unwrap().val_accuracy;
    verdict(
        same_labels == locations && dev < 1e-5 && a.mask == b.mask,
        format!(
            "{same_labels}/{locations} stride-4 labels identical, max score deviation {dev:.2e} (net val accuracy {val:.3})"
        ),
    )
}

/// Criterion 6 (and the net reused by 7): train on 30 scenes, test on 10.
fn end_to_end() -> (Verdict, Option<Network<f32>>) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let t0 = Instant::now();
        let (_, _, k) = SUITE;
        let slic = SlicParams::with_region_count(k);
        let desc = DescriptorParams::default();
        let train_images: Vec<GroundImage> = (0..30).map(ground_image).collect();
        let samples = extract_ground_samples(&train_images, &desc, &slic, 32, 7).unwrap();
        let cfg = TrainConfig { epochs: 5, seed: 7, parallel: false, ..TrainConfig::default() };
        let out = train(build_ground_net(7), &samples, &cfg).unwrap();
        let mut pooled = dtex::eval::ConfusionCounts::default();
        let mut worst = 1.0f64;
        for seed in 1000..1010 {
            let img = ground_image(seed);
            let det = detect_ground(&img.rgb, &img.disparity, &out.network, &desc, &slic).unwrap();
            let c = confusion(&det.mask, &img.mask, None).unwrap();
            worst = worst.min(metrics(&c).unwrap().accuracy);
            pooled = pooled.merged(c);
        }
        let acc = metrics(&pooled).unwrap().accuracy;
        let elapsed = t0.elapsed();
        (
            verdict(
                acc >= 0.97 && elapsed < Duration::from_secs(600),
                format!(
                    "held-out pixel accuracy {acc:.4} (worst scene {worst:.4}), {} balanced samples, {:.1} s single-threaded",
                    samples.len(),
                    elapsed.as_secs_f64()
                ),
            ),
            Some(out.network),
        )
    })
}

/// Criterion 7: descriptor pipeline vs V-disparity.
fn baseline_comparison(net: Option<&Network<f32>>) -> Verdict {
    let Some(net) = net else {
        return verdict(false, "no trained ground network (end-to-end criterion failed to run)");
    };
    let (w, h, k) = SUITE;
    let slic = SlicParams::with_region_count(k);
    let desc = DescriptorParams::default();
    let mut acc = Vec::new();
    for name in [SceneName::LateralSlope, SceneName::FlatGround] {
        let s = scene(name, (w, h));
        let det = detect_ground(&s.rgb, &s.disparity, net, &desc, &slic).unwrap();
        let (base, _) = detect_ground_vdisparity(&s.disparity, &BaselineParams::default()).unwrap();
        acc.push((accuracy(&det.mask, &s.mask), accuracy(&base, &s.mask)));
    }
    let (lat, flat) = (acc[0], acc[1]);
    let gap = 100.0 * (lat.0 - lat.1);
    verdict(
        gap >= 10.0 && flat.0 >= 0.99 && flat.1 >= 0.99,
        format!(
            "lateral slope: pipeline {:.4} vs v-disparity {:.4} ({gap:+.1} pp); flat: pipeline {:.4}, v-disparity {:.4}",
            lat.0, lat.1, flat.0, flat.1
        ),
    )
}

/// Criterion 8: V-disparity line slope on flat ground.
fn vdisparity_slope() -> Verdict {
    let (w, h) = KITTI;
    let cam = CameraModel::kitti_like(w, h);
    let v0 = cam.horizon_row_v0 as usize;
    let spec = PlaneSceneSpec::new(w, h).with_plane(
        Plane::HorizontalGround { height_m: cam.camera_height_m },
        Rect::new(v0 + 2, 0, h - v0 - 2, w),
    );
    let d = synth_scene(&spec, &cam).unwrap().disparity;
    let g = fit_ground_line(&v_disparity(&d, bins_for(&d, 1.0), 1.0).unwrap()).unwrap();
    let want = cam.baseline_m / cam.camera_height_m;
    let rel = (g.alpha - want).abs() / want;
    verdict(rel <= 0.01, format!("alpha {:.5} vs B/h {want:.5} ({:.3}% off)", g.alpha, 100.0 * rel))
}

/// One small train/infer/report run, returned as raw bytes.
fn pipeline_artifacts() -> (Vec<u8>, Vec<bool>, String) {
    let (_, _, k) = SUITE;
    let slic = SlicParams::with_region_count(k);
    let desc = DescriptorParams::default();
    let images: Vec<GroundImage> = (0..4).map(|s| ground_image(200 + s)).collect();
    let samples = extract_ground_samples(&images, &desc, &slic, 32, 1).unwrap();
    let cfg = TrainConfig { epochs: 2, seed: 1, ..TrainConfig::default() };
    let net = train(build_ground_net(1), &samples, &cfg).unwrap().network;
    let test = ground_image(300);
    let det = detect_ground(&test.rgb, &test.disparity, &net, &desc, &slic).unwrap();
    let (base, _) = detect_ground_vdisparity(&test.disparity, &BaselineParams::default()).unwrap();
    let report = compare_report(&[SceneResults {
        scene: "random-300".into(),
        gt: &test.mask,
        methods: vec![
            MethodResult { method: "descriptor".into(), pred: &det.mask },
            MethodResult { method: "v-disparity".into(), pred: &base },
        ],
    }])
    .unwrap();
    (network_to_bytes(&net), det.mask.data().to_vec(), report.to_csv())
}

/// Criterion 9: repeated runs are byte-identical.
fn determinism() -> Verdict {
    let a = pipeline_artifacts();
    let b = pipeline_artifacts();
    verdict(
        a == b,
        format!(
            "checkpoint ({} bytes) identical: {}, mask identical: {}, report identical: {}",
            a.0.len(),
            a.0 == b.0,
            a.1 == b.1,
            a.2 == b.2
        ),
    )
}

/// Criterion 10: parameter count of the ground net.
#[allow(clippy::identity_op)]
fn parameter_count() -> Verdict {
    let layers = [(5 * 5 * 1, 20), (3 * 3 * 20, 20), (720, 500), (500, 2)];
    let summed: usize = layers.iter().map(|(fan_in, out)| fan_in * out + out).sum();
    let built = build_ground_net(0).parameter_count();
    verdict(
        built == summed,
        format!(
            "built {built} = independent per-layer sum {summed} (the stated total 365,082 does not equal its own addends, which sum to {summed})"
        ),
    )
}

fn run(name: &str, f: impl FnOnce() -> Verdict) -> bool {
    let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        verdict(false, format!("panicked: {msg}"))
    });
    println!("[{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    v.pass
}

fn main() {
    // The test runner passes flags such as --nocapture; nothing to parse.
    let mut ok = true;
    ok &= run("descriptor separation", descriptor_separation);
    ok &= run("descriptor exactness", descriptor_exactness);
    ok &= run("noise ablation", noise_ablation);
    ok &= run("gradient verification", gradient_verification);
    ok &= run("fcn equivalence", fcn_equivalence);
    let mut net = None;
    ok &= run("end-to-end ground detection", || {
        let (v, n) = end_to_end();
        net = n;
        v
    });
    ok &= run("baseline comparison", || baseline_comparison(net.as_ref()));
    ok &= run("v-disparity slope", vdisparity_slope);
    ok &= run("determinism", determinism);
    ok &= run("parameter count", parameter_count);
    if !ok {
        std::process::exit(1);
    }
}
