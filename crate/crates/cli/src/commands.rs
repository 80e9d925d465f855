//! Subcommand implementations. Each returns a short summary for stdout.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dtex::baseline::detect_ground_vdisparity;
use dtex::descriptor::{binarize, save_texture_pfm, texture_map, texture_visualization, TextureMap};
use dtex::eval::{compare_report, MethodResult, SceneResults};
use dtex::imaging::{
    load_disparity, load_mask, load_rgb, named_scene, random_scene, render_overlay, save_disparity, save_mask,
    save_rgb, synth_scene, DisparityFormat, RgbImage, SceneName,
};
use dtex::models::{build_fusion_net, build_ground_net, fcn_convert, FusionNetSpec, GroundNetSpec, FUSION_ARCH, GROUND_ARCH};
use dtex::nn::{grad_check, load_network, save_network, Network, ParamSelection, Shape, Tensor};
use dtex::pipeline::{
    detect_ground, extract_ground_samples, extract_road_samples, segment_road, train, EpochMetrics, GroundImage,
    RoadImage, TrainOutcome,
};
use dtex::superpixel::slic_segment;
use dtex::{DisparityMap, Mask};

use crate::config::RunConfig;
use crate::failure::{Context, Failure, Outcome};
use crate::manifest::{self, Entry};

pub const OVERLAY_COLOR: [u8; 3] = [0, 200, 0];
pub const OVERLAY_ALPHA: f32 = 0.45;
pub const BOUNDARY_COLOR: [u8; 3] = [255, 0, 0];
pub const DESCRIPTOR_METHOD: &str = "descriptor";
pub const VDISPARITY_METHOD: &str = "v-disparity";
/// Gradient checks pass below this maximum relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Ground,
    Road,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Ground => "ground",
            Task::Road => "road",
        }
    }

    fn arch(self) -> &'static str {
        match self {
            Task::Ground => GROUND_ARCH,
            Task::Road => FUSION_ARCH,
        }
    }
}

fn create_dir(dir: &Path) -> Outcome<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Outcome<()> {
    fs::write(path, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

fn read_disparity(path: &Path) -> Outcome<DisparityMap> {
    let format = DisparityFormat::from_path(path).ok_or_else(|| {
        Failure::input(format!("{}: disparity must be a .png (16-bit) or .pfm file", path.display()))
    })?;
    load_disparity(path, format).context(format!("loading {}", path.display()))
}

fn read_rgb(path: &Path) -> Outcome<RgbImage> {
    load_rgb(path).context(format!("loading {}", path.display()))
}

fn read_mask(path: &Path) -> Outcome<Mask> {
    load_mask(path).context(format!("loading {}", path.display()))
}

fn same_dims(what: &Path, expected: (usize, usize), actual: (usize, usize)) -> Outcome<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Failure::input(format!(
            "{}: size {}x{} does not match {}x{}",
            what.display(),
            actual.0,
            actual.1,
            expected.0,
            expected.1
        )))
    }
}

fn rgb_dims(img: &RgbImage) -> (usize, usize) {
    (img.width() as usize, img.height() as usize)
}

struct LoadedEntry {
    rgb: RgbImage,
    disparity: DisparityMap,
    mask: Option<Mask>,
}

fn load_entry(e: &Entry, with_mask: bool) -> Outcome<LoadedEntry> {
    let disparity = read_disparity(&e.disparity)?;
    let rgb = read_rgb(&e.rgb)?;
    same_dims(&e.rgb, disparity.dims(), rgb_dims(&rgb))?;
    let mask = if with_mask {
        let m = read_mask(&e.mask)?;
        same_dims(&e.mask, disparity.dims(), m.dims())?;
        Some(m)
    } else {
        None
    };
    Ok(LoadedEntry { rgb, disparity, mask })
}

/// `synth`: renders a named scene, or `count` random scenes seeded from
/// `seed`, and writes a manifest listing them.
pub fn synth(cfg: &RunConfig, scene: &str, count: usize) -> Outcome<String> {
    let (w, h) = cfg.synth_size;
    let cam = cfg.camera(w, h)?;
    let specs = if scene == "random" {
        if count == 0 {
            return Err(Failure::input("--count must be positive"));
        }
        (0..count as u64)
            .map(|i| {
                let seed = cfg.seed + i;
                random_scene(seed, w, h, &cam)
                    .map(|s| (format!("random_{seed:04}"), s))
                    .context("random scene")
            })
            .collect::<Outcome<Vec<_>>>()?
    } else {
        let name: SceneName = scene.parse().context("scene")?;
        vec![(name.as_str().to_owned(), named_scene(name, w, h, &cam).context("scene")?)]
    };
    create_dir(&cfg.out)?;
    let mut lines = Vec::new();
    for (stem, spec) in &specs {
        let s = synth_scene(spec, &cam).context(format!("rendering {stem}"))?;
        let names = [
            format!("{stem}_rgb.png"),
            format!("{stem}_disp.png"),
            format!("{stem}_mask.png"),
        ];
        let path = |n: &str| cfg.out.join(n);
        save_rgb(path(&names[0]), &s.rgb).context("writing rgb")?;
        save_disparity(path(&names[1]), &s.disparity, DisparityFormat::KittiPng16).context("writing disparity")?;
        save_mask(path(&names[2]), &s.mask).context("writing mask")?;
        let overlay = render_overlay(&s.rgb, &s.mask, OVERLAY_COLOR, OVERLAY_ALPHA).context("overlay")?;
        save_rgb(path(&format!("{stem}_overlay.png")), &overlay).context("writing overlay")?;
        let [a, b, c] = names;
        lines.push((a, b, c));
    }
    write_text(&cfg.out.join("manifest.txt"), &manifest::render(&lines))?;
    Ok(format!("wrote {} scene(s) of {w}x{h} to {}", specs.len(), cfg.out.display()))
}

/// `texture`: texture map as PFM and 8-bit PNG, plus the binarized map.
pub fn texture(cfg: &RunConfig) -> Outcome<String> {
    let path = cfg.require(&cfg.disparity, "disparity")?;
    let d = read_disparity(path)?;
    let t = texture_map(&d, &cfg.descriptor).context("texture map")?;
    create_dir(&cfg.out)?;
    save_texture_pfm(cfg.out.join("texture.pfm"), &t).context("writing texture.pfm")?;
    let png = cfg.out.join("texture.png");
    texture_visualization(&t)
        .save(&png)
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", png.display())))?;
    let bin = binarize(&t, cfg.descriptor.threshold);
    save_mask(cfg.out.join("binary.png"), &bin).context("writing binary.png")?;
    Ok(format!(
        "block size {}: {} valid texture pixels, {} above threshold {}",
        cfg.descriptor.block_size,
        t.valid_count(),
        bin.count_positive(),
        cfg.descriptor.threshold
    ))
}

/// `slic`: 16-bit region labels and a boundary overlay.
pub fn slic(cfg: &RunConfig) -> Outcome<String> {
    let path = cfg.require(&cfg.rgb, "rgb")?;
    let img = read_rgb(path)?;
    let labeling = slic_segment(&img, &cfg.slic).context("slic")?;
    create_dir(&cfg.out)?;
    labeling.save_png16(cfg.out.join("labels.png")).context("writing labels.png")?;
    let overlay = labeling.boundary_overlay(&img, BOUNDARY_COLOR).context("boundaries")?;
    save_rgb(cfg.out.join("boundaries.png"), &overlay).context("writing boundaries.png")?;
    Ok(format!("regions: {}", labeling.region_count()))
}

fn road_texture(cfg: &RunConfig, d: &DisparityMap) -> Outcome<TextureMap> {
    texture_map(d, &cfg.descriptor).context("texture map")
}

/// `train`: samples from the manifest, seeded init, SGD; writes the
/// checkpoint and the per-epoch metrics trace.
pub fn train_cmd(cfg: &RunConfig, task: Task) -> Outcome<String> {
    let entries = manifest::load(cfg.require(&cfg.manifest, "manifest")?)?;
    let loaded = entries.iter().map(|e| load_entry(e, true)).collect::<Outcome<Vec<_>>>()?;
    let outcome: TrainOutcome = match task {
        Task::Ground => {
            let images: Vec<GroundImage> = loaded
                .into_iter()
                .map(|l| GroundImage { rgb: l.rgb, disparity: l.disparity, mask: l.mask.expect("loaded") })
                .collect();
            let patch = GroundNetSpec::default().patch;
            let samples = extract_ground_samples(&images, &cfg.descriptor, &cfg.slic, patch, cfg.seed)
                .context("extracting ground samples")?;
            train(build_ground_net(cfg.seed), &samples, &cfg.train).context("training")?
        }
        Task::Road => {
            let images = loaded
                .into_iter()
                .map(|l| {
                    Ok(RoadImage {
                        texture: road_texture(cfg, &l.disparity)?,
                        rgb: l.rgb,
                        mask: l.mask.expect("loaded"),
                    })
                })
                .collect::<Outcome<Vec<_>>>()?;
            let patch = FusionNetSpec::default().patch;
            let samples = extract_road_samples(&images, patch, cfg.max_road_samples, cfg.seed)
                .context("extracting road samples")?;
            train(build_fusion_net(cfg.seed), &samples, &cfg.train).context("training")?
        }
    };
    create_dir(&cfg.out)?;
    let ckpt = cfg.out.join(format!("{}.dtexnet", task.name()));
    save_network(&outcome.network, &ckpt).context("writing checkpoint")?;
    let mut csv = format!("{}\n", EpochMetrics::CSV_HEADER);
    for m in &outcome.trace {
        csv.push_str(&m.csv_row());
        csv.push('\n');
    }
    write_text(&cfg.out.join(format!("{}_metrics.csv", task.name())), &csv)?;
    let last = outcome.trace.last().expect("at least one epoch");
    Ok(format!(
        "{} samples ({} train, {} val); epoch {} val accuracy {:.4}; checkpoint {}",
        outcome.train_indices.len() + outcome.val_indices.len(),
        outcome.train_indices.len(),
        outcome.val_indices.len(),
        last.epoch,
        last.val_accuracy,
        ckpt.display()
    ))
}

fn load_checkpoint(cfg: &RunConfig, task: Task) -> Outcome<Network<f32>> {
    let path = cfg.require(&cfg.checkpoint, "checkpoint")?;
    if !path.is_file() {
        return Err(Failure::input(format!("checkpoint {} does not exist", path.display())));
    }
    let net = load_network(path).context(format!("loading {}", path.display()))?;
    if net.arch() != task.arch() {
        return Err(Failure::input(format!(
            "checkpoint architecture {} does not serve the {} task (expected {})",
            net.arch(),
            task.name(),
            task.arch()
        )));
    }
    Ok(net)
}

/// `infer`: one predicted mask and overlay per manifest entry.
pub fn infer(cfg: &RunConfig, task: Task) -> Outcome<String> {
    let net = load_checkpoint(cfg, task)?;
    let entries = manifest::load(cfg.require(&cfg.manifest, "manifest")?)?;
    let fcn = match task {
        Task::Road => Some(fcn_convert(&net).context("converting to fully convolutional form")?),
        Task::Ground => None,
    };
    create_dir(&cfg.out)?;
    let mut positive = 0usize;
    for e in &entries {
        let l = load_entry(e, false)?;
        let mask = match &fcn {
            None => {
                detect_ground(&l.rgb, &l.disparity, &net, &cfg.descriptor, &cfg.slic)
                    .context(format!("detecting ground in {}", e.rgb.display()))?
                    .mask
            }
            Some(fcn) => {
                let t = road_texture(cfg, &l.disparity)?;
                segment_road(&l.rgb, &t, fcn).context(format!("segmenting {}", e.rgb.display()))?.mask
            }
        };
        positive += mask.count_positive();
        let stem = e.stem();
        save_mask(cfg.out.join(format!("{stem}_pred.png")), &mask).context("writing prediction")?;
        let overlay = render_overlay(&l.rgb, &mask, OVERLAY_COLOR, OVERLAY_ALPHA).context("overlay")?;
        save_rgb(cfg.out.join(format!("{stem}_pred_overlay.png")), &overlay).context("writing overlay")?;
    }
    Ok(format!(
        "{} task: {} image(s), {positive} positive pixels, predictions in {}",
        task.name(),
        entries.len(),
        cfg.out.display()
    ))
}

/// `eval`: compares saved predictions and the V-disparity baseline against
/// the manifest masks.
pub fn eval(cfg: &RunConfig) -> Outcome<String> {
    let entries = manifest::load(cfg.require(&cfg.manifest, "manifest")?)?;
    let pred_dir: PathBuf = cfg.predictions.clone().unwrap_or_else(|| cfg.out.clone());
    let mut scenes = Vec::with_capacity(entries.len());
    for e in &entries {
        let gt = read_mask(&e.mask)?;
        let d = read_disparity(&e.disparity)?;
        same_dims(&e.disparity, gt.dims(), d.dims())?;
        let pred_path = pred_dir.join(format!("{}_pred.png", e.stem()));
        let pred = read_mask(&pred_path)?;
        same_dims(&pred_path, gt.dims(), pred.dims())?;
        let (baseline, _) = detect_ground_vdisparity(&d, &cfg.baseline)
            .context(format!("v-disparity on {}", e.disparity.display()))?;
        scenes.push((e.stem(), gt, pred, baseline));
    }
    let results: Vec<SceneResults<'_>> = scenes
        .iter()
        .map(|(stem, gt, pred, base)| SceneResults {
            scene: stem.clone(),
            gt,
            methods: vec![
                MethodResult { method: DESCRIPTOR_METHOD.into(), pred },
                MethodResult { method: VDISPARITY_METHOD.into(), pred: base },
            ],
        })
        .collect();
    let report = compare_report(&results).context("report")?;
    create_dir(&cfg.out)?;
    write_text(&cfg.out.join("report.csv"), &report.to_csv())?;
    let table = report.to_table();
    write_text(&cfg.out.join("report.txt"), &table)?;
    Ok(table)
}

/// Deterministic pseudo-random values in `[-scale, scale]`.
fn wave(n: usize, phase: f64, scale: f64) -> Vec<f64> {
    (0..n).map(|i| scale * (1.618_033_988 * i as f64 + phase).sin()).collect()
}

fn perturb_biases(net: &mut Network<f64>, phase: f64) {
    for (i, p) in net.params_mut().into_iter().enumerate() {
        if i % 2 == 1 {
            let v = wave(p.len(), phase + i as f64, 0.1);
            p.copy_from_slice(&v);
        }
    }
}

/// `gradcheck`: central differences against backprop on narrow and full
/// instances of both architectures. Fails when any check exceeds the
/// tolerance.
pub fn gradcheck(cfg: &RunConfig) -> Outcome<String> {
    let narrow_ground = GroundNetSpec { patch: 32, conv1: 3, conv2: 3, hidden: 8, classes: 2 };
    let narrow_fusion = FusionNetSpec { patch: 30, conv3: 4, conv1x1: 2, hidden: 8, classes: 2 };
    let sample = ParamSelection::Sample { per_tensor: 20, seed: cfg.seed };
    let seed = cfg.seed;
    let nets: Vec<(&str, dtex::Result<Network<f64>>, ParamSelection)> = vec![
        ("ground(narrow)", narrow_ground.build(seed), ParamSelection::All),
        ("fusion(narrow)", narrow_fusion.build(seed), ParamSelection::All),
        (GROUND_ARCH, GroundNetSpec::default().build(seed), sample),
        (FUSION_ARCH, FusionNetSpec::default().build(seed), sample),
    ];
    let mut out = String::new();
    let mut failed = Vec::new();
    for (k, (name, net, sel)) in nets.into_iter().enumerate() {
        let mut net = net.context(name)?;
        perturb_biases(&mut net, k as f64 + seed as f64);
        let inputs: Vec<Tensor<f64>> = net
            .input_shapes()
            .iter()
            .enumerate()
            .map(|(j, &s): (usize, &Shape)| Tensor::from_vec(s, wave(s.len(), 0.3 * j as f64 + seed as f64, 1.0)))
            .collect::<dtex::Result<_>>()
            .context(name)?;
        let refs: Vec<&Tensor<f64>> = inputs.iter().collect();
        let (mut worst, mut checked, mut excluded) = (0.0f64, 0, 0);
        for label in 0..2 {
            let r = grad_check(&net, &refs, label, 1e-5, sel).context(name)?;
            worst = worst.max(r.max_relative_error);
            checked += r.checked;
            excluded += r.excluded;
        }
        let ok = worst < GRADCHECK_TOLERANCE && checked > 0;
        let _ = writeln!(
            out,
            "{} {name}: max relative error {worst:.2e} ({checked} checked, {excluded} excluded)",
            if ok { "ok  " } else { "FAIL" }
        );
        if !ok {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        Ok(out.trim_end().to_owned())
    } else {
        Err(Failure::compute(format!("{out}gradient check failed for {}", failed.join(", "))))
    }
}
