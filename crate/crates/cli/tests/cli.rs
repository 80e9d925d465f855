use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = "[synth]\nwidth = 160\nheight = 96\n[slic]\nregion_count = 80\n\
                     [train]\nepochs = 2\nbatch_size = 16\nmax_road_samples = 300\n";

fn dtex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtex")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = dtex(args);
    assert!(
        out.status.success(),
        "dtex {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    dtex(args).status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn config(dir: &TempDir) -> PathBuf {
    let p = dir.path().join("small.toml");
    fs::write(&p, SMALL).unwrap();
    p
}

/// Random scenes plus their manifest in `dir/name`.
fn dataset(dir: &TempDir, cfg: &Path, name: &str, seed: u64, count: usize) -> PathBuf {
    let out = dir.path().join(name);
    let (seed, count) = (seed.to_string(), count.to_string());
    ok(&["synth", "--config", s(cfg), "--scene", "random", "--count", &count, "--seed", &seed, "--out", s(&out)]);
    out.join("manifest.txt")
}

fn sorted_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn gray(path: &Path) -> image::GrayImage {
    image::open(path).unwrap().to_luma8()
}

#[test]
fn synth_writes_scene_files() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("six");
    ok(&["synth", "--scene", "six-planes", "--out", s(&out)]);
    for f in ["six-planes_rgb.png", "six-planes_disp.png", "six-planes_mask.png", "six-planes_overlay.png", "manifest.txt"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let disp = image::open(out.join("six-planes_disp.png")).unwrap();
    assert!(matches!(disp, image::DynamicImage::ImageLuma16(_)));
}

#[test]
fn synth_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["synth", "--scene", "lateral-slope", "--out", s(&a)]);
    ok(&["synth", "--scene", "lateral-slope", "--out", s(&b)]);
    assert_eq!(sorted_files(&a), sorted_files(&b));
}

#[test]
fn synth_rejects_unknown_scene() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&["synth", "--scene", "seven-planes", "--out", s(dir.path())]), 2);
}

#[test]
fn bad_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[descriptor]\nblocksize = 3\n").unwrap();
    assert_eq!(code(&["synth", "--config", s(&cfg), "--out", s(dir.path())]), 2);
    fs::write(&cfg, "[descriptor]\nthreshold = -1.0\n").unwrap();
    assert_eq!(code(&["synth", "--config", s(&cfg), "--out", s(dir.path())]), 2);
    assert_eq!(code(&["synth", "--config", s(&dir.path().join("absent.toml"))]), 2);
    assert_eq!(code(&["gradcheck", "--block-size", "5"]), 2);
}

#[test]
fn texture_binary_separates_planes() {
    let dir = TempDir::new().unwrap();
    let scene = dir.path().join("scene");
    ok(&["synth", "--scene", "six-planes", "--out", s(&scene)]);
    for b in ["1", "3"] {
        let out = dir.path().join(format!("tex{b}"));
        let disp = scene.join("six-planes_disp.png");
        ok(&["texture", "--disparity", s(&disp), "--block-size", b, "--out", s(&out)]);
        assert!(out.join("texture.pfm").is_file() && out.join("texture.png").is_file());
        let bin = gray(&out.join("binary.png"));
        let gt = gray(&scene.join("six-planes_mask.png"));
        let agree = bin.pixels().zip(gt.pixels()).filter(|(a, b)| (a.0[0] > 0) == (b.0[0] > 0)).count();
        let frac = agree as f64 / gt.len() as f64;
        assert!(frac > 0.9, "b={b}: binary agrees with ground truth on {frac:.3}");
    }
}

#[test]
fn texture_missing_file_exits_2() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.png");
    assert_eq!(code(&["texture", "--disparity", s(&missing), "--out", s(dir.path())]), 2);
    assert_eq!(code(&["texture", "--out", s(dir.path())]), 2);
    let txt = dir.path().join("disp.txt");
    fs::write(&txt, "x").unwrap();
    assert_eq!(code(&["texture", "--disparity", s(&txt), "--out", s(dir.path())]), 2);
}

#[test]
fn slic_single_region() {
    let dir = TempDir::new().unwrap();
    let scene = dir.path().join("scene");
    ok(&["synth", "--scene", "six-planes", "--out", s(&scene)]);
    let out = dir.path().join("slic");
    let stdout = ok(&["slic", "--rgb", s(&scene.join("six-planes_rgb.png")), "--regions", "1", "--out", s(&out)]);
    assert_eq!(stdout.trim(), "regions: 1");
    let labels = image::open(out.join("labels.png")).unwrap().to_luma16();
    assert!(labels.pixels().all(|p| p.0[0] == 0));
    assert!(out.join("boundaries.png").is_file());
    assert_eq!(code(&["slic", "--rgb", s(&dir.path().join("none.png")), "--out", s(&out)]), 2);
}

#[test]
fn train_writes_checkpoint_and_trace_deterministically() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir);
    let manifest = dataset(&dir, &cfg, "data", 0, 3);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["train", "--config", s(&cfg), "--task", "ground", "--manifest", s(&manifest), "--seed", "7", "--out", s(out)]);
    }
    let trace = fs::read_to_string(a.join("ground_metrics.csv")).unwrap();
    let mut lines = trace.lines();
    assert!(lines.next().unwrap().ends_with("val_accuracy"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    let acc: f64 = rows[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(fs::read(a.join("ground.dtexnet")).unwrap(), fs::read(b.join("ground.dtexnet")).unwrap());
    assert_eq!(trace, fs::read_to_string(b.join("ground_metrics.csv")).unwrap());

    let c = dir.path().join("c");
    ok(&["train", "--config", s(&cfg), "--task", "ground", "--manifest", s(&manifest), "--seed", "8", "--out", s(&c)]);
    assert_ne!(fs::read(a.join("ground.dtexnet")).unwrap(), fs::read(c.join("ground.dtexnet")).unwrap());
}

#[test]
fn train_rejects_empty_manifest() {
    let dir = TempDir::new().unwrap();
    let m = dir.path().join("empty.txt");
    fs::write(&m, "# nothing here\n").unwrap();
    assert_ne!(code(&["train", "--manifest", s(&m), "--out", s(dir.path())]), 0);
    assert_ne!(code(&["train", "--manifest", s(&dir.path().join("absent.txt")), "--out", s(dir.path())]), 0);
}

#[test]
fn infer_then_eval_reports_both_methods() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir);
    let train_m = dataset(&dir, &cfg, "train", 0, 3);
    let test_m = dataset(&dir, &cfg, "test", 100, 2);
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--manifest", s(&train_m), "--out", s(&run)]);
    let ckpt = run.join("ground.dtexnet");
    let mut reports = Vec::new();
    for k in 0..2 {
        let pred = dir.path().join(format!("pred{k}"));
        let rep = dir.path().join(format!("rep{k}"));
        ok(&["infer", "--config", s(&cfg), "--manifest", s(&test_m), "--checkpoint", s(&ckpt), "--out", s(&pred)]);
        assert!(pred.join("random_0100_pred.png").is_file());
        assert!(pred.join("random_0101_pred_overlay.png").is_file());
        ok(&["eval", "--config", s(&cfg), "--manifest", s(&test_m), "--predictions", s(&pred), "--out", s(&rep)]);
        reports.push((sorted_files(&pred), sorted_files(&rep)));
    }
    assert_eq!(reports[0], reports[1]);
    let csv = fs::read_to_string(dir.path().join("rep0/report.csv")).unwrap();
    assert!(csv.starts_with("scene,method,accuracy"));
    for row in ["random_0100,descriptor,", "random_0100,v-disparity,", "ALL,descriptor,", "ALL,v-disparity,"] {
        assert!(csv.lines().any(|l| l.starts_with(row)), "missing {row} in\n{csv}");
    }
    assert!(dir.path().join("rep0/report.txt").is_file());
}

#[test]
fn road_task_round_trip() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir);
    let m = dataset(&dir, &cfg, "data", 3, 2);
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--task", "road", "--manifest", s(&m), "--epochs", "1", "--out", s(&run)]);
    let ckpt = run.join("road.dtexnet");
    let pred = dir.path().join("pred");
    ok(&["infer", "--config", s(&cfg), "--task", "road", "--manifest", s(&m), "--checkpoint", s(&ckpt), "--out", s(&pred)]);
    let mask = gray(&pred.join("random_0003_pred.png"));
    assert_eq!(mask.dimensions(), (160, 96));
    // A road checkpoint cannot serve the ground task.
    assert_eq!(code(&["infer", "--config", s(&cfg), "--manifest", s(&m), "--checkpoint", s(&ckpt), "--out", s(&pred)]), 2);
}

#[test]
fn eval_rejects_mismatched_sizes() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir);
    let m = dataset(&dir, &cfg, "data", 0, 1);
    let pred = dir.path().join("pred");
    fs::create_dir_all(&pred).unwrap();
    image::GrayImage::new(80, 48).save(pred.join("random_0000_pred.png")).unwrap();
    assert_ne!(code(&["eval", "--manifest", s(&m), "--predictions", s(&pred), "--out", s(dir.path())]), 0);
}

#[test]
fn infer_without_checkpoint_fails() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir);
    let m = dataset(&dir, &cfg, "data", 0, 1);
    assert_ne!(code(&["infer", "--manifest", s(&m), "--out", s(dir.path())]), 0);
    let absent = dir.path().join("absent.dtexnet");
    assert_ne!(code(&["infer", "--manifest", s(&m), "--checkpoint", s(&absent), "--out", s(dir.path())]), 0);
    let junk = dir.path().join("junk.dtexnet");
    fs::write(&junk, b"not a network").unwrap();
    assert_eq!(code(&["infer", "--manifest", s(&m), "--checkpoint", s(&junk), "--out", s(dir.path())]), 2);
}

#[test]
fn gradcheck_passes() {
    let out = ok(&["gradcheck"]);
    assert_eq!(out.lines().count(), 4);
    assert!(out.lines().all(|l| l.starts_with("ok")), "{out}");
}
