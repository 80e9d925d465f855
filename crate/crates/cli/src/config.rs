//! Run configuration: a TOML file with one section per module. Every key is
//! optional and falls back to the module default; unknown keys are errors.

use std::path::{Path, PathBuf};

use dtex::baseline::BaselineParams;
use dtex::descriptor::DescriptorParams;
use dtex::pipeline::TrainConfig;
use dtex::superpixel::SlicParams;
use dtex::CameraModel;
use serde::Deserialize;

use crate::failure::{Failure, Outcome};

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub descriptor: DescriptorSection,
    #[serde(default)]
    pub slic: SlicSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub camera: CameraSection,
    #[serde(default)]
    pub baseline: BaselineSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub paths: PathsSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorSection {
    pub block_size: Option<usize>,
    pub min_valid_fraction: Option<f64>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlicSection {
    pub region_count: Option<usize>,
    pub compactness: Option<f64>,
    pub iterations: Option<usize>,
    pub connectivity_min_fraction: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub lr: Option<f64>,
    pub momentum: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub validation_fraction: Option<f64>,
    pub parallel: Option<bool>,
    /// Cap on road training cells; 0 keeps all.
    pub max_road_samples: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSection {
    pub focal_length_px: Option<f64>,
    pub baseline_m: Option<f64>,
    pub camera_height_m: Option<f64>,
    pub horizon_row_v0: Option<f64>,
    pub principal_col_u0: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    pub bin_width: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub width: Option<usize>,
    pub height: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub out: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub rgb: Option<PathBuf>,
    pub disparity: Option<PathBuf>,
}

pub const DEFAULT_SYNTH_SIZE: (usize, usize) = (320, 160);
pub const DEFAULT_MAX_ROAD_SAMPLES: usize = 20_000;
pub const DEFAULT_OUT: &str = "dtex_out";

/// Fully resolved and validated settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub descriptor: DescriptorParams,
    pub slic: SlicParams,
    pub train: TrainConfig,
    pub max_road_samples: usize,
    camera: CameraSection,
    pub baseline: BaselineParams,
    pub synth_size: (usize, usize),
    pub out: PathBuf,
    pub manifest: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub rgb: Option<PathBuf>,
    pub disparity: Option<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub block_size: Option<usize>,
    pub region_count: Option<usize>,
    pub epochs: Option<usize>,
    pub out: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub rgb: Option<PathBuf>,
    pub disparity: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Outcome<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Failure::input(format!("{}: {}", path.display(), e.message())))
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::input(format!("invalid config: {e}")))
    }
}

impl RunConfig {
    pub fn resolve(file: FileConfig, o: Overrides) -> Outcome<Self> {
        let seed = o.seed.or(file.seed).unwrap_or(0);
        let dd = DescriptorParams::default();
        let descriptor = DescriptorParams {
            block_size: o.block_size.or(file.descriptor.block_size).unwrap_or(dd.block_size),
            min_valid_fraction: file.descriptor.min_valid_fraction.unwrap_or(dd.min_valid_fraction),
            threshold: file.descriptor.threshold.unwrap_or(dd.threshold),
        };
        descriptor.validate().map_err(|e| Failure::input(format!("[descriptor] {e}")))?;
        let sd = SlicParams::default();
        let slic = SlicParams {
            region_count: o.region_count.or(file.slic.region_count).unwrap_or(sd.region_count),
            compactness: file.slic.compactness.unwrap_or(sd.compactness),
            iterations: file.slic.iterations.unwrap_or(sd.iterations),
            connectivity_min_fraction: file
                .slic
                .connectivity_min_fraction
                .unwrap_or(sd.connectivity_min_fraction),
        };
        slic.validate().map_err(|e| Failure::input(format!("[slic] {e}")))?;
        let td = TrainConfig::default();
        let t = &file.train;
        let train = TrainConfig {
            lr: t.lr.unwrap_or(td.lr),
            momentum: t.momentum.unwrap_or(td.momentum),
            batch_size: t.batch_size.unwrap_or(td.batch_size),
            epochs: o.epochs.or(t.epochs).unwrap_or(td.epochs),
            seed,
            validation_fraction: t.validation_fraction.unwrap_or(td.validation_fraction),
            parallel: t.parallel.unwrap_or(td.parallel),
        };
        train.validate().map_err(|e| Failure::input(format!("[train] {e}")))?;
        let bd = BaselineParams::default();
        let baseline = BaselineParams {
            bin_width: file.baseline.bin_width.unwrap_or(bd.bin_width),
            tolerance: file.baseline.tolerance.unwrap_or(bd.tolerance),
        };
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(baseline.bin_width) || !(baseline.tolerance.is_finite() && baseline.tolerance >= 0.0) {
            return Err(Failure::input(
                "[baseline] bin_width must be positive and tolerance non-negative",
            ));
        }
        let synth_size = (
            file.synth.width.unwrap_or(DEFAULT_SYNTH_SIZE.0),
            file.synth.height.unwrap_or(DEFAULT_SYNTH_SIZE.1),
        );
        let cfg = Self {
            seed,
            descriptor,
            slic,
            train,
            max_road_samples: t.max_road_samples.unwrap_or(DEFAULT_MAX_ROAD_SAMPLES),
            camera: file.camera,
            baseline,
            synth_size,
            out: o.out.or(file.paths.out).unwrap_or_else(|| DEFAULT_OUT.into()),
            manifest: o.manifest.or(file.paths.manifest),
            checkpoint: o.checkpoint.or(file.paths.checkpoint),
            predictions: o.predictions.or(file.paths.predictions),
            rgb: o.rgb.or(file.paths.rgb),
            disparity: o.disparity.or(file.paths.disparity),
        };
        cfg.camera(synth_size.0, synth_size.1)?;
        Ok(cfg)
    }

    /// Camera for an image of the given size: KITTI-like defaults with any
    /// configured fields replaced.
    pub fn camera(&self, width: usize, height: usize) -> Outcome<CameraModel> {
        let d = CameraModel::kitti_like(width, height);
        let c = &self.camera;
        let cam = CameraModel {
            focal_length_px: c.focal_length_px.unwrap_or(d.focal_length_px),
            baseline_m: c.baseline_m.unwrap_or(d.baseline_m),
            camera_height_m: c.camera_height_m.unwrap_or(d.camera_height_m),
            horizon_row_v0: c.horizon_row_v0.unwrap_or(d.horizon_row_v0),
            principal_col_u0: c.principal_col_u0.unwrap_or(d.principal_col_u0),
        };
        cam.validate().map_err(|e| Failure::input(format!("[camera] {e}")))?;
        Ok(cam)
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, what: &str) -> Outcome<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Failure::input(format!("no {what} given (flag --{what} or [paths] {what})")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str, o: Overrides) -> Outcome<RunConfig> {
        RunConfig::resolve(FileConfig::parse(text)?, o)
    }

    #[test]
    fn empty_file_gives_module_defaults() {
        let c = resolve("", Overrides::default()).unwrap();
        assert_eq!(c.descriptor, DescriptorParams::default());
        assert_eq!(c.slic, SlicParams::default());
        assert_eq!(c.train, TrainConfig::default());
        assert_eq!(c.baseline, BaselineParams::default());
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert_eq!(resolve("[descriptor]\nblock = 3\n", Overrides::default()).unwrap_err().code, 2);
        assert_eq!(resolve("colour = 1\n", Overrides::default()).unwrap_err().code, 2);
        assert_eq!(resolve("[extra]\n", Overrides::default()).unwrap_err().code, 2);
    }

    #[test]
    fn invalid_values_rejected_at_load() {
        for text in [
            "[descriptor]\nblock_size = 2\n",
            "[slic]\nregion_count = 0\n",
            "[train]\nmomentum = 1.5\n",
            "[camera]\nfocal_length_px = -1.0\n",
            "[baseline]\nbin_width = 0.0\n",
        ] {
            assert_eq!(resolve(text, Overrides::default()).unwrap_err().code, 2, "{text}");
        }
    }

    #[test]
    fn flags_override_file() {
        let text = "seed = 4\n[descriptor]\nblock_size = 3\n[paths]\nout = \"a\"\n";
        let o = Overrides {
            seed: Some(9),
            block_size: Some(1),
            out: Some("b".into()),
            ..Overrides::default()
        };
        let c = resolve(text, o).unwrap();
        assert_eq!((c.seed, c.train.seed), (9, 9));
        assert_eq!(c.descriptor.block_size, 1);
        assert_eq!(c.out, PathBuf::from("b"));
        let c = resolve(text, Overrides::default()).unwrap();
        assert_eq!((c.seed, c.descriptor.block_size), (4, 3));
    }

    #[test]
    fn camera_defaults_follow_image_size() {
        let c = resolve("[camera]\nbaseline_m = 0.3\n", Overrides::default()).unwrap();
        let cam = c.camera(300, 90).unwrap();
        assert_eq!(cam.baseline_m, 0.3);
        assert_eq!(cam.horizon_row_v0, 30.0);
        assert_eq!(cam.principal_col_u0, 150.0);
    }
}
