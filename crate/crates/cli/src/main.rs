//! `dtex`: synthetic data, texture maps, superpixels, training, inference,
//! evaluation and gradient checks from the command line.
//!
//! Exit codes: 0 success, 1 computation failure, 2 bad input or config.

mod commands;
mod config;
mod failure;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Task;
use config::{FileConfig, Overrides, RunConfig};
use failure::Outcome;

#[derive(Debug, Parser)]
#[command(name = "dtex", version, about = "Ground and road detection with a disparity texture descriptor")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Descriptor block side.
    #[arg(long, global = true, value_parser = ["1", "3"])]
    block_size: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskArg {
    Ground,
    Road,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Ground => Task::Ground,
            TaskArg::Road => Task::Road,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic planar scene (or `random` scenes) with ground truth.
    Synth {
        /// six-planes, flat-ground, lateral-slope, longitudinal-slope or random.
        #[arg(long, default_value = "six-planes")]
        scene: String,
        /// Number of random scenes, seeded from --seed upwards.
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Texture map (PFM and PNG) and its binarization for one disparity map.
    Texture {
        #[arg(long)]
        disparity: Option<PathBuf>,
    },
    /// SLIC superpixels for one RGB image.
    Slic {
        #[arg(long)]
        rgb: Option<PathBuf>,
        /// Requested superpixel count.
        #[arg(long)]
        regions: Option<usize>,
    },
    /// Train the ground or road network on a manifest.
    Train {
        #[arg(long, value_enum, default_value = "ground")]
        task: TaskArg,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Predict masks for every manifest entry with a trained checkpoint.
    Infer {
        #[arg(long, value_enum, default_value = "ground")]
        task: TaskArg,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare saved predictions and the V-disparity baseline to ground truth.
    Eval {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Directory holding `<stem>_pred.png` files (default: --out).
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Finite-difference gradient checks of both architectures.
    Gradcheck,
}

fn run(cli: Cli) -> Outcome<String> {
    let file = match &cli.common.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut o = Overrides {
        seed: cli.common.seed,
        block_size: cli.common.block_size.as_deref().map(|b| b.parse().expect("validated by clap")),
        out: cli.common.out,
        ..Overrides::default()
    };
    match &cli.command {
        Command::Texture { disparity } => o.disparity = disparity.clone(),
        Command::Slic { rgb, regions } => {
            o.rgb = rgb.clone();
            o.region_count = *regions;
        }
        Command::Train { manifest, epochs, .. } => {
            o.manifest = manifest.clone();
            o.epochs = *epochs;
        }
        Command::Infer { manifest, checkpoint, .. } => {
            o.manifest = manifest.clone();
            o.checkpoint = checkpoint.clone();
        }
        Command::Eval { manifest, predictions } => {
            o.manifest = manifest.clone();
            o.predictions = predictions.clone();
        }
        Command::Synth { .. } | Command::Gradcheck => {}
    }
    let cfg = RunConfig::resolve(file, o)?;
    match cli.command {
        Command::Synth { scene, count } => commands::synth(&cfg, &scene, count),
        Command::Texture { .. } => commands::texture(&cfg),
        Command::Slic { .. } => commands::slic(&cfg),
        Command::Train { task, .. } => commands::train_cmd(&cfg, task.into()),
        Command::Infer { task, .. } => commands::infer(&cfg, task.into()),
        Command::Eval { .. } => commands::eval(&cfg),
        Command::Gradcheck => commands::gradcheck(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("dtex: {f}");
            ExitCode::from(f.code)
        }
    }
}
