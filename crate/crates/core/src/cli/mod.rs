//! `pfan` command-line front end.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{parse_assignment, RunConfig, PATH_KEYS};

use crate::arch::{generator_param_count, ConfigError};
use crate::bench::run_attention_bench;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::{config_digest, evaluate_dataset};
use crate::model::Desmoker;
use crate::synth::{self, generate_dataset, load_sources, procedural_tissue, DensityTier, Manifest, Source, Split};
use crate::train::train;

const PRECEDENCE: &str = "Settings resolve as: command-line flag > config file > built-in default. \
Config files hold `key = value` lines (`#` starts a comment); unknown keys are rejected. \
PFAN_THREADS caps the number of worker threads.";

#[derive(Debug, Parser)]
#[command(name = "pfan", version, about = "Surgical smoke removal: synthesis, training, inference, evaluation", after_help = PRECEDENCE)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Config file of `key = value` lines
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Start from the small desk-scale model and 32-pixel crops
    #[arg(long)]
    pub desk: bool,
    /// Any config key, e.g. `--set n_mbi=2` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_assignment)]
    pub set: Vec<(String, String)>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render smoky/clean training pairs and a manifest
    #[command(after_help = PRECEDENCE)]
    Synth {
        #[command(flatten)]
        common: Common,
        /// Folder of clean PNG images
        #[arg(long, value_name = "DIR", conflicts_with = "procedural")]
        sources: Option<PathBuf>,
        /// Use N procedurally generated tissue images instead of a folder
        #[arg(long, value_name = "N")]
        procedural: Option<usize>,
        /// Side length of procedural images
        #[arg(long, value_name = "PX", default_value_t = 64)]
        size: usize,
        /// Number of pairs (default: one per source image)
        #[arg(long, value_name = "N")]
        pairs: Option<usize>,
        /// Smoke density tier: light, medium, heavy or random
        #[arg(long, default_value = "random")]
        tier: DensityTier,
    },
    /// Train generator and discriminator on a synthesized dataset
    #[command(after_help = PRECEDENCE)]
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset root containing manifest.tsv
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        /// Adversarial epochs after the discriminator warmup
        #[arg(long, value_name = "N")]
        epochs: Option<usize>,
        /// Stop after N optimizer steps
        #[arg(long, value_name = "N")]
        max_steps: Option<usize>,
        /// Images per batch
        #[arg(long, value_name = "N")]
        batch: Option<usize>,
        /// Random crop side length
        #[arg(long, value_name = "PX")]
        crop: Option<usize>,
        /// Adam learning rate
        #[arg(long, value_name = "LR")]
        lr: Option<f64>,
    },
    /// Remove smoke from PNG images with a trained generator
    #[command(after_help = PRECEDENCE)]
    Desmoke {
        #[command(flatten)]
        common: Common,
        /// Generator weight file
        #[arg(long, value_name = "FILE")]
        weights: Option<PathBuf>,
        /// Input PNG files; outputs keep their file names
        #[arg(required = true, value_name = "PNG")]
        inputs: Vec<PathBuf>,
    },
    /// Score a generator on one split of a dataset
    #[command(after_help = PRECEDENCE)]
    Eval {
        #[command(flatten)]
        common: Common,
        /// Dataset root containing manifest.tsv
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        /// Generator weight file; without one the smoky input itself is scored
        #[arg(long, value_name = "FILE")]
        weights: Option<PathBuf>,
        /// Split to evaluate: train, val or test
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Time and count operations of axial versus global attention
    #[command(after_help = PRECEDENCE)]
    Bench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated square map sides
        #[arg(long, value_name = "LIST", default_value = "8,16,32,64", value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Channel count; queries, keys and values get half each
        #[arg(long, value_name = "C", default_value_t = 16)]
        channels: usize,
        /// Repetitions per kernel and size (at least 5)
        #[arg(long, value_name = "N", default_value_t = 5)]
        reps: usize,
    },
    /// Print the generator parameter count
    #[command(after_help = PRECEDENCE)]
    Params {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Synth { common, .. }
            | Command::Train { common, .. }
            | Command::Desmoke { common, .. }
            | Command::Eval { common, .. }
            | Command::Bench { common, .. }
            | Command::Params { common } => common,
        }
    }

    /// Flag values as config assignments, ordered so later ones win.
    fn overrides(&self) -> Vec<(String, String)> {
        let c = self.common();
        let mut v = c.set.clone();
        let mut push = |k: &str, val: Option<String>| {
            if let Some(val) = val {
                v.push((k.to_string(), val));
            }
        };
        push("seed", c.seed.map(|s| s.to_string()));
        push("out", c.out.as_ref().map(|p| p.display().to_string()));
        match self {
            Command::Synth { sources, .. } => push("sources", sources.as_ref().map(|p| p.display().to_string())),
            Command::Train {
                data,
                epochs,
                max_steps,
                batch,
                crop,
                lr,
                ..
            } => {
                push("data", data.as_ref().map(|p| p.display().to_string()));
                push("epochs", epochs.map(|n| n.to_string()));
                push("max_steps", max_steps.map(|n| n.to_string()));
                push("batch", batch.map(|n| n.to_string()));
                push("crop", crop.map(|n| n.to_string()));
                push("lr", lr.map(|n| n.to_string()));
            }
            Command::Desmoke { weights, .. } => push("weights", weights.as_ref().map(|p| p.display().to_string())),
            Command::Eval { data, weights, .. } => {
                push("data", data.as_ref().map(|p| p.display().to_string()));
                push("weights", weights.as_ref().map(|p| p.display().to_string()));
            }
            Command::Bench { .. } | Command::Params { .. } => {}
        }
        v
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Sets the worker pool size from `PFAN_THREADS` when present.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("PFAN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError::Value {
            key: "PFAN_THREADS".into(),
            value: raw.clone(),
            reason: "expected a positive integer".into(),
        })?;
    // a pool may already exist when embedded; keeping it is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs one parsed command, writing human-readable output to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let cmd = &cli.command;
    let common = cmd.common();
    let cfg = RunConfig::resolve(common.desk, common.config.as_deref(), &cmd.overrides())?;
    let mut say = |s: String| stdout.write_all(s.as_bytes()).map_err(|e| Error::io("<stdout>", e));
    match cmd {
        Command::Synth {
            procedural,
            size,
            pairs,
            tier,
            ..
        } => {
            let out = cfg.require(&cfg.out, "out")?;
            let sources: Vec<Source> = match procedural {
                Some(n) => (0..*n)
                    .map(|i| Source {
                        name: format!("procedural_{i:04}"),
                        image: procedural_tissue(cfg.seed().wrapping_add(i as u64), *size, *size),
                    })
                    .collect(),
                None => load_sources(cfg.require(&cfg.sources, "sources")?)?,
            };
            let n = pairs.unwrap_or(sources.len());
            let manifest = generate_dataset(&sources, &out, n, cfg.seed(), *tier)?;
            let count = |s| manifest.split(s).count();
            say(format!(
                "wrote {} pairs to {} (train {}, val {}, test {})\n",
                manifest.rows.len(),
                out.display(),
                count(Split::Train),
                count(Split::Val),
                count(Split::Test)
            ))
        }
        Command::Train { .. } => {
            let data = cfg.require(&cfg.data, "data")?;
            let out = cfg.require(&cfg.out, "out")?;
            let manifest = Manifest::load(data.join(synth::MANIFEST_FILE))?;
            create_dir(&out)?;
            write_file(&out.join("run_config.txt"), &cfg.to_text())?;
            let summary = train(&data, &manifest, &cfg.model, &cfg.train, &out)?;
            say(format!(
                "{} steps; training PSNR {:.3} dB -> {:.3} dB; weights {}\n",
                summary.steps,
                summary.baseline_psnr,
                summary.output_psnr,
                summary.final_weights.display()
            ))
        }
        Command::Desmoke { inputs, .. } => {
            let weights = cfg.require(&cfg.weights, "weights")?;
            let out = cfg.require(&cfg.out, "out")?;
            let model = Desmoker::load(&weights)?;
            create_dir(&out)?;
            for input in inputs {
                let img = Image::load_png(input)?;
                let name = input
                    .file_name()
                    .ok_or_else(|| Error::Data(format!("{} has no file name", input.display())))?;
                let dest = out.join(name);
                model.desmoke(&img)?.save_png(&dest)?;
                say(format!("{}\n", dest.display()))?;
            }
            Ok(())
        }
        Command::Eval { split, .. } => {
            let data = cfg.require(&cfg.data, "data")?;
            let out = cfg.require(&cfg.out, "out")?;
            let manifest = Manifest::load(data.join(synth::MANIFEST_FILE))?;
            let report = match &cfg.weights {
                Some(w) => {
                    let model = Desmoker::load(w)?;
                    let digest = config_digest(&model.config.to_string());
                    evaluate_dataset(&data, &manifest, *split, model.param_count(), digest, |img| {
                        model.desmoke(img)
                    })?
                }
                None => evaluate_dataset(&data, &manifest, *split, 0, config_digest(""), |img| Ok(img.clone()))?,
            };
            create_dir(&out)?;
            write_file(&out.join("report.json"), &report.to_json())?;
            let table = report.to_table();
            write_file(&out.join("report.txt"), &table)?;
            say(table)
        }
        Command::Bench {
            sizes, channels, reps, ..
        } => {
            let out = cfg.require(&cfg.out, "out")?;
            let square: Vec<(usize, usize)> = sizes.iter().map(|&n| (n, n)).collect();
            let run = run_attention_bench(&square, *channels, *reps, cfg.seed())?;
            create_dir(&out)?;
            write_file(&out.join("bench.jsonl"), &run.to_jsonl())?;
            let table = run.to_table();
            write_file(&out.join("bench.txt"), &table)?;
            say(table)
        }
        Command::Params { .. } => say(format!("{}\n", generator_param_count(&cfg.model)?)),
    }
}

/// Process exit status for an error class.
pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        "io" => 3,
        "image" => 4,
        "config" => 5,
        "shape" => 6,
        "weights" => 7,
        _ => 8,
    }
}

/// One-line `error[class]: message` form.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace('\n', " ");
    format!("error[{}]: {msg}", e.class())
}
