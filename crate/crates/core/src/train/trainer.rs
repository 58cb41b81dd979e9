use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{gan_losses, Adam, TrainConfig};
use crate::arch::{Generator, PatchGan, PfanConfig};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::psnr;
use crate::nn::{derive_seed, save_weights, ParamStore};
use crate::synth::{Manifest, Split};
use crate::tensor::{Scalar, Tensor};

/// Smoky input and its clean target, both `[3, H, W]`.
#[derive(Debug, Clone)]
pub struct Pair<T: Scalar> {
    pub syn: Tensor<T>,
    pub clean: Tensor<T>,
}

impl<T: Scalar> Pair<T> {
    pub fn from_images(syn: &Image, clean: &Image) -> Result<Self> {
        if !syn.same_size(clean) {
            return Err(Error::Data("pair images differ in size".into()));
        }
        Ok(Self {
            syn: syn.to_tensor(),
            clean: clean.to_tensor(),
        })
    }

    pub fn height(&self) -> usize {
        self.syn.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.syn.shape()[2]
    }

    /// The same `size × size` window of both images.
    pub fn crop(&self, top: usize, left: usize, size: usize) -> Result<Self> {
        Ok(Self {
            syn: self.syn.crop_at(top, left, size, size)?,
            clean: self.clean.crop_at(top, left, size, size)?,
        })
    }
}

pub fn load_pairs<T: Scalar>(root: impl AsRef<Path>, manifest: &Manifest, split: Split) -> Result<Vec<Pair<T>>> {
    let root = root.as_ref();
    manifest
        .split(split)
        .map(|row| {
            Pair::from_images(
                &Image::load_png(root.join(&row.syn))?,
                &Image::load_png(root.join(&row.clean))?,
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Warmup,
    Adversarial,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Warmup => "warmup",
            Phase::Adversarial => "adversarial",
        })
    }
}

/// Batch-mean losses of one step plus parameter checksums taken around each
/// update. During warmup `loss_g` and `l1` are measured but not optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub phase: Phase,
    pub loss_d: f64,
    pub loss_g: f64,
    pub l1: f64,
    /// Generator checksum before and after the discriminator update.
    pub gen_around_d: [String; 2],
    /// Discriminator checksum before and after the generator update.
    pub disc_around_g: Option<[String; 2]>,
}

impl StepRecord {
    pub fn finite(&self) -> bool {
        self.loss_d.is_finite() && self.loss_g.is_finite() && self.l1.is_finite()
    }

    pub fn log_line(&self) -> String {
        format!("{}\t{:e}\t{:e}\t{:e}", self.step, self.loss_d, self.loss_g, self.l1)
    }
}

pub const LOG_HEADER: &str = "step\tloss_D\tloss_G\tl1";

/// Copy of `store` whose tensors are fresh leaves, so one image's backward
/// pass cannot touch another's gradients.
fn local_leaves<T: Scalar>(store: &ParamStore<T>) -> ParamStore<T> {
    store.with_tensors(store.iter().map(|(_, t)| t.detached_param()).collect())
}

fn grads_of<T: Scalar>(store: &ParamStore<T>) -> Vec<Vec<T>> {
    store
        .iter()
        .map(|(_, t)| t.grad().unwrap_or_else(|| vec![T::zero(); t.numel()]))
        .collect()
}

struct ImageStep<T> {
    loss_d: f64,
    loss_g: f64,
    l1: f64,
    grads: Vec<Vec<T>>,
}

/// Sums per-image results in batch order and averages.
fn reduce<T: Scalar>(parts: Vec<ImageStep<T>>) -> ImageStep<T> {
    let inv = 1.0 / parts.len() as f64;
    let mut iter = parts.into_iter();
    let mut acc = iter.next().expect("non-empty batch");
    for p in iter {
        acc.loss_d += p.loss_d;
        acc.loss_g += p.loss_g;
        acc.l1 += p.l1;
        for (a, g) in acc.grads.iter_mut().zip(&p.grads) {
            a.iter_mut().zip(g).for_each(|(x, &y)| *x += y);
        }
    }
    let s = T::lit(inv);
    acc.grads.iter_mut().flatten().for_each(|x| *x *= s);
    acc.loss_d *= inv;
    acc.loss_g *= inv;
    acc.l1 *= inv;
    acc
}

/// Generator, discriminator and their optimizers.
pub struct Trainer<T: Scalar> {
    pub model: PfanConfig,
    pub config: TrainConfig,
    pub generator: Generator,
    pub disc: PatchGan,
    pub gen_store: ParamStore<T>,
    pub disc_store: ParamStore<T>,
    gen_opt: Adam<T>,
    disc_opt: Adam<T>,
    rng: ChaCha8Rng,
    pub step: usize,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: &PfanConfig, config: &TrainConfig) -> Result<Self> {
        model.validate()?;
        config.validate(model)?;
        let mut gen_store = ParamStore::new();
        let generator = Generator::new(&mut gen_store, model, config.seed)?;
        let mut disc_store = ParamStore::new();
        let disc = PatchGan::new(&mut disc_store, model, config.seed)?;
        let opt = |s: &ParamStore<T>| Adam::new(s, config.lr, config.beta1, config.beta2);
        Ok(Self {
            model: model.clone(),
            config: config.clone(),
            gen_opt: opt(&gen_store),
            disc_opt: opt(&disc_store),
            generator,
            disc,
            gen_store,
            disc_store,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "train.data")),
            step: 0,
        })
    }

    /// Total optimizer steps `run` will take on `n` pairs.
    pub fn planned_steps(&self, n: usize) -> usize {
        let per_epoch = n.div_ceil(self.config.batch);
        let total = per_epoch * (self.config.d_warmup_epochs + self.config.epochs);
        self.config.max_steps.map_or(total, |m| m.min(total))
    }

    /// Warmup epochs of discriminator-only steps, then `epochs` epochs that
    /// update the discriminator and then the generator on every batch.
    /// `on_step` runs after each step and may abort training with an error.
    pub fn run<F>(&mut self, data: &[Pair<T>], mut on_step: F) -> Result<Vec<StepRecord>>
    where
        F: FnMut(&StepRecord, &Self) -> Result<()>,
    {
        if data.is_empty() {
            return Err(Error::Data("training split is empty".into()));
        }
        let crop = self.config.crop;
        if let Some(p) = data.iter().find(|p| p.height() < crop || p.width() < crop) {
            return Err(Error::Data(format!(
                "crop {crop} exceeds a {}x{} training image",
                p.height(),
                p.width()
            )));
        }
        let limit = self.planned_steps(data.len());
        let mut records = Vec::with_capacity(limit);
        let mut order: Vec<usize> = (0..data.len()).collect();
        for epoch in 0..self.config.d_warmup_epochs + self.config.epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(self.config.batch) {
                if records.len() == limit {
                    return Ok(records);
                }
                let batch = chunk
                    .iter()
                    .map(|&i| {
                        let p = &data[i];
                        let top = self.rng.random_range(0..=p.height() - crop);
                        let left = self.rng.random_range(0..=p.width() - crop);
                        p.crop(top, left, crop)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let phase = if epoch < self.config.d_warmup_epochs {
                    Phase::Warmup
                } else {
                    Phase::Adversarial
                };
                let rec = self.train_step(&batch, epoch, phase)?;
                on_step(&rec, self)?;
                records.push(rec);
            }
        }
        Ok(records)
    }

    /// One discriminator update and, outside warmup, one generator update.
    pub fn train_step(&mut self, batch: &[Pair<T>], epoch: usize, phase: Phase) -> Result<StepRecord> {
        let gen_before = self.gen_store.checksum();
        let d = self.disc_grads(batch)?;
        self.disc_opt.step(&mut self.disc_store, &d.grads);
        let gen_around_d = [gen_before, self.gen_store.checksum()];
        let (loss_g, l1, disc_around_g) = match phase {
            Phase::Warmup => (d.loss_g, d.l1, None),
            Phase::Adversarial => {
                let before = self.disc_store.checksum();
                let g = self.gen_grads(batch)?;
                self.gen_opt.step(&mut self.gen_store, &g.grads);
                (g.loss_g, g.l1, Some([before, self.disc_store.checksum()]))
            }
        };
        self.step += 1;
        Ok(StepRecord {
            step: self.step,
            epoch,
            phase,
            loss_d: d.loss_d,
            loss_g,
            l1,
            gen_around_d,
            disc_around_g,
        })
    }

    fn disc_grads(&self, batch: &[Pair<T>]) -> Result<ImageStep<T>> {
        let gen = self.gen_store.frozen();
        let cfg = &self.config;
        let parts = batch
            .par_iter()
            .map(|p| {
                let local = local_leaves(&self.disc_store);
                let fake = self.generator.forward(&gen, &p.syn)?;
                let d_real = self.disc.score(&local, &p.syn, &p.clean)?;
                let d_fake = self.disc.score(&local, &p.syn, &fake)?;
                let (loss_d, loss_g, l1) = gan_losses(cfg.adv_loss, &d_real, &d_fake, &fake, &p.clean, cfg.lambda_l1)?;
                loss_d.backward()?;
                Ok(ImageStep {
                    loss_d: loss_d.item().f64(),
                    loss_g: loss_g.item().f64(),
                    l1: l1.item().f64(),
                    grads: grads_of(&local),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(reduce(parts))
    }

    fn gen_grads(&self, batch: &[Pair<T>]) -> Result<ImageStep<T>> {
        let disc = self.disc_store.frozen();
        let cfg = &self.config;
        let parts = batch
            .par_iter()
            .map(|p| {
                let local = local_leaves(&self.gen_store);
                let fake = self.generator.forward(&local, &p.syn)?;
                let d_real = self.disc.score(&disc, &p.syn, &p.clean)?;
                let d_fake = self.disc.score(&disc, &p.syn, &fake)?;
                let (loss_d, loss_g, l1) = gan_losses(cfg.adv_loss, &d_real, &d_fake, &fake, &p.clean, cfg.lambda_l1)?;
                loss_g.backward()?;
                Ok(ImageStep {
                    loss_d: loss_d.item().f64(),
                    loss_g: loss_g.item().f64(),
                    l1: l1.item().f64(),
                    grads: grads_of(&local),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(reduce(parts))
    }

    /// Mean PSNR of `(syn, clean)` and of `(infer(syn), clean)` over `data`.
    pub fn evaluate_psnr(&self, data: &[Pair<T>]) -> Result<(f64, f64)> {
        let rows = data
            .par_iter()
            .map(|p| {
                let clean = Image::from_tensor(&p.clean)?;
                let out = Image::from_tensor(&self.generator.infer(&self.gen_store, &p.syn)?)?;
                Ok((psnr(&Image::from_tensor(&p.syn)?, &clean)?, psnr(&out, &clean)?))
            })
            .collect::<Result<Vec<(f64, f64)>>>()?;
        let n = rows.len() as f64;
        Ok((
            rows.iter().map(|r| r.0).sum::<f64>() / n,
            rows.iter().map(|r| r.1).sum::<f64>() / n,
        ))
    }

    pub fn checkpoint_metadata(&self) -> String {
        self.model.to_string()
    }

    /// Writes `gen_{tag}.pfw` and `disc_{tag}.pfw` into `dir`.
    pub fn save_checkpoint(&self, dir: &Path, tag: &str) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = self.checkpoint_metadata();
        let gen = dir.join(format!("gen_{tag}.pfw"));
        save_weights(&self.gen_store, &meta, &gen)?;
        save_weights(&self.disc_store, &meta, dir.join(format!("disc_{tag}.pfw")))?;
        Ok(gen)
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub steps: usize,
    pub final_weights: PathBuf,
    pub log: PathBuf,
    pub baseline_psnr: f64,
    pub output_psnr: f64,
}

/// Trains on the manifest's train split, writing `train_log.tsv` and
/// `checkpoints/` under `out_dir`.
pub fn train(
    root: impl AsRef<Path>,
    manifest: &Manifest,
    model: &PfanConfig,
    config: &TrainConfig,
    out_dir: impl AsRef<Path>,
) -> Result<TrainSummary> {
    let out = out_dir.as_ref();
    let data = load_pairs::<f32>(root, manifest, Split::Train)?;
    let mut trainer = Trainer::new(model, config)?;
    let ckpt = out.join("checkpoints");
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let log_path = out.join("train_log.tsv");
    let mut log = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    writeln!(log, "{LOG_HEADER}").map_err(|e| Error::io(&log_path, e))?;
    let every = config.checkpoint_every;
    let records = trainer.run(&data, |rec, t| {
        writeln!(log, "{}", rec.log_line()).map_err(|e| Error::io(&log_path, e))?;
        if !rec.finite() {
            return Err(Error::Data(format!("non-finite loss at step {}", rec.step)));
        }
        if every > 0 && rec.step % every == 0 {
            t.save_checkpoint(&ckpt, &format!("{:06}", rec.step))?;
        }
        Ok(())
    })?;
    let final_weights = trainer.save_checkpoint(&ckpt, "final")?;
    let (baseline_psnr, output_psnr) = trainer.evaluate_psnr(&data)?;
    Ok(TrainSummary {
        steps: records.len(),
        final_weights,
        log: log_path,
        baseline_psnr,
        output_psnr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{composite, procedural_tissue, render_smoke_frame, SmokeParams};

    fn pairs(n: usize, size: usize) -> Vec<Pair<f32>> {
        (0..n)
            .map(|i| {
                let clean = procedural_tissue(i as u64, size, size).quantized();
                let params = SmokeParams {
                    density: 0.6,
                    seed: i as u64,
                    ..SmokeParams::default()
                };
                let smoke = render_smoke_frame(&params, size, size).unwrap();
                let syn = composite(&clean, &smoke).unwrap().quantized();
                Pair::from_images(&syn, &clean).unwrap()
            })
            .collect()
    }

    fn tiny() -> (PfanConfig, TrainConfig) {
        let model = PfanConfig {
            base_channels: 4,
            mbi_groups: 4,
            n_mbi: 1,
            n_lat: 1,
            lat_window: 4,
            disc_layers: 2,
            ..PfanConfig::default()
        };
        let train = TrainConfig {
            batch: 2,
            crop: 8,
            epochs: 2,
            seed: 5,
            ..TrainConfig::desk()
        };
        (model, train)
    }

    #[test]
    fn identical_seeds_give_identical_logs() {
        let (model, cfg) = tiny();
        let data = pairs(3, 12);
        let run = || {
            let mut t = Trainer::<f32>::new(&model, &cfg).unwrap();
            let recs = t.run(&data, |_, _| Ok(())).unwrap();
            (recs, t.gen_store.checksum())
        };
        let (a, ga) = run();
        let (b, gb) = run();
        assert_eq!(a.len(), 6);
        assert_eq!(a, b);
        assert_eq!(ga, gb);
    }

    #[test]
    fn freezing_is_literal() {
        let (model, cfg) = tiny();
        let mut t = Trainer::<f32>::new(&model, &cfg).unwrap();
        let recs = t.run(&pairs(3, 12), |_, _| Ok(())).unwrap();
        assert!(recs.iter().all(|r| r.finite()));
        for r in &recs {
            assert_eq!(r.gen_around_d[0], r.gen_around_d[1], "step {}", r.step);
            match (r.phase, &r.disc_around_g) {
                (Phase::Warmup, None) => {}
                (Phase::Adversarial, Some([a, b])) => assert_eq!(a, b, "step {}", r.step),
                other => panic!("{other:?}"),
            }
        }
        assert_eq!(recs.iter().filter(|r| r.phase == Phase::Warmup).count(), 2);
        let last = recs.last().unwrap();
        assert_ne!(
            last.gen_around_d[0],
            Trainer::<f32>::new(&model, &cfg).unwrap().gen_store.checksum()
        );
    }

    #[test]
    fn max_steps_and_errors() {
        let (model, mut cfg) = tiny();
        cfg.max_steps = Some(3);
        let mut t = Trainer::<f32>::new(&model, &cfg).unwrap();
        assert_eq!(t.run(&pairs(3, 12), |_, _| Ok(())).unwrap().len(), 3);
        assert!(t.run(&[], |_, _| Ok(())).is_err());
        let small = pairs(1, 8)[0].crop(0, 0, 6).unwrap();
        assert!(t.run(&[small], |_, _| Ok(())).is_err());
    }

    #[test]
    fn crops_share_offsets() {
        let p = pairs(1, 12).remove(0);
        let c = p.crop(3, 2, 8).unwrap();
        assert_eq!(c.syn.data(), p.syn.crop_at(3, 2, 8, 8).unwrap().data());
        assert_eq!(c.clean.data(), p.clean.crop_at(3, 2, 8, 8).unwrap().data());
    }

    #[test]
    fn train_writes_log_and_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let (model, mut cfg) = tiny();
        cfg.checkpoint_every = 2;
        cfg.epochs = 10;
        cfg.max_steps = Some(4);
        let src = dir.path().join("src");
        fs::create_dir_all(&src).unwrap();
        for i in 0..4 {
            procedural_tissue(i, 12, 12)
                .save_png(src.join(format!("{i}.png")))
                .unwrap();
        }
        let sources = crate::synth::load_sources(&src).unwrap();
        let data = dir.path().join("data");
        let manifest =
            crate::synth::generate_dataset(&sources, &data, 4, 1, crate::synth::DensityTier::Medium).unwrap();
        let summary = train(&data, &manifest, &model, &cfg, dir.path().join("run")).unwrap();
        assert_eq!(summary.steps, 4);
        let log = fs::read_to_string(&summary.log).unwrap();
        assert_eq!(log.lines().next(), Some(LOG_HEADER));
        assert_eq!(log.lines().count(), 5);
        let ckpt = dir.path().join("run/checkpoints");
        for f in ["gen_000002.pfw", "disc_000004.pfw", "gen_final.pfw"] {
            assert!(ckpt.join(f).exists(), "{f}");
        }
        let (store, meta) = crate::nn::load_weights::<f32>(&summary.final_weights).unwrap();
        assert_eq!(PfanConfig::from_kv(&meta).unwrap(), model);
        assert!(store.count_params() > 0);
    }
}
