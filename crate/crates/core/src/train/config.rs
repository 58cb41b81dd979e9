use std::fmt;

use super::AdvLoss;
use crate::arch::{parse_value as parse, ConfigError, PfanConfig};

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch: usize,
    pub crop: usize,
    pub d_warmup_epochs: usize,
    pub epochs: usize,
    /// Stops after this many optimizer steps when set.
    pub max_steps: Option<usize>,
    pub lambda_l1: f64,
    pub seed: u64,
    pub adv_loss: AdvLoss,
    /// Writes a checkpoint every N steps; 0 keeps only the final one.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            batch: 6,
            crop: 128,
            d_warmup_epochs: 1,
            epochs: 200,
            max_steps: None,
            lambda_l1: 100.0,
            seed: 0,
            adv_loss: AdvLoss::LeastSquares,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn desk() -> Self {
        Self {
            crop: 32,
            ..Self::default()
        }
    }

    pub const KEYS: [&'static str; 12] = [
        "lr",
        "beta1",
        "beta2",
        "batch",
        "crop",
        "d_warmup_epochs",
        "epochs",
        "max_steps",
        "lambda_l1",
        "seed",
        "adv_loss",
        "checkpoint_every",
    ];

    /// Same contract as [`PfanConfig::set`]. `max_steps = 0` clears the limit.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, ConfigError> {
        match key {
            "lr" => self.lr = parse(key, value)?,
            "beta1" => self.beta1 = parse(key, value)?,
            "beta2" => self.beta2 = parse(key, value)?,
            "batch" => self.batch = parse(key, value)?,
            "crop" => self.crop = parse(key, value)?,
            "d_warmup_epochs" => self.d_warmup_epochs = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "max_steps" => self.max_steps = Some(parse::<usize>(key, value)?).filter(|&n| n > 0),
            "lambda_l1" => self.lambda_l1 = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "adv_loss" => self.adv_loss = parse(key, value)?,
            "checkpoint_every" => self.checkpoint_every = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self, model: &PfanConfig) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Constraint(m));
        if self.batch == 0 {
            return fail("batch must be at least 1".into());
        }
        if self.crop < model.lat_window {
            return fail(format!(
                "crop {} is smaller than lat_window {}",
                self.crop, model.lat_window
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr {} must be positive", self.lr));
        }
        for (k, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return fail(format!("{k} {b} must lie in [0, 1)"));
            }
        }
        if !(self.lambda_l1 >= 0.0 && self.lambda_l1.is_finite()) {
            return fail(format!("lambda_l1 {} must be non-negative", self.lambda_l1));
        }
        Ok(())
    }
}

impl fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lr={}", self.lr)?;
        writeln!(f, "beta1={}", self.beta1)?;
        writeln!(f, "beta2={}", self.beta2)?;
        writeln!(f, "batch={}", self.batch)?;
        writeln!(f, "crop={}", self.crop)?;
        writeln!(f, "d_warmup_epochs={}", self.d_warmup_epochs)?;
        writeln!(f, "epochs={}", self.epochs)?;
        writeln!(f, "max_steps={}", self.max_steps.unwrap_or(0))?;
        writeln!(f, "lambda_l1={}", self.lambda_l1)?;
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "adv_loss={}", self.adv_loss)?;
        writeln!(f, "checkpoint_every={}", self.checkpoint_every)
    }
}
