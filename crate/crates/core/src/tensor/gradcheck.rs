//! Central finite-difference gradient checking in double precision.
//!
//! For each sampled coordinate the loss is evaluated at `x ± h` and at
//! `x ± h/2`. On a smooth stretch both central differences agree to
//! `O(h²)`. When they disagree beyond [`GradCheckConfig::smooth_tol`] the
//! stencil straddles a kink (LeakyReLU at 0, a max-pool argmax switch) where
//! no finite difference estimates the one-sided derivative autodiff returns;
//! such coordinates are counted in [`GradCheckReport::nonsmooth`] and left
//! out of the error maximum.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Result, Tensor};

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Finite-difference step.
    pub step: f64,
    /// Coordinates checked per input tensor; smaller tensors are checked fully.
    pub max_samples_per_tensor: usize,
    /// Denominator floor for the relative error.
    pub abs_floor: f64,
    /// Relative disagreement between the `h` and `h/2` stencils that marks
    /// a non-differentiable point.
    pub smooth_tol: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-4,
            max_samples_per_tensor: 24,
            abs_floor: 1e-6,
            smooth_tol: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradMismatch {
    pub input: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub nonsmooth: usize,
    pub max_rel_error: f64,
    pub worst: Option<GradMismatch>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.checked > 0 && self.max_rel_error < tol
    }
}

pub fn rel_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Compares autodiff gradients of the scalar `loss(inputs)` against central
/// finite differences for every named input.
pub fn check_gradients<F>(inputs: &[(String, Tensor<f64>)], loss: F, cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>,
{
    let leaves: Vec<Tensor<f64>> = inputs.iter().map(|(_, t)| t.detached_param()).collect();
    let out = loss(&leaves)?;
    out.backward()?;

    let constants: Vec<Tensor<f64>> = leaves.iter().map(Tensor::detach).collect();
    let eval = |which: usize, index: usize, delta: f64| -> Result<f64> {
        let mut args = constants.clone();
        let mut data = constants[which].to_vec();
        data[index] += delta;
        args[which] = Tensor::from_vec(data, constants[which].shape())?;
        Ok(loss(&args)?.item())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport::default();
    let h = cfg.step;
    for (which, ((name, _), leaf)) in inputs.iter().zip(&leaves).enumerate() {
        let analytic = leaf.grad().unwrap_or_else(|| vec![0.0; leaf.numel()]);
        let n = leaf.numel();
        let indices: Vec<usize> = if n <= cfg.max_samples_per_tensor {
            (0..n).collect()
        } else {
            sample(&mut rng, n, cfg.max_samples_per_tensor).into_vec()
        };
        for index in indices {
            let full = (eval(which, index, h)? - eval(which, index, -h)?) / (2.0 * h);
            let half = (eval(which, index, h / 2.0)? - eval(which, index, -h / 2.0)?) / h;
            if rel_error(full, half, cfg.abs_floor) > cfg.smooth_tol {
                report.nonsmooth += 1;
                continue;
            }
            report.checked += 1;
            let err = rel_error(analytic[index], full, cfg.abs_floor);
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some(GradMismatch {
                    input: name.clone(),
                    index,
                    analytic: analytic[index],
                    numeric: full,
                    rel_error: err,
                });
            }
        }
    }
    Ok(report)
}
