use super::{BuildResult, PfanConfig, LEAKY_SLOPE};
use crate::nn::{Activation, Conv2d, LayerSpec, ParamStore};
use crate::tensor::{Conv2dOptions, Result, Scalar, Tensor};

/// Patch discriminator on a channel-stacked `(condition, candidate)` pair.
///
/// `disc_layers` stride-2 3×3 convolutions (padding 1, LeakyReLU 0.2) with
/// widths `C, 2C, 4C, ...` capped at `8C`, then a stride-1 3×3 convolution
/// to one logit channel. Each stride-2 layer maps an extent `n` to
/// `ceil(n / 2)`.
#[derive(Debug, Clone)]
pub struct PatchGan {
    pub layers: Vec<Conv2d>,
    pub head: Conv2d,
}

impl PatchGan {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, config: &PfanConfig, seed: u64) -> BuildResult<Self> {
        let c = config.base_channels;
        let mut layers = Vec::with_capacity(config.disc_layers);
        let mut c_in = 6;
        for i in 0..config.disc_layers {
            let c_out = c << i.min(3);
            let spec = LayerSpec::conv(c_in, c_out, 3, 1, Activation::LeakyRelu(LEAKY_SLOPE));
            let opts = Conv2dOptions {
                stride: 2,
                padding: 1,
                groups: 1,
            };
            layers.push(Conv2d::with_options(store, &format!("disc.conv{i}"), spec, opts, seed)?);
            c_in = c_out;
        }
        let head = Conv2d::new(
            store,
            "disc.head",
            LayerSpec::conv(c_in, 1, 3, 1, Activation::Identity),
            seed,
        )?;
        Ok(Self { layers, head })
    }

    /// `[6, H, W]` (or batched `[B, 6, H, W]`) to patch logits `[1, h, w]`.
    pub fn forward<T: Scalar>(&self, store: &ParamStore<T>, pair: &Tensor<T>) -> Result<Tensor<T>> {
        let mut x = pair.clone();
        for l in &self.layers {
            x = l.forward(store, &x)?;
        }
        self.head.forward(store, &x)
    }

    /// Stacks condition and candidate images and scores the pair.
    pub fn score<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        condition: &Tensor<T>,
        candidate: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        self.forward(store, &Tensor::concat(&[condition.clone(), candidate.clone()], 0)?)
    }

    pub fn output_extent(&self, n: usize) -> usize {
        (0..self.layers.len()).fold(n, |n, _| n.div_ceil(2))
    }

    /// Side of the input square that one logit depends on.
    pub fn receptive_field(&self) -> usize {
        let mut field = 1;
        let mut jump = 1 << self.layers.len();
        field += 2 * jump;
        for _ in 0..self.layers.len() {
            jump /= 2;
            field += 2 * jump;
        }
        field
    }
}
