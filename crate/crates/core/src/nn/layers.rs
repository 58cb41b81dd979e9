use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{derive_seed, ParamId, ParamStore, WeightsError, INIT_STD};
use crate::tensor::{self, Conv2dOptions, Scalar, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    Pointwise,
    Depthwise,
    Linear,
    Norm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Gelu,
    LeakyRelu(f64),
    Sigmoid,
}

impl Activation {
    pub fn apply<T: Scalar>(self, x: &Tensor<T>) -> Tensor<T> {
        match self {
            Activation::Identity => x.clone(),
            Activation::Gelu => x.gelu(),
            Activation::LeakyRelu(s) => x.leaky_relu(s),
            Activation::Sigmoid => x.sigmoid(),
        }
    }
}

/// Shape and activation of one parameterized layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub groups: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn conv(c_in: usize, c_out: usize, kernel: usize, groups: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Conv,
            in_channels: c_in,
            out_channels: c_out,
            kernel,
            groups,
            activation,
        }
    }

    pub fn pointwise(c_in: usize, c_out: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Pointwise,
            kernel: 1,
            groups: 1,
            ..Self::conv(c_in, c_out, 1, 1, activation)
        }
    }

    pub fn depthwise(channels: usize, kernel: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Depthwise,
            ..Self::conv(channels, channels, kernel, channels, activation)
        }
    }

    pub fn linear(c_in: usize, c_out: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Linear,
            ..Self::conv(c_in, c_out, 1, 1, activation)
        }
    }

    pub fn norm(channels: usize) -> Self {
        Self {
            kind: LayerKind::Norm,
            ..Self::conv(channels, channels, 1, 1, Activation::Identity)
        }
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        let bad = |msg: String| Err(TensorError::Invalid { op: "layer_spec", msg });
        if self.in_channels == 0 || self.out_channels == 0 || self.kernel == 0 || self.groups == 0 {
            return bad(format!("all extents must be positive: {self:?}"));
        }
        if !self.in_channels.is_multiple_of(self.groups) || !self.out_channels.is_multiple_of(self.groups) {
            return bad(format!(
                "groups {} must divide {} and {}",
                self.groups, self.in_channels, self.out_channels
            ));
        }
        if self.kernel.is_multiple_of(2) {
            return bad(format!("kernel {} must be odd", self.kernel));
        }
        match self.kind {
            LayerKind::Depthwise if self.groups != self.in_channels || self.in_channels != self.out_channels => {
                bad("depthwise layers need groups == in == out".into())
            }
            LayerKind::Pointwise | LayerKind::Linear | LayerKind::Norm if self.kernel != 1 => {
                bad(format!("{:?} layers have kernel 1", self.kind))
            }
            LayerKind::Norm if self.in_channels != self.out_channels => bad("norm keeps channel count".into()),
            _ => Ok(()),
        }
    }

    /// Shapes of (weight, bias) tensors.
    pub fn param_shapes(&self) -> (Vec<usize>, Vec<usize>) {
        match self.kind {
            LayerKind::Conv | LayerKind::Pointwise | LayerKind::Depthwise => (
                vec![
                    self.out_channels,
                    self.in_channels / self.groups,
                    self.kernel,
                    self.kernel,
                ],
                vec![self.out_channels],
            ),
            LayerKind::Linear => (vec![self.in_channels, self.out_channels], vec![self.out_channels]),
            LayerKind::Norm => (vec![self.in_channels], vec![self.in_channels]),
        }
    }

    pub fn param_count(&self) -> usize {
        let (w, b) = self.param_shapes();
        w.iter().product::<usize>() + b.iter().product::<usize>()
    }

    /// Initial `(weight, bias)` values: weights ~ N(0, 0.02²) and zero biases;
    /// norms start at gamma = 1, beta = 0. Pure in `(self, seed)`.
    pub fn init<T: Scalar>(&self, seed: u64) -> Result<(Tensor<T>, Tensor<T>), TensorError> {
        self.validate()?;
        let (ws, bs) = self.param_shapes();
        let n: usize = ws.iter().product();
        let w = match self.kind {
            LayerKind::Norm => vec![T::one(); n],
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let normal = Normal::new(0.0, INIT_STD).expect("finite std");
                (0..n).map(|_| T::lit(normal.sample(&mut rng))).collect()
            }
        };
        let b = vec![T::zero(); bs.iter().product()];
        Ok((Tensor::param(w, &ws)?, Tensor::param(b, &bs)?))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
}

fn register<T: Scalar>(
    store: &mut ParamStore<T>,
    name: &str,
    spec: &LayerSpec,
    seed: u64,
) -> Result<(ParamId, ParamId), BuildError> {
    let (w, b) = spec.init::<T>(derive_seed(seed, name))?;
    let (wn, bn) = match spec.kind {
        LayerKind::Norm => ("gamma", "beta"),
        _ => ("weight", "bias"),
    };
    let w = store.insert(format!("{name}.{wn}"), w)?;
    let b = store.insert(format!("{name}.{bn}"), b)?;
    Ok((w, b))
}

/// Convolution (standard, grouped, pointwise or depthwise) plus activation.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub spec: LayerSpec,
    pub weight: ParamId,
    pub bias: ParamId,
    pub opts: Conv2dOptions,
}

impl Conv2d {
    /// Same-padded, stride-1 convolution.
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        spec: LayerSpec,
        seed: u64,
    ) -> Result<Self, BuildError> {
        let opts = Conv2dOptions::same(spec.kernel, spec.groups);
        Self::with_options(store, name, spec, opts, seed)
    }

    pub fn with_options<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        spec: LayerSpec,
        opts: Conv2dOptions,
        seed: u64,
    ) -> Result<Self, BuildError> {
        let (weight, bias) = register(store, name, &spec, seed)?;
        Ok(Self {
            spec,
            weight,
            bias,
            opts: Conv2dOptions {
                groups: spec.groups,
                ..opts
            },
        })
    }

    pub fn forward<T: Scalar>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> tensor::Result<Tensor<T>> {
        let y = x.conv2d(store.get(self.weight), Some(store.get(self.bias)), self.opts)?;
        Ok(self.spec.activation.apply(&y))
    }
}

/// Affine map over the last axis, `y = act(x · W + b)` with `W` stored as
/// `[in, out]`. Accepts `[N, in]` or `[B, N, in]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub spec: LayerSpec,
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        spec: LayerSpec,
        seed: u64,
    ) -> Result<Self, BuildError> {
        let (weight, bias) = register(store, name, &spec, seed)?;
        Ok(Self {
            spec,
            weight,
            bias: Some(bias),
        })
    }

    /// Projection without a bias term; the weight is stored as `{name}.weight`.
    pub fn no_bias<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        spec: LayerSpec,
        seed: u64,
    ) -> Result<Self, BuildError> {
        let (w, _) = spec.init::<T>(derive_seed(seed, name))?;
        let weight = store.insert(format!("{name}.weight"), w)?;
        Ok(Self {
            spec,
            weight,
            bias: None,
        })
    }

    pub fn forward<T: Scalar>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> tensor::Result<Tensor<T>> {
        let mut y = x.matmul(store.get(self.weight))?;
        if let Some(b) = self.bias {
            y = y.add(store.get(b))?;
        }
        Ok(self.spec.activation.apply(&y))
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, channels: usize) -> Result<Self, BuildError> {
        let (gamma, beta) = register(store, name, &LayerSpec::norm(channels), 0)?;
        Ok(Self {
            gamma,
            beta,
            eps: tensor::LAYER_NORM_EPS,
        })
    }

    pub fn forward<T: Scalar>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> tensor::Result<Tensor<T>> {
        x.layer_norm(store.get(self.gamma), store.get(self.beta), self.eps)
    }
}
