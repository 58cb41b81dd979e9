use super::BuildResult;
use crate::nn::{Activation, Conv2d, LayerSpec, Linear, ParamStore};
use crate::tensor::{Result, Scalar, Tensor, TensorError};

pub const LEAKY_SLOPE: f64 = 0.2;

/// Locally-enhanced feed-forward layer: linear expansion, 3×3 depthwise
/// convolution on the token grid, linear projection. LeakyReLU after each.
#[derive(Debug, Clone)]
pub struct Leff {
    pub expand: Linear,
    pub depthwise: Conv2d,
    pub project: Linear,
}

impl Leff {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        channels: usize,
        ratio: usize,
        seed: u64,
    ) -> BuildResult<Self> {
        let hidden = channels * ratio;
        let act = Activation::LeakyRelu(LEAKY_SLOPE);
        Ok(Self {
            expand: Linear::new(
                store,
                &format!("{name}.expand"),
                LayerSpec::linear(channels, hidden, act),
                seed,
            )?,
            depthwise: Conv2d::new(
                store,
                &format!("{name}.dwconv"),
                LayerSpec::depthwise(hidden, 3, act),
                seed,
            )?,
            project: Linear::new(
                store,
                &format!("{name}.project"),
                LayerSpec::linear(hidden, channels, act),
                seed,
            )?,
        })
    }

    /// `[B, h*w, C] -> [B, h*w, C]`.
    pub fn forward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        tokens: &Tensor<T>,
        h: usize,
        w: usize,
    ) -> Result<Tensor<T>> {
        let (b, n) = match *tokens.shape() {
            [b, n, _] => (b, n),
            _ => {
                return Err(TensorError::Invalid {
                    op: "leff",
                    msg: format!("expected [B, N, C] tokens, got {:?}", tokens.shape()),
                })
            }
        };
        if n != h * w {
            return Err(TensorError::Invalid {
                op: "leff",
                msg: format!("{n} tokens do not form a {h}x{w} window"),
            });
        }
        let e = self.expand.forward(store, tokens)?;
        let r = e.shape()[2];
        let grid = e.reshape(&[b, h, w, r])?.permute(&[0, 3, 1, 2])?;
        let local = self.depthwise.forward(store, &grid)?;
        let back = local.permute(&[0, 2, 3, 1])?.reshape(&[b, n, r])?;
        self.project.forward(store, &back)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::testutil::{leaky, naive_conv, naive_linear, random_tensor, randomize};

    #[test]
    fn zero_weights_zero_tokens() {
        let mut store = ParamStore::<f64>::new();
        let leff = Leff::new(&mut store, "l", 4, 2, 1).unwrap();
        let zero = store.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        let y = leff
            .forward(&store.with_tensors(zero), &random_tensor(&[2, 16, 4], 1, 1.0), 4, 4)
            .unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn default_width_shape() {
        let mut store = ParamStore::<f32>::new();
        let leff = Leff::new(&mut store, "l", 64, 2, 1).unwrap();
        assert_eq!(
            leff.forward(&store, &Tensor::ones(&[1, 64, 64]), 8, 8).unwrap().shape(),
            &[1, 64, 64]
        );
        assert!(leff.forward(&store, &Tensor::ones(&[1, 63, 64]), 8, 8).is_err());
    }

    #[test]
    fn matches_composed_oracle() {
        let (c, r, h, w) = (3, 6, 4, 4);
        let mut store = ParamStore::<f64>::new();
        let leff = Leff::new(&mut store, "l", c, 2, 1).unwrap();
        let store = randomize(&store, 2, 0.5);
        let x = random_tensor(&[1, h * w, c], 3, 1.0);
        let p = |id| store.get(id).data();
        let e: Vec<f64> = naive_linear(
            x.data(),
            c,
            p(leff.expand.weight),
            Some(p(leff.expand.bias.unwrap())),
            r,
        )
        .into_iter()
        .map(leaky)
        .collect();
        // token-major [N, r] to channel-major [r, h, w]
        let chw: Vec<f64> = (0..r * h * w).map(|i| e[(i % (h * w)) * r + i / (h * w)]).collect();
        let d: Vec<f64> = naive_conv(&chw, r, h, w, p(leff.depthwise.weight), p(leff.depthwise.bias), r, 3, r)
            .into_iter()
            .map(leaky)
            .collect();
        let tokens: Vec<f64> = (0..h * w * r).map(|i| d[(i % r) * h * w + i / r]).collect();
        let want: Vec<f64> = naive_linear(
            &tokens,
            r,
            p(leff.project.weight),
            Some(p(leff.project.bias.unwrap())),
            c,
        )
        .into_iter()
        .map(leaky)
        .collect();
        let got = leff.forward(&store, &x, h, w).unwrap();
        for (a, b) in got.data().iter().zip(&want) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
        }
    }
}
