use super::{BuildResult, Leff};
use crate::nn::ParamStore;
use crate::tensor::{Result, Scalar, Tensor};

/// Channel-attention fusion. One LEFF is shared by the average- and
/// max-pooled branches, each pooled vector treated as a 1×1 token grid.
#[derive(Debug, Clone)]
pub struct Fusion {
    pub leff: Leff,
}

impl Fusion {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        channels: usize,
        ratio: usize,
        seed: u64,
    ) -> BuildResult<Self> {
        Ok(Self {
            leff: Leff::new(store, &format!("{name}.leff"), channels, ratio, seed)?,
        })
    }

    /// Per-channel gate in `(0, 1)`, shape `[C, 1, 1]`.
    pub fn attention<T: Scalar>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let c = x.shape()[0];
        let branch = |pooled: Tensor<T>| self.leff.forward(store, &pooled.reshape(&[1, 1, c])?, 1, 1);
        let avg = branch(x.avg_pool_spatial()?)?;
        let max = branch(x.max_pool_spatial()?)?;
        avg.add(&max)?.sigmoid().reshape(&[c, 1, 1])
    }

    /// `x ⊙ gate`, broadcast over the spatial axes.
    pub fn forward<T: Scalar>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.mul(&self.attention(store, x)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::testutil::{leaky, naive_linear, random_tensor, randomize};

    #[test]
    fn zero_leff_halves_input() {
        let mut store = ParamStore::<f64>::new();
        let f = Fusion::new(&mut store, "f", 4, 2, 1).unwrap();
        let zero = store.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        let x = random_tensor(&[4, 5, 6], 2, 3.0);
        let y = f.forward(&store.with_tensors(zero), &x).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert_eq!(*a, 0.5 * b);
        }
    }

    #[test]
    fn matches_pooled_oracle() {
        let (c, h, w) = (4, 5, 3);
        let mut store = ParamStore::<f64>::new();
        let f = Fusion::new(&mut store, "f", c, 2, 1).unwrap();
        let store = randomize(&store, 3, 0.8);
        let x = random_tensor(&[c, h, w], 4, 2.0);
        let plane = |ch: usize| &x.data()[ch * h * w..(ch + 1) * h * w];
        let avg: Vec<f64> = (0..c)
            .map(|ch| plane(ch).iter().sum::<f64>() / (h * w) as f64)
            .collect();
        let max: Vec<f64> = (0..c)
            .map(|ch| plane(ch).iter().cloned().fold(f64::MIN, f64::max))
            .collect();
        let l = &f.leff;
        let p = |id| store.get(id).data();
        let leff1x1 = |v: &[f64]| -> Vec<f64> {
            let e: Vec<f64> = naive_linear(v, c, p(l.expand.weight), Some(p(l.expand.bias.unwrap())), 2 * c)
                .into_iter()
                .map(leaky)
                .collect();
            // a 3×3 depthwise kernel on a zero-padded 1×1 map only sees its centre tap
            let dw = p(l.depthwise.weight);
            let d: Vec<f64> = (0..2 * c)
                .map(|i| leaky(e[i] * dw[i * 9 + 4] + p(l.depthwise.bias)[i]))
                .collect();
            naive_linear(&d, 2 * c, p(l.project.weight), Some(p(l.project.bias.unwrap())), c)
                .into_iter()
                .map(leaky)
                .collect()
        };
        let (a, m) = (leff1x1(&avg), leff1x1(&max));
        let gate: Vec<f64> = (0..c).map(|i| 1.0 / (1.0 + (-(a[i] + m[i])).exp())).collect();
        let y = f.forward(&store, &x).unwrap();
        for (i, v) in y.data().iter().enumerate() {
            let want = x.data()[i] * gate[i / (h * w)];
            assert!((v - want).abs() < 1e-12);
            assert!(gate[i / (h * w)] > 0.0 && gate[i / (h * w)] < 1.0);
        }
    }
}
