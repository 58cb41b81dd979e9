use super::BuildResult;
use super::PfanConfig;
use crate::nn::{Activation, Conv2d, LayerSpec, ParamStore};
use crate::tensor::{Result, Scalar, Tensor};

/// Multi-scale bottleneck-inverting block.
///
/// One grouped convolution per kernel size, each followed by GELU, summed;
/// then a pointwise expansion `C -> rC` with GELU and a pointwise projection
/// back to `C`.
#[derive(Debug, Clone)]
pub struct Mbi {
    pub branches: Vec<Conv2d>,
    pub expand: Conv2d,
    pub project: Conv2d,
    pub residual: bool,
}

impl Mbi {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, cfg: &PfanConfig, seed: u64) -> BuildResult<Self> {
        let c = cfg.base_channels;
        let hidden = c * cfg.mbi_expand_ratio;
        let branches = cfg
            .mbi_kernels
            .iter()
            .map(|&k| {
                let spec = LayerSpec::conv(c, c, k, cfg.mbi_groups, Activation::Gelu);
                Conv2d::new(store, &format!("{name}.gconv{k}"), spec, seed)
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let expand = Conv2d::new(
            store,
            &format!("{name}.pw_expand"),
            LayerSpec::pointwise(c, hidden, Activation::Gelu),
            seed,
        )?;
        let project = Conv2d::new(
            store,
            &format!("{name}.pw_project"),
            LayerSpec::pointwise(hidden, c, Activation::Identity),
            seed,
        )?;
        Ok(Self {
            branches,
            expand,
            project,
            residual: cfg.mbi_residual,
        })
    }

    /// `[C, H, W] -> [C, H, W]`.
    pub fn forward<T: Scalar>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut ms = self.branches[0].forward(store, x)?;
        for b in &self.branches[1..] {
            ms = ms.add(&b.forward(store, x)?)?;
        }
        let y = self.project.forward(store, &self.expand.forward(store, &ms)?)?;
        if self.residual {
            y.add(x)
        } else {
            Ok(y)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::testutil::{naive_conv, random_tensor, randomize};

    fn desk8() -> PfanConfig {
        PfanConfig {
            base_channels: 8,
            mbi_groups: 8,
            ..PfanConfig::desk()
        }
    }

    #[test]
    fn zero_weights_give_zero_map() {
        let mut store = ParamStore::<f64>::new();
        let mbi = Mbi::new(&mut store, "m", &desk8(), 1).unwrap();
        let zero: Vec<_> = store.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        let store = store.with_tensors(zero);
        let y = mbi.forward(&store, &random_tensor(&[8, 6, 6], 2, 1.0)).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn default_shape_is_preserved() {
        let mut store = ParamStore::<f32>::new();
        let mbi = Mbi::new(&mut store, "m", &PfanConfig::default(), 1).unwrap();
        let y = mbi.forward(&store, &Tensor::ones(&[64, 16, 16])).unwrap();
        assert_eq!(y.shape(), &[64, 16, 16]);
    }

    #[test]
    fn matches_composed_naive_convs() {
        let mut store = ParamStore::<f64>::new();
        let mbi = Mbi::new(&mut store, "m", &desk8(), 3).unwrap();
        let store = randomize(&store, 4, 0.3);
        let x = random_tensor(&[8, 9, 7], 5, 1.0);
        let gelu = |v: f64| 0.5 * v * (1.0 + libm::erf(v / std::f64::consts::SQRT_2));
        let conv = |c: &Conv2d, input: &[f64], cin: usize| {
            naive_conv(
                input,
                cin,
                9,
                7,
                store.get(c.weight).data(),
                store.get(c.bias).data(),
                c.spec.out_channels,
                c.spec.kernel,
                c.spec.groups,
            )
        };
        let mut ms = vec![0.0; 8 * 63];
        for b in &mbi.branches {
            for (m, v) in ms.iter_mut().zip(conv(b, x.data(), 8)) {
                *m += gelu(v);
            }
        }
        let hidden: Vec<f64> = conv(&mbi.expand, &ms, 8).into_iter().map(gelu).collect();
        let expected = conv(&mbi.project, &hidden, 32);
        let got = mbi.forward(&store, &x).unwrap();
        for (a, b) in got.data().iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}
