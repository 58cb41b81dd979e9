use super::{BuildResult, Fusion, LatBlock, Mbi, PfanConfig};
use crate::nn::{Activation, Conv2d, LayerSpec, ParamStore};
use crate::tensor::{Result, Scalar, Tensor, TensorError};

/// Desmoking generator.
///
/// ```text
/// stem 3x3 (3 -> C) -> MBI x n_mbi = X_HF
/// X_HF -> LAT x n_lat (windowed) -> fusion gate = X_LF
/// head 3x3 (C -> 3) of X_HF + X_LF, plus the input when the global skip is on
/// ```
#[derive(Debug, Clone)]
pub struct Generator {
    pub config: PfanConfig,
    pub stem: Conv2d,
    pub mbi: Vec<Mbi>,
    pub lat: Vec<LatBlock>,
    pub fusion: Fusion,
    pub head: Conv2d,
}

/// Intermediate maps of one forward pass.
#[derive(Debug, Clone)]
pub struct GeneratorTrace<T: Scalar> {
    pub stem: Tensor<T>,
    pub high_freq: Tensor<T>,
    pub lat: Tensor<T>,
    pub low_freq: Tensor<T>,
    pub output: Tensor<T>,
}

impl Generator {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, config: &PfanConfig, seed: u64) -> BuildResult<Self> {
        config.validate().map_err(|e| TensorError::Invalid {
            op: "generator",
            msg: e.to_string(),
        })?;
        let c = config.base_channels;
        let stem = Conv2d::new(
            store,
            "gen.stem",
            LayerSpec::conv(3, c, 3, 1, Activation::Identity),
            seed,
        )?;
        let mbi = (0..config.n_mbi)
            .map(|i| Mbi::new(store, &format!("gen.mbi{i}"), config, seed))
            .collect::<BuildResult<Vec<_>>>()?;
        let lat = (0..config.n_lat)
            .map(|i| {
                LatBlock::new(
                    store,
                    &format!("gen.lat{i}"),
                    c,
                    config.attn_channels(),
                    config.leff_expand_ratio,
                    seed,
                )
            })
            .collect::<BuildResult<Vec<_>>>()?;
        let fusion = Fusion::new(store, "gen.fusion", c, config.leff_expand_ratio, seed)?;
        let head = Conv2d::new(
            store,
            "gen.head",
            LayerSpec::conv(c, 3, 3, 1, Activation::Identity),
            seed,
        )?;
        Ok(Self {
            config: config.clone(),
            stem,
            mbi,
            lat,
            fusion,
            head,
        })
    }

    /// `[3, H, W] -> [3, H, W]`, not clamped.
    pub fn forward<T: Scalar>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.trace(store, x)?.output)
    }

    pub fn trace<T: Scalar>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<GeneratorTrace<T>> {
        if x.rank() != 3 || x.shape()[0] != 3 {
            return Err(TensorError::Invalid {
                op: "generator",
                msg: format!("expected a [3, H, W] image, got {:?}", x.shape()),
            });
        }
        let stem = self.stem.forward(store, x)?;
        let mut hf = stem.clone();
        for block in &self.mbi {
            hf = block.forward(store, &hf)?;
        }
        let window = self.config.lat_window;
        let lat = super::lat::run_windowed(&hf, window, |tokens| {
            let mut t = tokens.clone();
            for block in &self.lat {
                t = block.forward_tokens(store, &t, window)?;
            }
            Ok(t)
        })?;
        let lf = self.fusion.forward(store, &lat)?;
        let mut output = self.head.forward(store, &hf.add(&lf)?)?;
        if self.config.use_global_input_skip {
            output = output.add(x)?;
        }
        Ok(GeneratorTrace {
            stem,
            high_freq: hf,
            lat,
            low_freq: lf,
            output,
        })
    }

    /// Forward pass clamped to `[0, 1]`, without gradient tracking.
    pub fn infer<T: Scalar>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(store, &x.detach())?.detach().clamp(0.0, 1.0))
    }
}

/// Parameter count of the generator built from `config`.
pub fn generator_param_count(config: &PfanConfig) -> BuildResult<usize> {
    let mut store = ParamStore::<f32>::new();
    Generator::new(&mut store, config, 0)?;
    Ok(store.count_params())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::testutil::random_tensor;

    #[test]
    fn default_budget() {
        let n = generator_param_count(&PfanConfig::default()).unwrap();
        assert_eq!(n, 252_931);
        assert_eq!(n, generator_param_count(&PfanConfig::default()).unwrap());
    }

    #[test]
    fn shape_preserved_for_odd_sizes() {
        let mut store = ParamStore::<f32>::new();
        let g = Generator::new(&mut store, &PfanConfig::desk(), 1).unwrap();
        for (h, w) in [(8, 8), (13, 9), (16, 24)] {
            let y = g.forward(&store, &Tensor::full(&[3, h, w], 0.5)).unwrap();
            assert_eq!(y.shape(), &[3, h, w]);
            assert!(y.data().iter().all(|v| v.is_finite()));
        }
        assert!(g.forward(&store, &Tensor::ones(&[4, 8, 8])).is_err());
    }

    #[test]
    fn zero_parameters_pass_input_through() {
        let mut store = ParamStore::<f64>::new();
        let g = Generator::new(&mut store, &PfanConfig::desk(), 1).unwrap();
        let zero = store.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        let store = store.with_tensors(zero);
        let x = random_tensor(&[3, 10, 12], 1, 0.8).add_scalar(0.4);
        assert_eq!(g.forward(&store, &x).unwrap().data(), x.data());
        assert_eq!(g.infer(&store, &x).unwrap().data(), x.clamp(0.0, 1.0).data());
    }

    #[test]
    fn every_parameter_receives_gradient() {
        let mut store = ParamStore::<f64>::new();
        let g = Generator::new(&mut store, &PfanConfig::desk(), 3).unwrap();
        let x = random_tensor(&[3, 8, 8], 4, 0.5).add_scalar(0.5);
        let target = random_tensor(&[3, 8, 8], 5, 0.5).add_scalar(0.5);
        g.forward(&store, &x)
            .unwrap()
            .sub(&target)
            .unwrap()
            .abs()
            .mean()
            .backward()
            .unwrap();
        for (name, t) in store.iter() {
            let grad = t.grad().unwrap_or_else(|| panic!("{name} has no gradient"));
            assert!(grad.iter().any(|&v| v != 0.0), "{name} gradient is zero");
        }
    }
}
