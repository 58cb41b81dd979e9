//! A trained generator ready for inference.

use std::path::Path;

use crate::arch::{Generator, PfanConfig};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::{decode_weights, ParamStore};

#[derive(Debug, Clone)]
pub struct Desmoker {
    pub config: PfanConfig,
    pub generator: Generator,
    pub store: ParamStore<f32>,
}

impl Desmoker {
    /// Generator with `config` and initial weights drawn from `seed`.
    pub fn new(config: &PfanConfig, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let generator = Generator::new(&mut store, config, seed)?;
        Ok(Self {
            config: config.clone(),
            generator,
            store,
        })
    }

    /// Decodes a generator checkpoint. The topology comes from the metadata
    /// block; every parameter must match it by name and shape.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (loaded, meta) = decode_weights::<f32>(bytes)?;
        let config = PfanConfig::from_kv(&meta)?;
        let mut model = Self::new(&config, 0)?;
        model.store.load_from(&loaded)?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn param_count(&self) -> usize {
        self.store.count_params()
    }

    /// Clamped generator output, quantized to 8-bit levels.
    pub fn desmoke(&self, input: &Image) -> Result<Image> {
        let out = self.generator.infer(&self.store, &input.to_tensor::<f32>())?;
        Ok(Image::from_tensor(&out)?.quantized())
    }
}
