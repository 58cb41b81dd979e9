use super::noise::Fbm;
use crate::error::{Error, Result};
use crate::image::Image;

/// Plume radius at frame 0, in normalized image units.
pub const BASE_RADIUS: f64 = 0.12;
/// Radius growth per frame.
pub const RADIUS_GROWTH: f64 = 0.02;
/// Upward noise advection per frame at temperature 1.
pub const DRIFT_PER_FRAME: f64 = 0.04;
/// Spread of the light's brightening lobe.
pub const LIGHT_SIGMA: f64 = 0.25;

/// Generation knobs for one smoke frame. Positions are normalized `(x, y)`
/// with `y` growing downward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmokeParams {
    pub density: f64,
    pub intensity: f64,
    /// Drives the upward drift speed of the noise.
    pub temperature: f64,
    pub source: (f64, f64),
    pub light: (f64, f64),
    pub light_intensity: f64,
    pub seed: u64,
    pub frame: u32,
}

impl Default for SmokeParams {
    fn default() -> Self {
        Self {
            density: 0.5,
            intensity: 0.8,
            temperature: 0.5,
            source: (0.5, 0.55),
            light: (0.5, 0.3),
            light_intensity: 0.3,
            seed: 0,
            frame: 0,
        }
    }
}

impl SmokeParams {
    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("density", self.density),
            ("intensity", self.intensity),
            ("temperature", self.temperature),
            ("source.x", self.source.0),
            ("source.y", self.source.1),
            ("light.x", self.light.0),
            ("light.y", self.light.1),
            ("light_intensity", self.light_intensity),
        ];
        match unit.iter().find(|(_, v)| !(0.0..=1.0).contains(v)) {
            Some((k, v)) => Err(Error::Data(format!("smoke parameter {k} = {v} outside [0, 1]"))),
            None => Ok(()),
        }
    }

    pub fn plume_radius(&self) -> f64 {
        BASE_RADIUS + RADIUS_GROWTH * self.frame as f64
    }
}

/// Additive gray smoke luminance in `[0, 1]`, row-major `H × W`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmokeLayer {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl SmokeLayer {
    pub fn total(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn to_gray8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| crate::image::to_u8(v)).collect()
    }
}

/// Renders one frame: advected fractal noise under a Gaussian plume mask
/// centred on the source, scaled by `density · intensity` and brightened
/// near the light.
pub fn render_smoke_frame(p: &SmokeParams, width: usize, height: usize) -> Result<SmokeLayer> {
    if width < 8 || height < 8 {
        return Err(Error::Data(format!("smoke frame {width}x{height} is smaller than 8x8")));
    }
    p.validate()?;
    let fbm = Fbm::default();
    let t = p.frame as f64;
    let shift = DRIFT_PER_FRAME * p.temperature * t;
    let sigma = p.plume_radius() / 3.0;
    let amp = p.density * p.intensity;
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        let v = (y as f64 + 0.5) / height as f64;
        for x in 0..width {
            let u = (x as f64 + 0.5) / width as f64;
            let noise = fbm.sample(p.seed, u, v + shift);
            let d2 = (u - p.source.0).powi(2) + (v - p.source.1).powi(2);
            let plume = (-d2 / (2.0 * sigma * sigma)).exp();
            let l2 = (u - p.light.0).powi(2) + (v - p.light.1).powi(2);
            let light = 1.0 + p.light_intensity * (-l2 / (2.0 * LIGHT_SIGMA * LIGHT_SIGMA)).exp();
            let s = amp * plume * (0.35 + 0.65 * noise) * light;
            data.push(s.clamp(0.0, 1.0) as f32);
        }
    }
    Ok(SmokeLayer { width, height, data })
}

/// `clamp(clean + smoke, 0, 1)` per channel.
pub fn composite(clean: &Image, smoke: &SmokeLayer) -> Result<Image> {
    if clean.width() != smoke.width || clean.height() != smoke.height {
        return Err(Error::Data(format!(
            "smoke {}x{} does not match image {}x{}",
            smoke.width,
            smoke.height,
            clean.width(),
            clean.height()
        )));
    }
    let mut out = clean.clone();
    for (px, &s) in out.data_mut().chunks_exact_mut(3).zip(&smoke.data) {
        for v in px {
            *v = (*v + s).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}
