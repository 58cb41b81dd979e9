//! RGB images with `f32` samples in `[0, 1]`, stored row-major `H × W × 3`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * 3 || width == 0 || height == 0 {
            return Err(Error::Data(format!(
                "{} samples do not form a {width}x{height} RGB image",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn same_size(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn crop(&self, left: usize, top: usize, width: usize, height: usize) -> Result<Image> {
        if left + width > self.width || top + height > self.height {
            return Err(Error::Data(format!(
                "crop {width}x{height}+{left}+{top} outside {}x{}",
                self.width, self.height
            )));
        }
        Ok(Image::from_fn(width, height, |x, y| self.pixel(left + x, top + y)))
    }

    /// Planar `[3, H, W]` tensor.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let hw = self.width * self.height;
        let mut out = vec![T::zero(); 3 * hw];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            for c in 0..3 {
                out[c * hw + i] = T::lit(px[c] as f64);
            }
        }
        Tensor::from_vec(out, &[3, self.height, self.width]).expect("consistent extents")
    }

    pub fn from_tensor<T: Scalar>(t: &Tensor<T>) -> Result<Image> {
        let (h, w) = match *t.shape() {
            [3, h, w] => (h, w),
            _ => return Err(Error::Data(format!("expected a [3, H, W] tensor, got {:?}", t.shape()))),
        };
        let hw = h * w;
        let d = t.data();
        Ok(Image::from_fn(w, h, |x, y| {
            let i = y * w + x;
            [d[i].f64() as f32, d[hw + i].f64() as f32, d[2 * hw + i].f64() as f32]
        }))
    }

    /// Every sample clamped to `[0, 1]` and rounded to 8 bits, back as floats.
    pub fn quantized(&self) -> Image {
        let data = self.to_rgb8().into_iter().map(|v| v as f32 / 255.0).collect();
        Image { data, ..*self }
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| to_u8(v)).collect()
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Image> {
        Image::new(width, height, bytes.iter().map(|&b| b as f32 / 255.0).collect())
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let decoded =
            image::load_from_memory_with_format(&bytes, image::ImageFormat::Png).map_err(|e| Error::Image {
                path: path.to_path_buf(),
                msg: e.to_string(),
            })?;
        let rgb = decoded.to_rgb8();
        Image::from_rgb8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        save_png_raw(
            path.as_ref(),
            self.width,
            self.height,
            &self.to_rgb8(),
            image::ColorType::Rgb8,
        )
    }
}

pub(crate) fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub(crate) fn save_png_raw(
    path: &Path,
    width: usize,
    height: usize,
    bytes: &[u8],
    color: image::ColorType,
) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    image::save_buffer_with_format(path, bytes, width as u32, height as u32, color, image::ImageFormat::Png).map_err(
        |e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Image {
                path: path.to_path_buf(),
                msg: other.to_string(),
            },
        },
    )
}
