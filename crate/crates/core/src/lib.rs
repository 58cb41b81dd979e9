//! Frequency-aware GAN for removing surgical smoke from laparoscopic frames,
//! built on a small reverse-mode autodiff engine.

pub mod arch;
pub mod bench;
pub mod cli;
pub mod error;
pub mod image;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use image::Image;
