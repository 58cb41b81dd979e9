//! Generator and discriminator blocks.
//!
//! Blocks operate on unbatched `[C, H, W]` maps. Attention and feed-forward
//! stages work on window tokens `[n_windows, window², C]`.

mod config;
mod fusion;
mod generator;
mod lat;
mod leff;
mod mbi;
mod patchgan;
mod sea;

pub mod flops;
#[cfg(test)]
pub(crate) mod testutil;

pub(crate) use config::parse as parse_value;
pub use config::{parse_kv, ConfigError, PfanConfig};
pub use flops::{flop_count, AttnKind};
pub use fusion::Fusion;
pub use generator::{generator_param_count, Generator, GeneratorTrace};
pub use lat::{merge_windows, partition_windows, run_windowed, LatBlock};
pub use leff::{Leff, LEAKY_SLOPE};
pub use mbi::Mbi;
pub use patchgan::PatchGan;
pub use sea::{axial_attention, global_attention, map_to_tokens, tokens_to_map, Sea};

use crate::nn::BuildError;

pub type BuildResult<T> = std::result::Result<T, BuildError>;
