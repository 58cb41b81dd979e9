//! Parameterized layers on top of [`crate::tensor`].
//!
//! Layers hold [`ParamId`] handles into a [`ParamStore`]; the store owns the
//! tensors. Forward passes borrow the store, so the same layer graph runs
//! against trainable parameters, a frozen copy, or a `f64` cast for
//! gradient checks.

mod layers;
mod store;
pub mod weights;

pub use layers::{Activation, BuildError, Conv2d, LayerKind, LayerNorm, LayerSpec, Linear};
pub use store::{derive_seed, ParamId, ParamStore};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights, WeightsError, MAGIC, VERSION};

/// Standard deviation of the normal weight initializer.
pub const INIT_STD: f64 = 0.02;
