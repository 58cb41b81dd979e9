//! Procedural smoke layers, compositing and paired dataset generation.
//!
//! The renderer is a lightweight substitute for a physically based smoke
//! simulation. It keeps the same six controls: density, intensity,
//! temperature (upward drift speed), source position, light position and
//! light intensity.

mod dataset;
pub mod noise;
mod procedural;
mod render;

pub use dataset::{
    assign_splits, generate_dataset, load_sources, split_counts, verify_dataset, DensityTier, Manifest, ManifestRow,
    Source, Split, MANIFEST_FILE, MANIFEST_HEADER, MAX_FRAME,
};
pub use procedural::procedural_tissue;
pub use render::{composite, render_smoke_frame, SmokeLayer, SmokeParams};
