//! Single-shot bottom-up multi-person 3D pose estimation, framework-free and
//! desk-scale: a generative pose embedding over a fixed skeleton, a grid-cell
//! multi-person representation, cross-modal training against a frozen 2D
//! teacher without paired supervision, and the full evaluation suite — all
//! exercised end-to-end on self-generated synthetic scenes.
//!
//! Numeric work runs on the [`diffnum`] substrate, pinned here to `f64`
//! through the crate-root aliases below.

pub mod embedding;
mod error;
pub mod eval;
pub mod kinematics;
pub mod nets;
pub mod nn;
pub mod scene;
pub mod skeleton;
pub mod train;

pub use error::{Error, Result};

/// The scalar type every pipeline computation runs on.
pub type Real = f64;
pub type Tensor = diffnum::DiffTensor<Real>;
pub type Tape = diffnum::Tape<Real>;
pub type Adam = diffnum::AdamState<Real>;
pub type AdamConfig = diffnum::AdamConfig<Real>;
pub use diffnum::Rng;

/// Spatial size of all map/grid tensors (cells per side).
pub const MAP_SIZE: usize = 28;
/// Input image side in pixels.
pub const IMG_SIZE: usize = 224;
/// Pixels per map cell.
pub const STRIDE: usize = 8;

/// Map cell coordinate of a pixel coordinate (both axis-aligned, pixel
/// centers at integers, cell x covering pixels [8x, 8x+7]).
pub fn pixel_to_cell(p: Real) -> Real {
    (p + 0.5) / STRIDE as Real - 0.5
}

/// Inverse of [`pixel_to_cell`].
pub fn cell_to_pixel(c: Real) -> Real {
    (c + 0.5) * STRIDE as Real - 0.5
}
