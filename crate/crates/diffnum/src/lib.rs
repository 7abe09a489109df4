//! Dense tensor arithmetic with tape-based reverse-mode differentiation,
//! the Adam optimizer, finite-difference gradient verification, a
//! deterministic counter-based RNG, and a flat binary checkpoint container.
//!
//! The substrate is generic over the scalar type through [`Scalar`]
//! (`f32`/`f64`); concrete aliases live at the crate root. Downstream crates
//! pin one alias and never mention the type parameter again.
//!
//! Error policy: shape mismatches and non-finite values inside tape ops are
//! bugs in the calling code and panic; boundary operations (backward,
//! optimizer steps, checkpoint I/O) return [`Error`].

mod adam;
pub mod checkpoint;
mod error;
mod gradcheck;
mod linalg;
mod ops;
mod rng;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use error::{Error, Result};
pub use gradcheck::{grad_check, grad_check_vec};
pub use linalg::{matmul_acc, matmul_tn_acc};
pub use rng::Rng;
pub use tape::{GradSlots, Gradients, NodeId, Tape};
pub use tensor::{DiffTensor, Scalar};

/// Concrete single-precision aliases.
pub type Tensor32 = DiffTensor<f32>;
pub type Tape32 = Tape<f32>;

/// Concrete double-precision aliases (the workspace default).
pub type Tensor64 = DiffTensor<f64>;
pub type Tape64 = Tape<f64>;
