//! Intrinsic image decomposition guided by sparse LiDAR intensity.
//!
//! An image `I` is split into albedo `R` and gray shade `S` with `I = R S`.
//! Sparse per-pixel intensity `L`, densified with an edge-aware quadratic
//! solve, pins the albedo luminance so that cast shadows end up in `S`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotate;
pub mod densify;
mod error;
pub mod eval;
pub mod imagecore;
pub mod linalg;
pub mod losses;
pub mod pipeline;
pub mod solver;

pub use error::{Error, Result};
