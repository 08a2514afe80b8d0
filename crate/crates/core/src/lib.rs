//! Gradient trajectory pursuit.
//!
//! Selects a compact, de-duplicated subset of training examples whose
//! combined gradient trajectory matches that of a target set. Per-checkpoint
//! gradients are projected onto per-checkpoint principal subspaces, stacked
//! into a design system `(A, b)`, and a non-negative sparse combination of
//! `A`'s columns is pursued with iterative compressive sampling.

pub mod bench;
pub mod cli;
mod binio;
pub mod design;
pub mod dist;
pub mod error;
pub mod linalg;
pub mod nnls;
pub mod pursuit;
pub mod report;
pub mod rng;
pub mod subspace;
pub mod synth;
pub mod trajectory;

pub use error::{Error, Result};
