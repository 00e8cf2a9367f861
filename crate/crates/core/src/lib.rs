//! Near-field reconstruction of planar antenna arrays from a handful of probe
//! samples.
//!
//! A-priori uncertainty on the cluster excitations is turned into an
//! over-complete field basis; a sparse coefficient vector over that basis is
//! then recovered from noisy probe data, either by Bayesian compressive sensing
//! (a fast relevance-vector machine on the real-lifted system) or by orthogonal
//! matching pursuit for comparison. Reconstructed fields are evaluated on the
//! full scan plane and in the far field.
//!
//! Units are wavelengths throughout.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod bcs;
pub mod error;
pub mod forward;
pub mod metrics;
pub mod nf_ff;
pub mod omp;
pub mod pipeline;

pub use error::{Error, Result};
