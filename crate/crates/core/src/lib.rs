//! Multi-user MIMO precoding under per-antenna power constraints.
//!
//! The crate covers the channel model and its per-user SVD, the quality
//! functions (SINR, Spectral Efficiency, SUSINR, SE^C), the MMSE / MMSE-IRC /
//! conjugate detectors, the closed-form MRT / ZF / RZF / ARZF precoders, a
//! projected quasi-Newton optimizer and a benchmark harness.

// `!(x > 0.0)` is used on purpose to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod detection;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod quality;

pub use error::{Error, Result};
pub use linalg::CMatrix;
pub use model::{ChannelSet, SystemDims, SystemParams, UserChannel};
pub use quality::{PrecodingMatrix, SinrReport};
