//! Gene-pair screening and teacher/student infection classifiers.
//!
//! The crate covers the full pipeline: differential gene pairs are screened
//! from expression matrices with Fisher's exact test ([`screen`]), turned into
//! rank-based features, fed to transformer or MLP classifiers ([`model`])
//! trained with AdamW and knowledge distillation ([`train`]), and evaluated
//! ([`metrics`]). [`engine`] provides the tensors and automatic
//! differentiation underneath; [`io`] the file formats, synthetic cohorts and
//! checkpoints.

pub mod engine;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod screen;
pub mod train;

pub use engine::{Graph, NodeId, Tensor};
pub use error::{Error, ErrorKind, Result};
