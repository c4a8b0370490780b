//! Edge-preserving image smoothing by least-squares reconstruction from
//! edge-aware filtered gradients, with the plain LS and WLS baselines,
//! rolling guidance, and the usual base/detail applications.

pub mod applications;
pub mod bench;
pub mod bilateral;
pub mod cli;
pub mod corpus;
pub mod domain_transform;
pub mod error;
mod fft;
pub mod image;
pub mod io;
pub mod metrics;
pub mod pipelines;
pub mod solver;

pub use error::{Error, Result};
pub use image::{GradientField, NormalizationRecord, PlanarImage};
