//! Compositional 3D skeletal action synthesis at desk scale.
//!
//! The pipeline couples labeled sub-action sequences into pseudo-compositional
//! training data by energy-weighted mixing, trains a conditional VAE on the
//! coupled data, and refines generation through a render-mask-inpaint
//! constraint. An evaluation suite reports Frechet feature distance,
//! recognition accuracy, and diversity metrics.
//!
//! Modules follow the pipeline stages:
//! - [`motion`]: data types, body partition, procedural sub-action generators
//! - [`dataset`]: JSON Lines serialization
//! - [`energy`]: per-part motion energy and attention values
//! - [`coupling`]: mixing-rate sampling and pseudo-composite construction
//! - [`render`]: frontal normalization and the two rasterizers
//! - [`decouple`]: attention projection, region pooling, masking
//! - [`refine`]: inpainting interface and the refinement loss
//! - [`cvae`]: the conditional VAE, training, and gradient checking
//! - [`eval`]: features, FID, accuracy, diversity, ablation harness
//! - [`config`] and [`pipeline`]: run configuration and CLI-facing commands

pub mod config;
pub mod coupling;
pub mod cvae;
pub mod dataset;
pub mod decouple;
pub mod energy;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod motion;
pub mod pipeline;
pub mod refine;
pub mod render;

pub use error::{Error, Result};
