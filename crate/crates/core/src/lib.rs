//! Latent-space optimization of discrete sequences with graph-based label
//! smoothing.
//!
//! Sequences are embedded by a small VAE, the training embeddings are
//! augmented with noisy synthetic nodes, labels are propagated over a kNN
//! graph, and a surrogate trained on the smoothed labels is ascended in
//! latent space before decoding candidate designs.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiations.

pub mod data;
pub mod error;
pub mod graph;
pub mod harness;
pub mod hull;
pub mod mbo;
pub mod nn;
pub mod random;
pub mod vae;
mod scalar;
pub mod smoothing;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix64 = nn::Matrix<f64>;
pub type Params64 = nn::Params<f64>;
pub type LatentGraph64 = graph::LatentGraph<f64>;
pub type LabelVector64 = smoothing::LabelVector<f64>;
pub type SurrogateModel64 = mbo::SurrogateModel<f64>;
pub type VaeModel64 = vae::VaeModel<f64>;
pub type DesignSet64 = mbo::DesignSet<f64>;
