//! Multi-bias mitigation for dense vector representations.
//!
//! The crate removes social bias directions from word embeddings and visual
//! feature vectors and measures how separable the most biased vectors remain
//! afterwards:
//!
//! * [`vectors`] loads and writes the whitespace-delimited text format used by
//!   pre-trained GloVe files and exported image features.
//! * [`linalg`] holds the deterministic kernels: principal components,
//!   projection removal, cosine similarity.
//! * [`bias_def`] parses characterizing word-pair files and image-group
//!   manifests.
//! * [`text_debias`] implements Hard Debias, Double-Hard Debias with the
//!   frequency-direction search, and the sequential multi-bias pipeline.
//! * [`visual`] implements Visual Hard Debias and Projection Debias.
//! * [`eval`] is the two-cluster k-means evaluation protocol.
//! * [`sentiment`] provides valence lookup and the sentiment gate algebra.
//!
//! Every numeric routine is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases below fix the scalar to `f64`, which is what the command-line tool
//! uses.

pub mod bias_def;
pub mod error;
pub mod eval;
pub mod kmeans;
pub mod linalg;
pub mod scalar;
pub mod sentiment;
pub mod text_debias;
pub mod vectors;
pub mod visual;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type EmbeddingSet = vectors::EmbeddingSet<f64>;
pub type EmbeddingSet32 = vectors::EmbeddingSet<f32>;
pub type UnitVector = linalg::UnitVector<f64>;
pub type UnitVector32 = linalg::UnitVector<f32>;
pub type BiasDirection = text_debias::BiasDirection<f64>;
pub type QuadGroups = visual::QuadGroups<f64>;
pub type PairGroups = visual::PairGroups<f64>;
pub type VisualBiasModel = visual::VisualBiasModel<f64>;
pub type Projection2D = eval::Projection2D<f64>;
pub type GateParams = sentiment::GateParams<f64>;

/// Derives an independent sub-seed from a top-level seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
