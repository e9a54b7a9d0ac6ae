//! Two-layer efficient visual coding.
//!
//! Each layer reduces dimensionality with a constrained sparse-PCA
//! autoencoder, expands it again with overcomplete sparse coding, and the
//! layer-1 responses are rank-Gaussianized before feeding layer 2:
//!
//! ```text
//! 16x16 patch -> spca1 -> ica1 -> |.| -> Phi^-1(rank) --(x4 quadrants)--> spca2 -> ica2
//! ```
//!
//! - [`imageio`]: Netpbm ingestion, preprocessing and patch sampling
//! - [`spca`]: sparse PCA autoencoder with per-unit output power constraint
//! - [`sparsecode`]: dictionary learning / sparse inference
//! - [`gaussianize`]: nonparametric rank Gaussianization and the normal quantile
//! - [`hierarchy`]: the stacked model, training schedule and the `HVC1` container
//! - [`analysis`]: Gabor fits, spike-triggered covariance, RF maps, cell taxonomy, rendering

pub mod analysis;
pub mod error;
pub mod gaussianize;
pub mod hierarchy;
pub mod imageio;
mod linalg;
pub mod sparsecode;
pub mod spca;

pub use error::{Error, Result};
pub use gaussianize::{inverse_normal_cdf, normal_cdf, Gaussianizer};
pub use hierarchy::{HierarchicalModel, PipelineConfig, Stage};
pub use imageio::{GrayImage, PatchBatch, RawImage};
pub use sparsecode::{DictionaryModel, Penalty};
pub use spca::{CorrelationMatrix, SpcaModel};

/// Per-epoch training record emitted by the stage trainers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Batch objective before the update.
    pub objective: f64,
    /// Largest per-unit mean squared output after the update.
    pub max_second_moment: f64,
}

/// Deterministic generator used throughout the crate.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Build the crate's generator from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
