//! Small dense networks with hand-written reverse-mode gradients.
//!
//! Batches are row-major: one sample per row.

mod adam;
mod checkpoint;
mod mlp;
mod normalizer;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use mlp::{polyak_blend, ForwardCache, Gradients, Layer, Mlp, OutputActivation};
pub use normalizer::Normalizer;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("network architectures differ")]
    Architecture,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
