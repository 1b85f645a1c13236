//! Small dense networks with exact gradients.

mod adam;
pub mod checkpoint;
mod features;
mod mlp;
mod normalizer;
mod policy;
mod spectral;

use thiserror::Error;

pub use adam::Adam;
pub use features::AngleFeatures;
pub use mlp::{orthogonal, Activation, ForwardCache, Mlp};
pub use normalizer::{RunningNormalizer, DEFAULT_CLIP, VAR_FLOOR};
pub use policy::{gaussian_log_prob, mean_gaussian_kl, GaussianPolicy, POLICY_OUTPUT_GAIN};
pub use spectral::{power_iteration, spectral_step, SpectralState, WARMUP_ITERATIONS};

/// Hidden layer widths used by every network.
pub const DEFAULT_HIDDEN: [usize; 2] = [100, 100];

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
