//! Score models: the interface, an analytic Gaussian-prior oracle and a small
//! trainable convolutional denoiser.

mod checkpoint;
mod gaussian;
mod loss;
mod net;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, ParamBlock};
pub use gaussian::{gaussian_score, GaussianPrior, GaussianScore};
pub use loss::dsm_loss;
pub use net::{Architecture, DenoiserNet, Weights, TIME_FLOOR};
pub use train::{train_denoiser, LossTerms, TrainConfig, TrainReport};

use crate::error::Result;
use crate::field::ComplexField;

/// Anything that maps `(x, t)` to a score field `s(x, t) ≈ ∇ₓ log p_t(x)`.
///
/// Implementations must be shareable read-only across sampler chains.
pub trait ScoreModel: Send + Sync {
    fn score(&self, x: &ComplexField, t: f64) -> Result<ComplexField>;
}

impl<F> ScoreModel for F
where
    F: Fn(&ComplexField, f64) -> Result<ComplexField> + Send + Sync,
{
    fn score(&self, x: &ComplexField, t: f64) -> Result<ComplexField> {
        self(x, t)
    }
}
