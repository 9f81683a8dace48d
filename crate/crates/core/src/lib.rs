//! High-frequency-subspace score diffusion for undersampled MR reconstruction.
//!
//! The crate is organised bottom-up:
//!
//! - [`field`]: complex grids, centered unitary FFTs, the frequency-split
//!   projectors `F_h`/`F_l`, the encoding operator and a seedable RNG.
//! - [`diffusion`]: noise schedules, perturbation kernels of the VP, VE,
//!   HFS-VP and HFS-VE processes, and the discrete forward chain.
//! - [`score`]: the [`score::ScoreModel`] interface, an analytic
//!   Gaussian-prior score and a small trainable convolutional denoiser.
//! - [`sampler`]: predictor–corrector posterior sampling with data
//!   consistency.
//! - [`acquisition`]: phantoms, coil maps, undersampling masks and k-space
//!   synthesis.
//! - [`bench`]: metrics, the Gaussian testbed, sweeps, ablations, timing and
//!   run manifests.
//!
//! ```
//! use hfsdiff::field::{apply_fh, apply_fl, Axis, FrequencyMask, RngStream, Domain};
//!
//! let x = RngStream::new(7, 0).normal_field(16, 16, Domain::Image);
//! let m = FrequencyMask::new(4, Axis::Rows, (16, 16)).unwrap();
//! let parts = apply_fh(&x, &m).unwrap().add(&apply_fl(&x, &m).unwrap());
//! assert!(parts.distance(&x) < 1e-12 * x.norm());
//! ```

pub mod acquisition;
pub mod bench;
pub mod diffusion;
pub mod error;
pub mod field;
pub mod manifest;
pub mod sampler;
pub mod score;

pub use error::{Error, Result};

/// Chapters of the guide, compiled as doc-tests so that the snippets cannot
/// drift from the API.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub struct Intro;
    #[doc = include_str!("../../../book/src/fields.md")]
    pub struct Fields;
    #[doc = include_str!("../../../book/src/diffusion.md")]
    pub struct Diffusion;
    #[doc = include_str!("../../../book/src/scores.md")]
    pub struct Scores;
    #[doc = include_str!("../../../book/src/sampling.md")]
    pub struct Sampling;
    #[doc = include_str!("../../../book/src/acquisition.md")]
    pub struct Acquisition;
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    pub struct Benchmarks;
}
