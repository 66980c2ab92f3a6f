//! Structure-guided mean-reverting SDE inpainting.
//!
//! The texture `y` (the image being inpainted) and an auxiliary structure `x`
//! (grayscale or edge map) are each diffused by a mean-reverting SDE
//! `dy = θ_t (μ - y) dt + η_t dw` toward their masked versions. The reverse
//! process is driven by closed-form optimal reverse states, so every stage of
//! the pipeline can be checked against analytic oracles without a trained
//! network:
//!
//! - [`schedule`]: time-discretized mean-reversion speeds and transition coefficients.
//! - [`image`]: image grids, masks, structure extraction, synthetic fixtures, PNM I/O.
//! - [`sde`]: forward sampling and the optimal reverse states (unguided and structure-guided).
//! - [`predictor`]: the reverse-increment predictor interface, training objectives and
//!   spatially adaptive normalization.
//! - [`correlation`]: texture/structure correlation scoring and its losses.
//! - [`resampler`]: the adaptive resampling inference loop.
//! - [`metrics`]: PSNR, SSIM and region-split histogram KL divergence.
//! - [`pipeline`]: experiment presets, configuration and batch execution.

pub mod config;
pub mod correlation;
pub mod error;
pub mod image;
pub mod metrics;
pub mod pipeline;
pub mod predictor;
pub mod resampler;
pub mod schedule;
pub mod sde;

pub use error::{Error, Result};
pub use image::{ImageGrid, Mask};
pub use schedule::{Schedule, ScheduleKind, ScheduleSpec};
pub use sde::DiffusionState;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream used throughout; portable and reproducible per seed.
pub type Rng = ChaCha8Rng;

/// Independent, reproducible stream `stream` derived from `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
