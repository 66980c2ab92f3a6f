//! Reverse-increment predictors and the objectives they are trained against.
//!
//! A predictor returns the increment `(dy_t)` such that the denoised state is
//! `y_{t-1} = y_t - (dy_t)`. No network is trained here; the analytic
//! [`OraclePredictor`] returns the exact optimal increment.

mod loss;
mod spade;

pub use loss::{training_loss, LossWeights, NormOrder, TrainingSample};
pub use spade::{
    bilinear_resize, positional_stats, spade_normalize, spade_pyramid, FeatureMap,
    ModulationProvider, PositionalStats, StructureModulation, SPADE_EPS,
};

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::image::ImageGrid;
use crate::schedule::Schedule;
use crate::sde::{guided_state_from_denoised, posterior_mean, Anchors};

pub trait Predictor: Send + Sync {
    /// Increment for the state at `t`; `guide` is the denoised structure `x_{t-1}`.
    fn predict(&self, state: &ImageGrid, guide: Option<&ImageGrid>, t: usize) -> Result<ImageGrid>;

    fn is_guided(&self) -> bool;
}

/// The exact closed-form increment: `state - target`, where the target is
/// the unguided optimal reverse state or, when guided, the structure-guided
/// ideal state built from the denoised structure.
#[derive(Debug, Clone)]
pub struct OraclePredictor {
    anchors: Arc<Anchors>,
    schedule: Arc<Schedule>,
    structure: Option<(Arc<Anchors>, Arc<Schedule>)>,
}

impl OraclePredictor {
    pub fn unguided(anchors: Arc<Anchors>, schedule: Arc<Schedule>) -> Self {
        Self {
            anchors,
            schedule,
            structure: None,
        }
    }

    pub fn guided(
        anchors: Arc<Anchors>,
        schedule: Arc<Schedule>,
        structure_anchors: Arc<Anchors>,
        structure_schedule: Arc<Schedule>,
    ) -> Self {
        Self {
            anchors,
            schedule,
            structure: Some((structure_anchors, structure_schedule)),
        }
    }

    /// Builder-style entry matching a `guided` flag; guided without structure
    /// anchors is an error.
    pub fn new(
        anchors: Arc<Anchors>,
        schedule: Arc<Schedule>,
        structure: Option<(Arc<Anchors>, Arc<Schedule>)>,
        guided: bool,
    ) -> Result<Self> {
        match (guided, structure) {
            (true, None) => Err(invalid(
                "guided oracle needs structure anchors and schedule",
            )),
            (true, s) => Ok(Self {
                anchors,
                schedule,
                structure: s,
            }),
            (false, _) => Ok(Self::unguided(anchors, schedule)),
        }
    }

    /// The denoised state the oracle steers to.
    pub fn target(
        &self,
        state: &ImageGrid,
        guide: Option<&ImageGrid>,
        t: usize,
    ) -> Result<ImageGrid> {
        match &self.structure {
            None => posterior_mean(state, &self.anchors, &self.schedule, t),
            Some((xa, xs)) => {
                let guide =
                    guide.ok_or_else(|| invalid("guided oracle called without structure"))?;
                state.check_same_shape(&self.anchors.init)?;
                guided_state_from_denoised(guide, xa, xs, &self.anchors, &self.schedule, t)
            }
        }
    }
}

impl Predictor for OraclePredictor {
    fn predict(&self, state: &ImageGrid, guide: Option<&ImageGrid>, t: usize) -> Result<ImageGrid> {
        let target = self.target(state, guide, t)?;
        state.zip_map(&target, |s, g| s - g)
    }

    fn is_guided(&self) -> bool {
        self.structure.is_some()
    }
}

/// Predicts no change; the chain stays where it starts.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPredictor;

impl Predictor for ZeroPredictor {
    fn predict(
        &self,
        state: &ImageGrid,
        _guide: Option<&ImageGrid>,
        _t: usize,
    ) -> Result<ImageGrid> {
        Ok(state.map(|_| 0.0))
    }

    fn is_guided(&self) -> bool {
        false
    }
}

/// Wraps a predictor and adds a constant to every increment.
#[derive(Clone)]
pub struct OffsetPredictor<P> {
    pub inner: P,
    pub offset: f64,
}

impl<P: Predictor> Predictor for OffsetPredictor<P> {
    fn predict(&self, state: &ImageGrid, guide: Option<&ImageGrid>, t: usize) -> Result<ImageGrid> {
        Ok(self
            .inner
            .predict(state, guide, t)?
            .map(|v| v + self.offset))
    }

    fn is_guided(&self) -> bool {
        self.inner.is_guided()
    }
}
