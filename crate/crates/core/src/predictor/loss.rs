use std::collections::BTreeMap;

use super::Predictor;
use crate::error::{invalid, Result};
use crate::image::ImageGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormOrder {
    #[default]
    L1,
    L2,
}

impl NormOrder {
    /// Per-element normalized norm `(mean |r|^p)^{1/p}`.
    fn of(self, residual: impl Iterator<Item = f64>) -> f64 {
        let (mut acc, mut n) = (0.0, 0usize);
        for r in residual {
            acc += match self {
                NormOrder::L1 => r.abs(),
                NormOrder::L2 => r * r,
            };
            n += 1;
        }
        let mean = acc / n as f64;
        match self {
            NormOrder::L1 => mean,
            NormOrder::L2 => mean.sqrt(),
        }
    }
}

/// Per-timestep weights `β_1..=β_T` and the norm order.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    beta: Vec<f64>,
    pub norm: NormOrder,
}

impl LossWeights {
    pub fn new(beta: Vec<f64>, norm: NormOrder) -> Result<Self> {
        if beta.is_empty() {
            return Err(invalid("loss weights need at least one timestep"));
        }
        if let Some(b) = beta.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(invalid(format!("loss weights must be positive, got {b}")));
        }
        Ok(Self { beta, norm })
    }

    pub fn uniform(steps: usize, norm: NormOrder) -> Result<Self> {
        Self::new(vec![1.0; steps], norm)
    }

    pub fn beta(&self, t: usize) -> Result<f64> {
        t.checked_sub(1)
            .and_then(|i| self.beta.get(i))
            .copied()
            .ok_or_else(|| invalid(format!("no loss weight for t = {t}")))
    }
}

/// One training example: the state at `t`, its optimal reverse target
/// (unguided or structure-guided) and the structure guide, if any.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub state: ImageGrid,
    pub target: ImageGrid,
    pub guide: Option<ImageGrid>,
    pub t: usize,
}

/// `Σ_t β_t · mean_batch ‖(y_t - predict(y_t)) - target‖_p`.
///
/// The same functional covers the unguided objective (targets from the
/// unguided reverse state) and the guided one (targets from the guided
/// ideal state); only the target source differs.
pub fn training_loss(
    pred: &dyn Predictor,
    batch: &[TrainingSample],
    w: &LossWeights,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(invalid("training batch is empty"));
    }
    let mut per_t: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for sample in batch {
        sample.state.check_same_shape(&sample.target)?;
        let increment = pred.predict(&sample.state, sample.guide.as_ref(), sample.t)?;
        sample.state.check_same_shape(&increment)?;
        let residual = sample
            .state
            .data()
            .iter()
            .zip(increment.data())
            .zip(sample.target.data())
            .map(|((&y, &d), &g)| (y - d) - g);
        let entry = per_t.entry(sample.t).or_default();
        entry.0 += w.norm.of(residual);
        entry.1 += 1;
    }
    per_t
        .into_iter()
        .map(|(t, (sum, n))| Ok(w.beta(t)? * sum / n as f64))
        .sum()
}
