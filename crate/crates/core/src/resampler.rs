//! Adaptive resampling inference.
//!
//! At each timestep the structure is denoised first and guides the texture.
//! The pair's correlation score becomes that step's threshold `Δ`; then, up
//! to `U` times, the structure is re-noised by one forward step, denoised
//! again, the texture is re-denoised under the new structure and the pair is
//! re-scored. An updated pair is adopted while its score passes the
//! threshold test; the first failure ends the step.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::correlation::{clamp_score, Scorer};
use crate::error::{invalid, Error, Result};
use crate::image::{merge_result, ImageGrid, Mask};
use crate::metrics::{region_mse, Region};
use crate::predictor::Predictor;
use crate::sde::{denoise_step, DiffusionState, ReverseChain};
use crate::Rng;

pub const DEFAULT_MAX_ITERS: usize = 5;

/// Which side of the threshold adopts a resampled pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdoptOn {
    /// Adopt when `S < Δ`.
    #[default]
    Lt,
    /// Adopt when `S > Δ`.
    Gt,
}

impl AdoptOn {
    fn accepts(self, score: f64, delta: f64) -> bool {
        match self {
            AdoptOn::Lt => score < delta,
            AdoptOn::Gt => score > delta,
        }
    }
}

impl std::str::FromStr for AdoptOn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lt" => Ok(AdoptOn::Lt),
            "gt" => Ok(AdoptOn::Gt),
            other => Err(Error::Config(format!(
                "adopt_on must be `lt` or `gt`, got `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for AdoptOn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AdoptOn::Lt => "lt",
            AdoptOn::Gt => "gt",
        })
    }
}

#[derive(Clone)]
pub struct ResampleConfig {
    /// `U`: maximum resampling iterations per timestep.
    pub max_iters: usize,
    pub scorer: Arc<dyn Scorer>,
    /// Snapshot cadence in timesteps for callers that write chain images; 0 disables.
    pub snapshot_every: usize,
    pub adopt_on: AdoptOn,
}

impl ResampleConfig {
    pub fn new(max_iters: usize, scorer: Arc<dyn Scorer>) -> Self {
        Self {
            max_iters,
            scorer,
            snapshot_every: 0,
            adopt_on: AdoptOn::default(),
        }
    }
}

/// One forward Euler step of the structure SDE from `x_{t-1}` to `x̃_t`:
/// `x̃_t = x_{t-1} + δ'_t (μ_x - x_{t-1}) + sqrt(σ_t²) ε`.
pub fn renoise_structure(x_prev: &DiffusionState, rng: &mut Rng) -> Result<DiffusionState> {
    let t = x_prev.t + 1;
    let s = x_prev.schedule();
    if t > s.len() {
        return Err(invalid(format!("cannot re-noise past T = {}", s.len())));
    }
    let rate = s.step(t)?;
    let sd = s.eta_sq(t)?.sqrt();
    let value = x_prev.value.zip_map(x_prev.anchor_mean(), |x, mu| {
        let eps: f64 = rng.sample(StandardNormal);
        x + rate * (mu - x) + sd * eps
    })?;
    x_prev.with_value(t, value)
}

/// Per-timestep log of an inference run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub t: usize,
    /// Threshold `Δ`: the score of the pair before resampling.
    pub delta: f64,
    /// Resampling iterations executed (each one scored).
    pub inner_iters: usize,
    /// Iterations whose pair was adopted.
    pub adopted: usize,
    /// Score of the pair kept for this step.
    pub final_score: f64,
    pub masked_mse: f64,
    pub unmasked_mse: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<RunRow>,
}

pub const RUN_RECORD_HEADER: [&str; 6] = [
    "t",
    "delta",
    "inner_iters",
    "final_score",
    "masked_mse",
    "unmasked_mse",
];

impl RunRecord {
    pub fn total_inner_iters(&self) -> usize {
        self.rows.iter().map(|r| r.inner_iters).sum()
    }

    pub fn total_adopted(&self) -> usize {
        self.rows.iter().map(|r| r.adopted).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(RUN_RECORD_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.t.to_string(),
                r.delta.to_string(),
                r.inner_iters.to_string(),
                r.final_score.to_string(),
                r.masked_mse.to_string(),
                r.unmasked_mse.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses a file written by [`RunRecord::write_csv`]; `adopted` is not
    /// serialized and reads back as 0.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != RUN_RECORD_HEADER {
            return Err(Error::Config(format!(
                "unexpected run record header {header:?}"
            )));
        }
        let parse_err = |field: &str| Error::Config(format!("bad run record field `{field}`"));
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let f = |i: usize| rec.get(i).unwrap_or_default();
            let num = |i: usize| f(i).parse::<f64>().map_err(|_| parse_err(f(i)));
            let int = |i: usize| f(i).parse::<usize>().map_err(|_| parse_err(f(i)));
            rows.push(RunRow {
                t: int(0)?,
                delta: num(1)?,
                inner_iters: int(2)?,
                adopted: 0,
                final_score: num(3)?,
                masked_mse: num(4)?,
                unmasked_mse: num(5)?,
            });
        }
        Ok(Self { rows })
    }
}

/// Result of [`run_inference`].
#[derive(Debug, Clone)]
pub struct Inference {
    /// `y_0` merged with the known pixels of the masked image.
    pub merged: ImageGrid,
    pub chain: ReverseChain,
    pub record: RunRecord,
}

impl Inference {
    pub fn denoised(&self) -> &ImageGrid {
        &self.chain.final_texture().value
    }
}

/// The adaptive resampling loop from `(y_T, x_T)` down to `t = 0`.
pub fn run_inference(
    y_terminal: &DiffusionState,
    x_terminal: &DiffusionState,
    pred_y: &dyn Predictor,
    pred_x: &dyn Predictor,
    mask: &Mask,
    cfg: &ResampleConfig,
    rng: &mut Rng,
) -> Result<Inference> {
    let big_t = y_terminal.t;
    if x_terminal.t != big_t || x_terminal.schedule().len() != y_terminal.schedule().len() {
        return Err(Error::ScheduleMismatch(format!(
            "texture at t = {big_t} (T = {}), structure at t = {} (T = {})",
            y_terminal.schedule().len(),
            x_terminal.t,
            x_terminal.schedule().len()
        )));
    }
    mask.check_extent(&y_terminal.value)?;
    mask.check_extent(&x_terminal.value)?;
    let gt = y_terminal.anchor_init();
    let score = |y: &ImageGrid, x: &ImageGrid, t: usize| -> Result<f64> {
        Ok(clamp_score(cfg.scorer.score(y, x, t)?))
    };

    let mut texture = vec![y_terminal.clone()];
    let mut structure = vec![x_terminal.clone()];
    let mut record = RunRecord::default();
    for t in (1..=big_t).rev() {
        let y_t = texture.last().expect("seeded with y_T").clone();
        let x_t = structure.last().expect("seeded with x_T").clone();

        let mut x_prev = x_t.with_value(t - 1, denoise_step(pred_x, &x_t.value, None, t)?)?;
        let mut y_prev = denoise_step(pred_y, &y_t.value, Some(&x_prev.value), t)?;
        let delta = score(&y_prev, &x_prev.value, t - 1)?;

        let mut final_score = delta;
        let (mut inner_iters, mut adopted) = (0, 0);
        for _ in 0..cfg.max_iters {
            inner_iters += 1;
            let x_renoised = renoise_structure(&x_prev, rng)?;
            let x_cand = denoise_step(pred_x, &x_renoised.value, None, t)?;
            let y_cand = denoise_step(pred_y, &y_t.value, Some(&x_cand), t)?;
            let s = score(&y_cand, &x_cand, t - 1)?;
            if cfg.adopt_on.accepts(s, delta) {
                x_prev = x_prev.with_value(t - 1, x_cand)?;
                y_prev = y_cand;
                final_score = s;
                adopted += 1;
            } else {
                break;
            }
        }

        record.rows.push(RunRow {
            t,
            delta,
            inner_iters,
            adopted,
            final_score,
            masked_mse: region_mse(&y_prev, gt, mask, Region::Masked).unwrap_or(f64::NAN),
            unmasked_mse: region_mse(&y_prev, gt, mask, Region::Known).unwrap_or(f64::NAN),
        });
        texture.push(y_t.with_value(t - 1, y_prev)?);
        structure.push(x_prev);
    }

    let chain = ReverseChain {
        texture,
        structure: Some(structure),
    };
    let merged = merge_result(&chain.final_texture().value, y_terminal.anchor_mean(), mask)?;
    Ok(Inference {
        merged,
        chain,
        record,
    })
}
