//! Forward diffusion and optimal reverse states of the mean-reverting SDE.
//!
//! The forward marginal is `y_t | y_0 ~ N(μ + (y_0 - μ) e^{-θ̄_t}, λ²(1 - e^{-2θ̄_t}))`.
//! One reverse step from `y_t` has the Gaussian posterior
//! `q(y_{t-1} | y_t, y_0) ∝ q(y_t | y_{t-1}) q(y_{t-1} | y_0)`, whose mean is
//! [`posterior_texture`] and whose variance is [`posterior_variance`].
//!
//! Under structure guidance the ideal texture state is driven by the
//! structure chain instead of `y_t`; it is available both from the structure
//! at `t` ([`guided_ideal_terms`]) and from the already denoised structure at
//! `t-1` ([`guided_state_from_denoised`]). The two agree whenever the
//! denoised structure is the structure's own optimal reverse state.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{invalid, shape_mismatch, Error, Result};
use crate::image::ImageGrid;
use crate::predictor::Predictor;
use crate::schedule::{one_minus_exp_neg2, Schedule};
use crate::Rng;

/// The fixed endpoints of a diffusion: the clean state and the mean it reverts to.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchors {
    /// `y_0` (texture) or `x_0` (structure).
    pub init: ImageGrid,
    /// `μ_y` or `μ_x`.
    pub mean: ImageGrid,
}

impl Anchors {
    pub fn new(init: ImageGrid, mean: ImageGrid) -> Result<Arc<Self>> {
        init.check_same_shape(&mean)?;
        Ok(Arc::new(Self { init, mean }))
    }
}

/// A texture or structure sample at timestep `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionState {
    pub t: usize,
    pub value: ImageGrid,
    anchors: Arc<Anchors>,
    schedule: Arc<Schedule>,
}

impl DiffusionState {
    /// The state at `t = 0`, equal to the initial anchor.
    pub fn clean(anchors: Arc<Anchors>, schedule: Arc<Schedule>) -> Self {
        Self {
            t: 0,
            value: anchors.init.clone(),
            anchors,
            schedule,
        }
    }

    pub fn new(
        t: usize,
        value: ImageGrid,
        anchors: Arc<Anchors>,
        schedule: Arc<Schedule>,
    ) -> Result<Self> {
        if t > schedule.len() {
            return Err(invalid(format!("t = {t} exceeds T = {}", schedule.len())));
        }
        value.check_same_shape(&anchors.init)?;
        Ok(Self {
            t,
            value,
            anchors,
            schedule,
        })
    }

    /// Same anchors and schedule, new time and value.
    pub fn with_value(&self, t: usize, value: ImageGrid) -> Result<Self> {
        Self::new(t, value, self.anchors.clone(), self.schedule.clone())
    }

    pub fn anchor_init(&self) -> &ImageGrid {
        &self.anchors.init
    }

    pub fn anchor_mean(&self) -> &ImageGrid {
        &self.anchors.mean
    }

    pub fn anchors(&self) -> &Arc<Anchors> {
        &self.anchors
    }

    pub fn schedule(&self) -> &Arc<Schedule> {
        &self.schedule
    }
}

fn gaussian(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `y_T = μ + λ ε`.
pub fn terminal_state(
    anchors: Arc<Anchors>,
    schedule: Arc<Schedule>,
    rng: &mut Rng,
) -> Result<DiffusionState> {
    let lambda = schedule.lambda();
    let value = anchors.mean.map(|m| m + lambda * gaussian(rng));
    DiffusionState::new(schedule.len(), value, anchors, schedule)
}

/// Exact draw from `q(y_t | y_0)`.
pub fn forward_marginal_sample(
    state0: &DiffusionState,
    t: usize,
    rng: &mut Rng,
) -> Result<DiffusionState> {
    if state0.t != 0 {
        return Err(invalid(format!(
            "forward sampling starts at t = 0, got {}",
            state0.t
        )));
    }
    let s = &state0.schedule;
    s.check_step(t)?;
    let decay = s.mean_decay(t)?;
    let sd = s.marginal_variance(t)?.sqrt();
    let value = state0
        .anchor_init()
        .zip_map(state0.anchor_mean(), |y0, mu| {
            mu + (y0 - mu) * decay + sd * gaussian(rng)
        })?;
    state0.with_value(t, value)
}

/// Euler–Maruyama integration of `dy = θ(μ - y)dt + η dw` with `substeps`
/// sub-iterations per unit step. Returns the states at `t = 1..=T`.
pub fn forward_em_path(
    state0: &DiffusionState,
    substeps: usize,
    rng: &mut Rng,
) -> Result<Vec<DiffusionState>> {
    if substeps == 0 {
        return Err(invalid("substeps must be >= 1"));
    }
    let s = state0.schedule.clone();
    let h = 1.0 / substeps as f64;
    let mu = state0.anchor_mean().data();
    let mut y = state0.value.clone();
    let mut path = Vec::with_capacity(s.len());
    for t in 1..=s.len() {
        let theta = s.step(t)?;
        let noise_sd = (s.eta_sq(t)? * h).sqrt();
        for _ in 0..substeps {
            for (v, &m) in y.data_mut().iter_mut().zip(mu) {
                *v += theta * (m - *v) * h + noise_sd * gaussian(rng);
            }
        }
        path.push(state0.with_value(t, y.clone())?);
    }
    Ok(path)
}

/// Coefficients of `y_t - μ` and `y_0 - μ` in the optimal reverse state.
pub fn posterior_coeffs(s: &Schedule, t: usize) -> Result<(f64, f64)> {
    s.check_step(t)?;
    let step = s.step(t)?;
    let prev = s.cumulative(t - 1)?;
    let cur = s.cumulative(t)?;
    let denom = one_minus_exp_neg2(cur);
    if denom == 0.0 {
        // no diffusion up to t: the reverse step is the identity
        return Ok((1.0, 0.0));
    }
    let c_state = one_minus_exp_neg2(prev) / denom * (-step).exp();
    let c_init = one_minus_exp_neg2(step) / denom * (-prev).exp();
    Ok((c_state, c_init))
}

/// Variance of `q(y_{t-1} | y_t, y_0)`:
/// `λ²(1 - e^{-2θ'_t})(1 - e^{-2θ̄_{t-1}}) / (1 - e^{-2θ̄_t})`.
pub fn posterior_variance(s: &Schedule, t: usize) -> Result<f64> {
    s.check_step(t)?;
    let denom = one_minus_exp_neg2(s.cumulative(t)?);
    if denom == 0.0 {
        return Ok(0.0);
    }
    let l2 = s.lambda() * s.lambda();
    Ok(l2 * one_minus_exp_neg2(s.step(t)?) * one_minus_exp_neg2(s.cumulative(t - 1)?) / denom)
}

/// Optimal reverse state from an explicit value at step `t`.
pub fn posterior_mean(
    value: &ImageGrid,
    anchors: &Anchors,
    s: &Schedule,
    t: usize,
) -> Result<ImageGrid> {
    if t == 0 {
        return Err(invalid("no reverse step from t = 0"));
    }
    value.check_same_shape(&anchors.init)?;
    let (c_state, c_init) = posterior_coeffs(s, t)?;
    let data = value
        .data()
        .iter()
        .zip(anchors.init.data())
        .zip(anchors.mean.data())
        .map(|((&yt, &y0), &mu)| c_state * (yt - mu) + c_init * (y0 - mu) + mu)
        .collect();
    ImageGrid::new(value.height(), value.width(), value.channels(), data)
}

/// `y*_{t-1}` for the texture chain.
pub fn posterior_texture(y_t: &DiffusionState) -> Result<ImageGrid> {
    posterior_mean(&y_t.value, &y_t.anchors, &y_t.schedule, y_t.t)
}

/// `x*_{t-1}` for the structure chain; the same closed form on `(δ, x, μ_x)`.
pub fn posterior_structure(x_t: &DiffusionState) -> Result<ImageGrid> {
    posterior_mean(&x_t.value, &x_t.anchors, &x_t.schedule, x_t.t)
}

/// The four addends of the structure-guided ideal texture state.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidedTerms {
    /// `C (x_t - μ_x)`.
    pub consistency: ImageGrid,
    /// `C e^{-δ̄_t} (x_0 - μ_x)`; enters with a minus sign.
    pub balance: ImageGrid,
    /// `e^{-θ̄_{t-1}} (y_0 - μ_y)`.
    pub semantics: ImageGrid,
    /// `μ_y`.
    pub unmasked: ImageGrid,
}

impl GuidedTerms {
    /// `consistency - balance + semantics + unmasked`.
    pub fn sum(&self) -> ImageGrid {
        let data = self
            .consistency
            .data()
            .iter()
            .zip(self.balance.data())
            .zip(self.semantics.data())
            .zip(self.unmasked.data())
            .map(|(((&c, &b), &s), &u)| c - b + s + u)
            .collect();
        ImageGrid::new(
            self.unmasked.height(),
            self.unmasked.width(),
            self.unmasked.channels(),
            data,
        )
        .expect("addends share the texture shape")
    }
}

fn check_guidance_shapes(structure: &ImageGrid, texture: &ImageGrid) -> Result<()> {
    if !structure.same_extent(texture)
        || (structure.channels() != 1 && structure.channels() != texture.channels())
    {
        return Err(shape_mismatch(
            texture.shape_string(),
            structure.shape_string(),
        ));
    }
    Ok(())
}

fn check_same_length(sched_y: &Schedule, sched_x: &Schedule) -> Result<()> {
    if sched_y.len() != sched_x.len() {
        return Err(Error::ScheduleMismatch(format!(
            "texture T = {} but structure T = {}",
            sched_y.len(),
            sched_x.len()
        )));
    }
    Ok(())
}

/// Scales a structure-shaped image into the texture's channel layout.
fn structure_term(structure: &ImageGrid, coeff: f64, channels: usize) -> Result<ImageGrid> {
    structure.map(|v| coeff * v).broadcast(channels)
}

/// `C = (1 - e^{-2θ̄_{t-1}}) / (1 - e^{-2δ̄_t}) · e^{-δ'_t}`.
fn consistency_coeff(sched_y: &Schedule, sched_x: &Schedule, t: usize) -> Result<f64> {
    let num = one_minus_exp_neg2(sched_y.cumulative(t - 1)?);
    if num == 0.0 {
        return Ok(0.0);
    }
    let denom = one_minus_exp_neg2(sched_x.cumulative(t)?);
    if denom == 0.0 {
        return Err(Error::ScheduleMismatch(format!(
            "structure schedule has not diffused by t = {t} while the texture has"
        )));
    }
    Ok(num / denom * (-sched_x.step(t)?).exp())
}

/// Addends of `ỹ*_{t-1}` computed from the structure state `x_t`.
pub fn guided_ideal_terms(
    x_t: &DiffusionState,
    y_anchors: &Anchors,
    sched_y: &Schedule,
) -> Result<GuidedTerms> {
    let t = x_t.t;
    if t == 0 {
        return Err(invalid("no reverse step from t = 0"));
    }
    let sched_x = &x_t.schedule;
    check_same_length(sched_y, sched_x)?;
    check_guidance_shapes(&x_t.value, &y_anchors.init)?;
    let channels = y_anchors.init.channels();

    let c = consistency_coeff(sched_y, sched_x, t)?;
    let x_mu = x_t.anchor_mean();
    let centered_state = x_t.value.zip_map(x_mu, |x, m| x - m)?;
    let centered_init = x_t.anchor_init().zip_map(x_mu, |x, m| x - m)?;
    let semantics_coeff = sched_y.mean_decay(t - 1)?;
    Ok(GuidedTerms {
        consistency: structure_term(&centered_state, c, channels)?,
        balance: structure_term(&centered_init, c * sched_x.mean_decay(t)?, channels)?,
        semantics: y_anchors
            .init
            .zip_map(&y_anchors.mean, |y0, mu| semantics_coeff * (y0 - mu))?,
        unmasked: y_anchors.mean.clone(),
    })
}

/// `ỹ*_{t-1}` from the structure state `x_t`.
pub fn guided_ideal_state(
    x_t: &DiffusionState,
    y_anchors: &Anchors,
    sched_y: &Schedule,
) -> Result<ImageGrid> {
    Ok(guided_ideal_terms(x_t, y_anchors, sched_y)?.sum())
}

/// `ỹ*_{t-1}` from the denoised structure `x_{t-1}`:
///
/// `K (x_{t-1} - μ_x) - K e^{-δ̄_{t-1}} (x_0 - μ_x) + e^{-θ̄_{t-1}} (y_0 - μ_y) + μ_y`
/// with `K = (1 - e^{-2θ̄_{t-1}}) / (1 - e^{-2δ̄_{t-1}})`.
///
/// At `t = 1` the texture numerator vanishes and `K` is taken as 0, which
/// matches the `x_t` form there.
pub fn guided_state_from_denoised(
    x_prev: &ImageGrid,
    x_anchors: &Anchors,
    sched_x: &Schedule,
    y_anchors: &Anchors,
    sched_y: &Schedule,
    t: usize,
) -> Result<ImageGrid> {
    check_same_length(sched_y, sched_x)?;
    sched_y.check_step(t)?;
    check_guidance_shapes(x_prev, &y_anchors.init)?;
    x_prev.check_same_shape(&x_anchors.init)?;

    let num = one_minus_exp_neg2(sched_y.cumulative(t - 1)?);
    let k = if num == 0.0 {
        0.0
    } else {
        let denom = one_minus_exp_neg2(sched_x.cumulative(t - 1)?);
        if denom == 0.0 {
            return Err(Error::ScheduleMismatch(format!(
                "structure schedule has not diffused by t = {} while the texture has",
                t - 1
            )));
        }
        num / denom
    };
    let x_decay = sched_x.mean_decay(t - 1)?;
    let y_decay = sched_y.mean_decay(t - 1)?;

    // structure contribution, in the structure's own channel layout
    let guide = x_prev
        .data()
        .iter()
        .zip(x_anchors.init.data())
        .zip(x_anchors.mean.data())
        .map(|((&xp, &x0), &mu)| k * (xp - mu) - k * x_decay * (x0 - mu))
        .collect();
    let guide = ImageGrid::new(x_prev.height(), x_prev.width(), x_prev.channels(), guide)?
        .broadcast(y_anchors.init.channels())?;

    let data = guide
        .data()
        .iter()
        .zip(y_anchors.init.data())
        .zip(y_anchors.mean.data())
        .map(|((&g, &y0), &mu)| g + y_decay * (y0 - mu) + mu)
        .collect();
    ImageGrid::new(
        y_anchors.init.height(),
        y_anchors.init.width(),
        y_anchors.init.channels(),
        data,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReverseMode {
    /// `y_{t-1} = y_t - increment`.
    #[default]
    DeterministicMean,
    /// Adds `N(0, posterior_variance)` to each deterministic step.
    PosteriorNoise,
}

/// Where the texture predictor's guidance comes from.
pub enum Guidance<'a> {
    /// Unguided reverse process.
    None,
    /// A precomputed structure chain indexed by time: `chain[k]` is `x_k`.
    Chain(&'a [ImageGrid]),
    /// Denoise the structure alongside the texture, starting at `x_T`.
    Denoise {
        x_terminal: &'a DiffusionState,
        predictor: &'a dyn Predictor,
    },
}

/// Both chains of a reverse run, ordered from `t = T` down to `t = 0`.
#[derive(Debug, Clone)]
pub struct ReverseChain {
    pub texture: Vec<DiffusionState>,
    pub structure: Option<Vec<DiffusionState>>,
}

impl ReverseChain {
    pub fn final_texture(&self) -> &DiffusionState {
        self.texture.last().expect("chain holds at least y_T")
    }
}

/// One reverse step through a predictor: `state - increment`.
pub(crate) fn denoise_step(
    predictor: &dyn Predictor,
    state: &ImageGrid,
    guide: Option<&ImageGrid>,
    t: usize,
) -> Result<ImageGrid> {
    let increment = predictor.predict(state, guide, t)?;
    state.zip_map(&increment, |v, d| v - d)
}

/// Runs the reverse process from `y_T` to `y_0`.
pub fn reverse_chain(
    y_terminal: &DiffusionState,
    guidance: Guidance<'_>,
    predictor: &dyn Predictor,
    mode: ReverseMode,
    rng: &mut Rng,
) -> Result<ReverseChain> {
    let sched = y_terminal.schedule.clone();
    let big_t = y_terminal.t;
    if let Guidance::Chain(xs) = &guidance {
        if xs.len() < big_t {
            return Err(invalid(format!(
                "structure chain has {} states, needs x_0..x_{}",
                xs.len(),
                big_t - 1
            )));
        }
    }
    let mut structure = match &guidance {
        Guidance::Denoise { x_terminal, .. } => {
            check_same_length(&sched, x_terminal.schedule())?;
            if x_terminal.t != big_t {
                return Err(invalid(format!(
                    "structure starts at t = {}, texture at t = {big_t}",
                    x_terminal.t
                )));
            }
            Some(vec![(*x_terminal).clone()])
        }
        _ => None,
    };

    let mut texture = Vec::with_capacity(big_t + 1);
    texture.push(y_terminal.clone());
    for t in (1..=big_t).rev() {
        let guide = match (&guidance, structure.as_mut()) {
            (Guidance::None, _) => None,
            (Guidance::Chain(xs), _) => Some(xs[t - 1].clone()),
            (Guidance::Denoise { predictor: px, .. }, Some(xc)) => {
                let x_t = xc.last().expect("structure chain is seeded with x_T");
                let x_prev = denoise_step(*px, &x_t.value, None, t)?;
                xc.push(x_t.with_value(t - 1, x_prev.clone())?);
                Some(x_prev)
            }
            (Guidance::Denoise { .. }, None) => unreachable!("structure chain initialised above"),
        };
        let y_t = texture.last().expect("chain holds y_t");
        let mut y_prev = denoise_step(predictor, &y_t.value, guide.as_ref(), t)?;
        if mode == ReverseMode::PosteriorNoise {
            let sd = posterior_variance(&sched, t)?.sqrt();
            if sd > 0.0 {
                for v in y_prev.data_mut() {
                    *v += sd * gaussian(rng);
                }
            }
        }
        let next = y_t.with_value(t - 1, y_prev)?;
        texture.push(next);
    }
    Ok(ReverseChain { texture, structure })
}
