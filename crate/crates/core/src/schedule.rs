//! Time-discretized noise schedules for the mean-reverting SDEs.
//!
//! The same type serves the texture schedule (θ) and the structure schedule
//! (δ). Time runs over `t = 0..=T` with a unit step, so the per-step integral
//! `θ'_t = ∫_{t-1}^{t} θ_s ds` is also the (piecewise constant) mean-reversion
//! rate on `[t-1, t]`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Cumulative sums must agree with the running sum of steps to this tolerance.
pub const ACCUMULATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    /// `θ'_t = theta` for every step.
    Constant { theta: f64 },
    /// Log-linear interpolation from `theta_min` at `t = 1` to `theta_max` at `t = T`.
    Geometric { theta_min: f64, theta_max: f64 },
}

impl ScheduleKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScheduleKind::Constant { .. } => "constant",
            ScheduleKind::Geometric { .. } => "geometric",
        }
    }
}

/// Constructor arguments for a [`Schedule`]; this is what config files carry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub steps: usize,
    pub lambda: f64,
}

impl ScheduleSpec {
    pub fn constant(steps: usize, lambda: f64, theta: f64) -> Self {
        Self {
            kind: ScheduleKind::Constant { theta },
            steps,
            lambda,
        }
    }

    pub fn geometric(steps: usize, lambda: f64, theta_min: f64, theta_max: f64) -> Self {
        Self {
            kind: ScheduleKind::Geometric {
                theta_min,
                theta_max,
            },
            steps,
            lambda,
        }
    }

    pub fn build(&self) -> Result<Schedule> {
        make_schedule(self.kind, self.steps, self.lambda)
    }

    /// Writes `kind`, `T`, `lambda` and the kind's parameters under `prefix.`.
    pub fn write_kv(&self, prefix: &str, out: &mut BTreeMap<String, String>) {
        let mut put = |k: &str, v: String| {
            out.insert(format!("{prefix}.{k}"), v);
        };
        put("kind", self.kind.name().to_string());
        put("T", self.steps.to_string());
        put("lambda", self.lambda.to_string());
        match self.kind {
            ScheduleKind::Constant { theta } => put("theta", theta.to_string()),
            ScheduleKind::Geometric {
                theta_min,
                theta_max,
            } => {
                put("theta_min", theta_min.to_string());
                put("theta_max", theta_max.to_string());
            }
        }
    }

    /// Reads a section written by [`ScheduleSpec::write_kv`].
    pub fn read_kv(prefix: &str, kv: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| -> Result<&str> {
            kv.get(&format!("{prefix}.{k}"))
                .map(String::as_str)
                .ok_or_else(|| Error::Config(format!("missing key `{prefix}.{k}`")))
        };
        fn num<T: FromStr>(key: &str, raw: &str) -> Result<T> {
            raw.trim()
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse `{key}` = `{raw}`")))
        }
        let steps = num(&format!("{prefix}.T"), get("T")?)?;
        let lambda = num(&format!("{prefix}.lambda"), get("lambda")?)?;
        let kind = match get("kind")?.trim() {
            "constant" => ScheduleKind::Constant {
                theta: num("theta", get("theta")?)?,
            },
            "geometric" => ScheduleKind::Geometric {
                theta_min: num("theta_min", get("theta_min")?)?,
                theta_max: num("theta_max", get("theta_max")?)?,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown schedule kind `{other}` for `{prefix}`"
                )))
            }
        };
        Ok(Self {
            kind,
            steps,
            lambda,
        })
    }
}

/// One-step and marginal coefficients of the forward process at step `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionCoeffs {
    /// `e^{-θ'_t}`: mean decay over the single step `t-1 -> t`.
    pub a: f64,
    /// `e^{-θ̄_t}`: mean decay from `0` to `t`.
    pub b: f64,
    /// `λ²(1 - e^{-2θ̄_t})`: variance of `y_t` given `y_0`.
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// `θ'_1 ..= θ'_T`, stored zero-based.
    steps: Vec<f64>,
    /// `θ̄_0 ..= θ̄_T`.
    cumulative: Vec<f64>,
    lambda: f64,
}

/// Builds one of the built-in schedules.
pub fn make_schedule(kind: ScheduleKind, steps: usize, lambda: f64) -> Result<Schedule> {
    if steps == 0 {
        return Err(invalid("schedule needs T >= 1"));
    }
    let rates: Vec<f64> = match kind {
        ScheduleKind::Constant { theta } => {
            if !(theta > 0.0 && theta.is_finite()) {
                return Err(invalid(format!("theta must be positive, got {theta}")));
            }
            vec![theta; steps]
        }
        ScheduleKind::Geometric {
            theta_min,
            theta_max,
        } => {
            if !(theta_min > 0.0
                && theta_max > 0.0
                && theta_min.is_finite()
                && theta_max.is_finite())
            {
                return Err(invalid(format!(
                    "geometric schedule needs positive bounds, got ({theta_min}, {theta_max})"
                )));
            }
            let (lo, hi) = (theta_min.ln(), theta_max.ln());
            (0..steps)
                .map(|k| {
                    let frac = if steps == 1 {
                        0.0
                    } else {
                        k as f64 / (steps - 1) as f64
                    };
                    (lo + frac * (hi - lo)).exp()
                })
                .collect()
        }
    };
    Schedule::from_steps(rates, lambda)
}

impl Schedule {
    /// Builds a schedule from explicit per-step integrals `θ'_1..=θ'_T`.
    ///
    /// Zero steps are accepted so degenerate schedules (no diffusion on some
    /// or all steps) can be expressed; the built-in kinds are strictly positive.
    pub fn from_steps(steps: Vec<f64>, lambda: f64) -> Result<Self> {
        if steps.is_empty() {
            return Err(invalid("schedule needs T >= 1"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        if let Some(bad) = steps.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(invalid(format!(
                "schedule steps must be finite and >= 0, got {bad}"
            )));
        }
        let mut cumulative = Vec::with_capacity(steps.len() + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for s in &steps {
            acc += s;
            cumulative.push(acc);
        }
        Ok(Self {
            steps,
            cumulative,
            lambda,
        })
    }

    /// Number of timesteps `T`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `θ'_t` for `1 <= t <= T`.
    pub fn step(&self, t: usize) -> Result<f64> {
        self.check_step(t)?;
        Ok(self.steps[t - 1])
    }

    /// `θ̄_t` for `0 <= t <= T`.
    pub fn cumulative(&self, t: usize) -> Result<f64> {
        self.cumulative
            .get(t)
            .copied()
            .ok_or_else(|| invalid(format!("t = {t} outside [0, {}]", self.len())))
    }

    /// `η_t² = 2λ²θ'_t`, which keeps the stationary variance at `λ²`.
    pub fn eta_sq(&self, t: usize) -> Result<f64> {
        Ok(2.0 * self.lambda * self.lambda * self.step(t)?)
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn cumulatives(&self) -> &[f64] {
        &self.cumulative
    }

    /// `e^{-θ̄_t}` for `0 <= t <= T`.
    pub fn mean_decay(&self, t: usize) -> Result<f64> {
        Ok((-self.cumulative(t)?).exp())
    }

    /// `λ²(1 - e^{-2θ̄_t})` for `0 <= t <= T`.
    pub fn marginal_variance(&self, t: usize) -> Result<f64> {
        Ok(self.lambda * self.lambda * one_minus_exp_neg2(self.cumulative(t)?))
    }

    pub fn transition_coeffs(&self, t: usize) -> Result<TransitionCoeffs> {
        self.check_step(t)?;
        Ok(TransitionCoeffs {
            a: (-self.steps[t - 1]).exp(),
            b: self.mean_decay(t)?,
            v: self.marginal_variance(t)?,
        })
    }

    pub(crate) fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.len() {
            return Err(invalid(format!("t = {t} outside [1, {}]", self.len())));
        }
        Ok(())
    }
}

/// `1 - e^{-2x}` without cancellation for small `x`.
pub(crate) fn one_minus_exp_neg2(x: f64) -> f64 {
    -(-2.0 * x).exp_m1()
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleKind::Constant { theta } => write!(f, "constant(theta={theta})"),
            ScheduleKind::Geometric {
                theta_min,
                theta_max,
            } => write!(f, "geometric({theta_min}..{theta_max})"),
        }
    }
}
