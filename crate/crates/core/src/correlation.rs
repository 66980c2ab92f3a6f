//! Correlation between the denoised texture and structure, and the losses a
//! correlation discriminator is trained with.

use crate::error::{invalid, Result};
use crate::image::{box_mean, sobel_magnitude, ImageGrid, Mask};

/// Scores are kept this far inside `(0, 1)`.
pub const SCORE_CLAMP: f64 = 1e-6;

pub const DEFAULT_TRIPLET_MARGIN: f64 = 0.2;
pub const DEFAULT_LAMBDA_TRI: f64 = 1.0;

/// Correlation score `D(y, x, t)` in `(0, 1)`; higher means more correlated.
pub trait Scorer: Send + Sync {
    fn score(&self, texture: &ImageGrid, structure: &ImageGrid, t: usize) -> Result<f64>;
}

pub fn clamp_score(s: f64) -> f64 {
    s.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP)
}

fn checked_score(name: &str, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(invalid(format!("{name} must lie in (0, 1), got {s}")));
    }
    Ok(clamp_score(s))
}

/// `ȳ = y_prev ⊙ M + y_cur ⊙ (1 - M)`: known pixels from `y_{t-1}`, masked
/// pixels from `y_t`.
pub fn composite_bar_y(y_prev: &ImageGrid, y_cur: &ImageGrid, m: &Mask) -> Result<ImageGrid> {
    y_prev.check_same_shape(y_cur)?;
    m.check_extent(y_prev)?;
    let c = y_prev.channels();
    let data = y_prev
        .data()
        .iter()
        .zip(y_cur.data())
        .enumerate()
        .map(|(i, (&p, &q))| if m.data()[i / c] == 1 { p } else { q })
        .collect();
    ImageGrid::new(y_prev.height(), y_prev.width(), c, data)
}

/// `-log D(y_{t-1}, x_{t-1}) - log(1 - D(y_t, x_{t-1}))`.
pub fn loss_dis(s_pos: f64, s_neg: f64) -> Result<f64> {
    let s_pos = checked_score("s_pos", s_pos)?;
    let s_neg = checked_score("s_neg", s_neg)?;
    Ok(-s_pos.ln() - (-s_neg).ln_1p())
}

/// `max(|s_bar - s_pos| - |s_bar - s_neg| + alpha, 0)` on scalar scores.
pub fn loss_tri(s_bar: f64, s_pos: f64, s_neg: f64, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("triplet margin must be >= 0, got {alpha}")));
    }
    let s_bar = checked_score("s_bar", s_bar)?;
    let s_pos = checked_score("s_pos", s_pos)?;
    let s_neg = checked_score("s_neg", s_neg)?;
    Ok(((s_bar - s_pos).abs() - (s_bar - s_neg).abs() + alpha).max(0.0))
}

pub fn loss_total(ld: f64, lt: f64, lambda_tri: f64) -> f64 {
    ld + lambda_tri * lt
}

/// A fixed, non-learned scorer: compares local gradient-magnitude
/// statistics of the texture and the structure.
///
/// Both inputs are reduced to their Sobel magnitude, averaged over a
/// `window×window` box and rescaled to unit mean, so only the layout of the
/// edges matters. `d` is the mean absolute difference over
/// the scoring region (the masked pixels when a mask is attached). The score
/// is `2 / (1 + e^{sharpness·d})`, i.e. a logistic in `-sharpness·d`
/// rescaled so that perfect agreement maps to the top of `(0, 1)`.
#[derive(Debug, Clone)]
pub struct StatisticScorer {
    window: usize,
    sharpness: f64,
    region: Option<Mask>,
}

impl StatisticScorer {
    pub const DEFAULT_WINDOW: usize = 5;
    pub const DEFAULT_SHARPNESS: f64 = 2.0;

    pub fn new(window: usize, sharpness: f64) -> Result<Self> {
        if window < 3 || window.is_multiple_of(2) {
            return Err(invalid(format!(
                "window must be odd and >= 3, got {window}"
            )));
        }
        if !(sharpness > 0.0 && sharpness.is_finite()) {
            return Err(invalid(format!(
                "sharpness must be positive, got {sharpness}"
            )));
        }
        Ok(Self {
            window,
            sharpness,
            region: None,
        })
    }

    /// Restricts scoring to the masked (value 0) pixels of `mask`.
    pub fn with_region(mut self, mask: Mask) -> Self {
        self.region = Some(mask);
        self
    }

    /// Mean absolute difference of the local gradient statistics.
    pub fn distance(&self, texture: &ImageGrid, structure: &ImageGrid) -> Result<f64> {
        let (h, w) = (texture.height(), texture.width());
        if !texture.same_extent(structure) {
            return Err(crate::error::shape_mismatch(
                texture.shape_string(),
                structure.shape_string(),
            ));
        }
        if self.window > h.min(w) {
            return Err(invalid(format!(
                "scorer window {} larger than image {h}x{w}",
                self.window
            )));
        }
        let gy = unit_mean(box_mean(&sobel_magnitude(texture)?, self.window)?);
        let gx = unit_mean(box_mean(&sobel_magnitude(structure)?, self.window)?);
        let diffs = gy.data().iter().zip(gx.data()).map(|(a, b)| (a - b).abs());
        let (sum, n) = match &self.region {
            Some(m) if m.masked_count() > 0 => {
                m.check_extent(texture)?;
                diffs
                    .zip(m.data())
                    .filter(|(_, &k)| k == 0)
                    .fold((0.0, 0usize), |(s, n), (d, _)| (s + d, n + 1))
            }
            _ => diffs.fold((0.0, 0usize), |(s, n), d| (s + d, n + 1)),
        };
        Ok(sum / n as f64)
    }
}

/// Rescales a nonnegative map to mean 1; an all-zero map is left as is.
fn unit_mean(g: ImageGrid) -> ImageGrid {
    let m = g.mean();
    if m > 0.0 {
        g.map(|v| v / m)
    } else {
        g
    }
}

impl Scorer for StatisticScorer {
    fn score(&self, texture: &ImageGrid, structure: &ImageGrid, _t: usize) -> Result<f64> {
        let d = self.distance(texture, structure)?;
        Ok(clamp_score(2.0 / (1.0 + (self.sharpness * d).exp())))
    }
}
