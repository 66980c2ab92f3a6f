//! Synthetic test images and irregular masks.

use rand::Rng as _;

use super::{ImageGrid, Mask};
use crate::error::{invalid, Error, Result};
use crate::Rng;

const MAX_MASK_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImageKind {
    /// Horizontal ramp from 0 at the left column to 1 at the right column.
    Gradient,
    /// Alternating 0/1 cells of `period` pixels.
    Checkerboard { period: usize },
    /// Smooth background with `count` flat-shaded elliptical blobs.
    Blobs { count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSpec {
    pub kind: ImageKind,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageSpec {
    pub fn blobs(height: usize, width: usize) -> Self {
        Self {
            kind: ImageKind::Blobs { count: 6 },
            height,
            width,
            channels: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskKind {
    /// Masks the axis-aligned rectangle exactly.
    Rect {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
    },
    /// Random-walk brush strokes until the masked ratio lands in `[ratio_lo, ratio_hi]`.
    Strokes { ratio_lo: f64, ratio_hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    pub kind: MaskKind,
    pub height: usize,
    pub width: usize,
}

pub fn gen_synthetic(spec: &ImageSpec, rng: &mut Rng) -> Result<ImageGrid> {
    let ImageSpec {
        kind,
        height: h,
        width: w,
        channels: ch,
    } = *spec;
    if h == 0 || w == 0 {
        return Err(invalid(format!(
            "image dimensions must be positive, got {h}x{w}"
        )));
    }
    match kind {
        ImageKind::Gradient => {
            let denom = (w.max(2) - 1) as f64;
            ImageGrid::from_fn(h, w, ch, |_, c, _| c as f64 / denom)
        }
        ImageKind::Checkerboard { period } => {
            if period == 0 {
                return Err(invalid("checkerboard period must be positive"));
            }
            ImageGrid::from_fn(h, w, ch, |r, c, _| ((r / period + c / period) % 2) as f64)
        }
        ImageKind::Blobs { count } => blobs(h, w, ch, count, rng),
    }
}

fn luma(color: &[f64]) -> f64 {
    match color {
        [v] => *v,
        [r, g, b] => 0.299 * r + 0.587 * g + 0.114 * b,
        _ => unreachable!("channels are 1 or 3"),
    }
}

struct Blob {
    cy: f64,
    cx: f64,
    ry: f64,
    rx: f64,
    cos: f64,
    sin: f64,
    color: Vec<f64>,
}

impl Blob {
    fn contains(&self, r: f64, c: f64) -> bool {
        let (dy, dx) = (r - self.cy, c - self.cx);
        let u = dx * self.cos + dy * self.sin;
        let v = -dx * self.sin + dy * self.cos;
        (u / self.rx).powi(2) + (v / self.ry).powi(2) <= 1.0
    }
}

fn blobs(h: usize, w: usize, ch: usize, count: usize, rng: &mut Rng) -> Result<ImageGrid> {
    let bg_a: Vec<f64> = (0..ch).map(|_| rng.random_range(0.3..0.7)).collect();
    let bg_b: Vec<f64> = (0..ch).map(|_| rng.random_range(0.3..0.7)).collect();
    let bg_angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let bg_mid = (luma(&bg_a) + luma(&bg_b)) / 2.0;

    let scale = h.min(w) as f64;
    let blobs: Vec<Blob> = (0..count)
        .map(|_| {
            // keep blobs visibly distinct from the background
            let color = loop {
                let c: Vec<f64> = (0..ch).map(|_| rng.random_range(0.05..0.95)).collect();
                if (luma(&c) - bg_mid).abs() >= 0.25 {
                    break c;
                }
            };
            let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
            Blob {
                cy: rng.random_range(0.0..h as f64),
                cx: rng.random_range(0.0..w as f64),
                ry: rng.random_range(scale / 10.0..scale / 4.0),
                rx: rng.random_range(scale / 10.0..scale / 4.0),
                cos: angle.cos(),
                sin: angle.sin(),
                color,
            }
        })
        .collect();

    let (dy, dx) = (bg_angle.sin(), bg_angle.cos());
    let span = (h as f64).hypot(w as f64).max(1.0);
    ImageGrid::from_fn(h, w, ch, |r, c, k| {
        let (rf, cf) = (r as f64 + 0.5, c as f64 + 0.5);
        // last blob wins where they overlap
        if let Some(b) = blobs.iter().rev().find(|b| b.contains(rf, cf)) {
            return b.color[k];
        }
        let s = ((rf - h as f64 / 2.0) * dy + (cf - w as f64 / 2.0) * dx) / span + 0.5;
        let s = s.clamp(0.0, 1.0);
        bg_a[k] * (1.0 - s) + bg_b[k] * s
    })
}

pub fn gen_mask(spec: &MaskSpec, rng: &mut Rng) -> Result<Mask> {
    let MaskSpec {
        kind,
        height: h,
        width: w,
    } = *spec;
    if h == 0 || w == 0 {
        return Err(invalid(format!(
            "mask dimensions must be positive, got {h}x{w}"
        )));
    }
    match kind {
        MaskKind::Rect {
            top,
            left,
            height,
            width,
        } => {
            if top + height > h || left + width > w || height == 0 || width == 0 {
                return Err(invalid(format!(
                    "rect ({top},{left}) {height}x{width} does not fit in {h}x{w}"
                )));
            }
            Mask::from_fn(h, w, |r, c| {
                !(r >= top && r < top + height && c >= left && c < left + width)
            })
        }
        MaskKind::Strokes { ratio_lo, ratio_hi } => {
            if !(ratio_lo > 0.0 && ratio_lo <= ratio_hi && ratio_hi < 1.0) {
                return Err(invalid(format!(
                    "masked-ratio range [{ratio_lo}, {ratio_hi}] must satisfy 0 < lo <= hi < 1"
                )));
            }
            for _ in 0..MAX_MASK_ATTEMPTS {
                if let Some(m) = stroke_attempt(h, w, ratio_lo, ratio_hi, rng)? {
                    return Ok(m);
                }
            }
            Err(Error::GenerationFailure {
                attempts: MAX_MASK_ATTEMPTS,
                reason: format!(
                    "no stroke mask on {h}x{w} with masked ratio in [{ratio_lo}, {ratio_hi}]"
                ),
            })
        }
    }
}

/// Paints strokes disc by disc; succeeds as soon as the ratio enters the
/// target range, gives up on overshoot.
fn stroke_attempt(h: usize, w: usize, lo: f64, hi: f64, rng: &mut Rng) -> Result<Option<Mask>> {
    let total = (h * w) as f64;
    let mut masked = vec![false; h * w];
    let mut count = 0usize;
    let scale = h.min(w) as f64;
    let max_radius = (scale / 16.0).max(1.0);

    loop {
        let radius: f64 = rng.random_range(0.5..=max_radius);
        let vertices = rng.random_range(4..=12);
        let (mut y, mut x) = (
            rng.random_range(0.0..h as f64),
            rng.random_range(0.0..w as f64),
        );
        let mut angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        for _ in 0..vertices {
            angle += rng.random_range(-1.2..1.2);
            let length: f64 = rng.random_range(2.0..(scale / 4.0).max(3.0));
            let steps = length.ceil() as usize;
            for _ in 0..steps {
                y = (y + angle.sin()).clamp(0.0, h as f64 - 1.0);
                x = (x + angle.cos()).clamp(0.0, w as f64 - 1.0);
                count += stamp(&mut masked, h, w, y, x, radius);
                let ratio = count as f64 / total;
                if ratio > hi {
                    return Ok(None);
                }
                if ratio >= lo {
                    return Mask::new(h, w, masked.iter().map(|&m| u8::from(!m)).collect())
                        .map(Some);
                }
            }
        }
    }
}

fn stamp(masked: &mut [bool], h: usize, w: usize, y: f64, x: f64, radius: f64) -> usize {
    let r0 = (y - radius).floor().max(0.0) as usize;
    let r1 = ((y + radius).ceil() as usize).min(h - 1);
    let c0 = (x - radius).floor().max(0.0) as usize;
    let c1 = ((x + radius).ceil() as usize).min(w - 1);
    let mut added = 0;
    for r in r0..=r1 {
        for c in c0..=c1 {
            let d = (r as f64 - y).hypot(c as f64 - x);
            if d <= radius && !masked[r * w + c] {
                masked[r * w + c] = true;
                added += 1;
            }
        }
    }
    // a radius below 0.5 can miss every pixel centre; always take the nearest
    if added == 0 {
        let (r, c) = (y.round() as usize, x.round() as usize);
        if !masked[r * w + c] {
            masked[r * w + c] = true;
            added = 1;
        }
    }
    added
}
