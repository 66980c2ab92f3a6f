use super::{ImageGrid, Mask};
use crate::error::{invalid, Result};

/// ITU-R BT.601 luma weights for R, G, B.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Default binarization threshold on the normalized Sobel magnitude.
pub const EDGE_THRESHOLD: f64 = 0.2;

/// Largest Sobel magnitude attainable on a `[0,1]` image: `|Gx|, |Gy| <= 4`.
const SOBEL_MAX: f64 = 4.0 * std::f64::consts::SQRT_2;

pub fn to_grayscale(img: &ImageGrid) -> Result<ImageGrid> {
    if img.channels() != 3 {
        return Err(invalid(format!(
            "grayscale conversion needs 3 channels, got {}",
            img.channels()
        )));
    }
    let data = img
        .data()
        .chunks_exact(3)
        .map(|px| LUMA_WEIGHTS[0] * px[0] + LUMA_WEIGHTS[1] * px[1] + LUMA_WEIGHTS[2] * px[2])
        .collect();
    ImageGrid::new(img.height(), img.width(), 1, data)
}

fn luminance(img: &ImageGrid) -> Result<ImageGrid> {
    match img.channels() {
        1 => Ok(img.clone()),
        _ => to_grayscale(img),
    }
}

/// Sobel gradient magnitude divided by its theoretical maximum, with
/// replicated borders. Three-channel input is converted to luminance first.
pub fn sobel_magnitude(img: &ImageGrid) -> Result<ImageGrid> {
    let (h, w) = (img.height(), img.width());
    if h < 3 || w < 3 {
        return Err(invalid(format!("Sobel needs at least 3x3, got {h}x{w}")));
    }
    let gray = luminance(img)?;
    let at = |r: isize, c: isize| {
        let r = r.clamp(0, h as isize - 1) as usize;
        let c = c.clamp(0, w as isize - 1) as usize;
        gray.get(r, c, 0)
    };
    ImageGrid::from_fn(h, w, 1, |r, c, _| {
        let (r, c) = (r as isize, c as isize);
        let gx = (at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1))
            - (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1));
        let gy = (at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1))
            - (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1));
        gx.hypot(gy) / SOBEL_MAX
    })
}

/// Binary edge map: normalized Sobel magnitude thresholded at [`EDGE_THRESHOLD`].
pub fn edge_map(img: &ImageGrid) -> Result<ImageGrid> {
    edge_map_with_threshold(img, EDGE_THRESHOLD)
}

pub fn edge_map_with_threshold(img: &ImageGrid, threshold: f64) -> Result<ImageGrid> {
    Ok(sobel_magnitude(img)?.map(|m| if m > threshold { 1.0 } else { 0.0 }))
}

/// `img ⊙ M`, broadcasting the mask over channels.
pub fn apply_mask(img: &ImageGrid, m: &Mask) -> Result<ImageGrid> {
    m.check_extent(img)?;
    let c = img.channels();
    let mut out = img.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        *v *= m.weight(i / c);
    }
    Ok(out)
}

/// `denoised ⊙ (1 - M) + gt_masked`: fills the masked region from the
/// denoised result and keeps the known pixels exactly.
pub fn merge_result(denoised: &ImageGrid, gt_masked: &ImageGrid, m: &Mask) -> Result<ImageGrid> {
    denoised.check_same_shape(gt_masked)?;
    m.check_extent(denoised)?;
    let c = denoised.channels();
    let data = denoised
        .data()
        .iter()
        .zip(gt_masked.data())
        .enumerate()
        .map(|(i, (&d, &g))| d * (1.0 - m.weight(i / c)) + g)
        .collect();
    ImageGrid::new(denoised.height(), denoised.width(), c, data)
}

/// Mean over a `window×window` neighbourhood per channel, clipped at the borders.
pub fn box_mean(img: &ImageGrid, window: usize) -> Result<ImageGrid> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(invalid(format!(
            "box window must be odd and positive, got {window}"
        )));
    }
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let half = window / 2;
    ImageGrid::from_fn(h, w, ch, |r, c, k| {
        let (r0, r1) = (r.saturating_sub(half), (r + half).min(h - 1));
        let (c0, c1) = (c.saturating_sub(half), (c + half).min(w - 1));
        let mut sum = 0.0;
        for rr in r0..=r1 {
            for cc in c0..=c1 {
                sum += img.get(rr, cc, k);
            }
        }
        sum / ((r1 - r0 + 1) * (c1 - c0 + 1)) as f64
    })
}
