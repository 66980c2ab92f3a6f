//! Region-aware quality metrics and per-timestep discrepancy curves.

use std::io::{Read, Write};

use crate::error::{invalid, Error, Result};
use crate::image::{ImageGrid, Mask};
use crate::sde::DiffusionState;

/// PSNR reported for identical inputs.
pub const PSNR_CAP: f64 = 99.0;
pub const DEFAULT_KL_BINS: usize = 64;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_MIN_SIZE: usize = 8;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Pixel subset a metric is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Mask value 0.
    Masked,
    /// Mask value 1.
    Known,
    All,
}

impl Region {
    fn contains(self, mask_value: u8) -> bool {
        match self {
            Region::Masked => mask_value == 0,
            Region::Known => mask_value == 1,
            Region::All => true,
        }
    }
}

/// Per-channel values of `img` restricted to `region`, pixel by pixel.
fn region_values<'a>(
    img: &'a ImageGrid,
    m: &'a Mask,
    region: Region,
) -> impl Iterator<Item = (usize, f64)> + 'a {
    let c = img.channels();
    img.data()
        .iter()
        .enumerate()
        .filter(move |(i, _)| region.contains(m.data()[i / c]))
        .map(|(i, &v)| (i, v))
}

/// Mean squared error over `region`.
pub fn region_mse(a: &ImageGrid, b: &ImageGrid, m: &Mask, region: Region) -> Result<f64> {
    a.check_same_shape(b)?;
    m.check_extent(a)?;
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, v) in region_values(a, m, region) {
        let d = v - b.data()[i];
        sum += d * d;
        n += 1;
    }
    if n == 0 {
        return Err(invalid(format!("{region:?} region is empty")));
    }
    Ok(sum / n as f64)
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        PSNR_CAP
    } else {
        (-10.0 * mse.log10()).min(PSNR_CAP)
    }
}

/// Whole-image PSNR in dB with unit peak.
pub fn psnr(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    let all = Mask::filled(a.height(), a.width(), 1)?;
    region_psnr(a, b, &all, Region::All)
}

pub fn region_psnr(a: &ImageGrid, b: &ImageGrid, m: &Mask, region: Region) -> Result<f64> {
    Ok(psnr_from_mse(region_mse(a, b, m, region)?))
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Mean structural similarity over all valid Gaussian windows, averaged over
/// channels. Images smaller than the 11×11 window use the largest odd
/// window that fits.
pub fn ssim(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    a.check_same_shape(b)?;
    let (h, w, ch) = (a.height(), a.width(), a.channels());
    if h.min(w) < SSIM_MIN_SIZE {
        return Err(invalid(format!(
            "SSIM needs at least {SSIM_MIN_SIZE}x{SSIM_MIN_SIZE}, got {h}x{w}"
        )));
    }
    let size = {
        let fit = SSIM_WINDOW.min(h.min(w));
        if fit % 2 == 0 {
            fit - 1
        } else {
            fit
        }
    };
    let k1 = gaussian_kernel(size, SSIM_SIGMA);
    let (oh, ow) = (h - size + 1, w - size + 1);

    let mut total = 0.0;
    for k in 0..ch {
        for r in 0..oh {
            for c in 0..ow {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (dr, wr) in k1.iter().enumerate() {
                    for (dc, wc) in k1.iter().enumerate() {
                        let g = wr * wc;
                        let x = a.get(r + dr, c + dc, k);
                        let y = b.get(r + dr, c + dc, k);
                        ma += g * x;
                        mb += g * y;
                        saa += g * x * x;
                        sbb += g * y * y;
                        sab += g * x * y;
                    }
                }
                let va = saa - ma * ma;
                let vb = sbb - mb * mb;
                let cov = sab - ma * mb;
                total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                    / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
            }
        }
    }
    Ok(total / (ch * oh * ow) as f64)
}

/// Masked and unmasked values of one metric, optionally at a timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionReport {
    pub metric_name: String,
    pub t: Option<usize>,
    pub masked_value: f64,
    pub unmasked_value: f64,
}

impl RegionReport {
    /// `|masked - unmasked|`.
    pub fn gap(&self) -> f64 {
        (self.masked_value - self.unmasked_value).abs()
    }
}

/// Laplace-smoothed histogram over `[0, 1]`; out-of-range values land in the end bins.
fn smoothed_histogram(values: impl Iterator<Item = f64>, bins: usize) -> (Vec<f64>, usize) {
    let mut counts = vec![0usize; bins];
    let mut n = 0;
    for v in values {
        let b = ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
        n += 1;
    }
    let denom = (n + bins) as f64;
    (
        counts.into_iter().map(|c| (c + 1) as f64 / denom).collect(),
        n,
    )
}

fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(&p, &q)| p * (p / q).ln()).sum()
}

fn region_kl_value(
    img: &ImageGrid,
    gt: &ImageGrid,
    m: &Mask,
    region: Region,
    bins: usize,
) -> Result<f64> {
    let (p, n) = smoothed_histogram(region_values(img, m, region).map(|(_, v)| v), bins);
    if n == 0 {
        return Err(invalid(format!("{region:?} region is empty")));
    }
    let (q, _) = smoothed_histogram(region_values(gt, m, region).map(|(_, v)| v), bins);
    Ok(kl_divergence(&p, &q))
}

/// `KL(P_region(img) ‖ P_region(gt))` for the masked and the known region.
/// Channels are pooled into one intensity histogram.
pub fn region_kl(img: &ImageGrid, gt: &ImageGrid, m: &Mask, bins: usize) -> Result<RegionReport> {
    if bins < 2 {
        return Err(invalid(format!("KL needs at least 2 bins, got {bins}")));
    }
    img.check_same_shape(gt)?;
    m.check_extent(img)?;
    Ok(RegionReport {
        metric_name: "kl".into(),
        t: None,
        masked_value: region_kl_value(img, gt, m, Region::Masked, bins)?,
        unmasked_value: region_kl_value(img, gt, m, Region::Known, bins)?,
    })
}

pub fn region_psnr_report(img: &ImageGrid, gt: &ImageGrid, m: &Mask) -> Result<RegionReport> {
    Ok(RegionReport {
        metric_name: "psnr".into(),
        t: None,
        masked_value: region_psnr(img, gt, m, Region::Masked)?,
        unmasked_value: region_psnr(img, gt, m, Region::Known)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMetric {
    Psnr,
    Kl { bins: usize },
}

impl CurveMetric {
    pub fn name(&self) -> &'static str {
        match self {
            CurveMetric::Psnr => "psnr",
            CurveMetric::Kl { .. } => "kl",
        }
    }

    pub fn report(&self, img: &ImageGrid, gt: &ImageGrid, m: &Mask) -> Result<RegionReport> {
        match *self {
            CurveMetric::Psnr => region_psnr_report(img, gt, m),
            CurveMetric::Kl { bins } => region_kl(img, gt, m, bins),
        }
    }
}

/// One report per chain state, in chain order.
pub fn discrepancy_curve(
    chain: &[DiffusionState],
    gt: &ImageGrid,
    m: &Mask,
    metric: CurveMetric,
) -> Result<Vec<RegionReport>> {
    chain
        .iter()
        .map(|s| {
            let mut r = metric.report(&s.value, gt, m)?;
            r.t = Some(s.t);
            Ok(r)
        })
        .collect()
}

/// Mean gap over reports whose timestep exceeds `after`.
pub fn mean_gap_after(curve: &[RegionReport], after: usize) -> Option<f64> {
    let gaps: Vec<f64> = curve
        .iter()
        .filter(|r| r.t.is_some_and(|t| t > after))
        .map(RegionReport::gap)
        .collect();
    (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64)
}

pub const CURVE_HEADER: [&str; 4] = ["t", "masked", "unmasked", "gap"];

pub fn write_curve_csv<W: Write>(curve: &[RegionReport], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CURVE_HEADER)?;
    for r in curve {
        w.write_record([
            r.t.map(|t| t.to_string()).unwrap_or_default(),
            r.masked_value.to_string(),
            r.unmasked_value.to_string(),
            r.gap().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv<R: Read>(input: R, metric_name: &str) -> Result<Vec<RegionReport>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CURVE_HEADER {
        return Err(Error::Config(format!("unexpected curve header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad curve value `{}`", field(i))))
        };
        let t = match field(0) {
            "" => None,
            s => Some(
                s.parse()
                    .map_err(|_| Error::Config(format!("bad timestep `{s}`")))?,
            ),
        };
        out.push(RegionReport {
            metric_name: metric_name.into(),
            t,
            masked_value: num(1)?,
            unmasked_value: num(2)?,
        });
    }
    Ok(out)
}
