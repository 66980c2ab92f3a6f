//! Spatially adaptive normalization: per-position statistics across channels,
//! modulated by scale and bias maps derived from the structure.

use crate::error::{invalid, shape_mismatch, Result};
use crate::image::{to_grayscale, ImageGrid};

pub const SPADE_EPS: f64 = 1e-5;

/// A `C×H×W` feature map, channel-planar.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(invalid(format!(
                "feature map dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(shape_mismatch(channels * height * width, data.len()));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for h in 0..height {
                for w in 0..width {
                    data.push(f(c, h, w));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, c: usize, h: usize, w: usize) -> f64 {
        self.data[(c * self.height + h) * self.width + w]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Cross-channel mean and population standard deviation at every position.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionalStats {
    pub mean: ImageGrid,
    pub std: ImageGrid,
}

pub fn positional_stats(f: &FeatureMap) -> PositionalStats {
    let (c, h, w) = (f.channels, f.height, f.width);
    let plane = h * w;
    let mut mean = vec![0.0; plane];
    for k in 0..c {
        for (m, v) in mean.iter_mut().zip(&f.data[k * plane..(k + 1) * plane]) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= c as f64);
    let mut var = vec![0.0; plane];
    for k in 0..c {
        for ((s, v), m) in var
            .iter_mut()
            .zip(&f.data[k * plane..(k + 1) * plane])
            .zip(&mean)
        {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / c as f64).sqrt()).collect();
    PositionalStats {
        mean: ImageGrid::new(h, w, 1, mean).expect("positive dimensions"),
        std: ImageGrid::new(h, w, 1, std).expect("positive dimensions"),
    }
}

/// `gamma · (F - μ) / (σ + eps) + beta` with per-position statistics.
pub fn spade_normalize(
    f: &FeatureMap,
    gamma: &ImageGrid,
    beta: &ImageGrid,
    eps: f64,
) -> Result<FeatureMap> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    for map in [gamma, beta] {
        if map.height() != f.height || map.width() != f.width || map.channels() != 1 {
            return Err(shape_mismatch(
                format!("{}x{}x1", f.height, f.width),
                map.shape_string(),
            ));
        }
    }
    let stats = positional_stats(f);
    let plane = f.height * f.width;
    let data = f
        .data
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let p = i % plane;
            let (mu, sd) = (stats.mean.data()[p], stats.std.data()[p]);
            gamma.data()[p] * (v - mu) / (sd + eps) + beta.data()[p]
        })
        .collect();
    FeatureMap::new(f.channels, f.height, f.width, data)
}

/// Maps the structure guide to per-position scale and bias at a given resolution.
pub trait ModulationProvider {
    fn modulation(
        &self,
        guide: &ImageGrid,
        height: usize,
        width: usize,
    ) -> Result<(ImageGrid, ImageGrid)>;
}

/// `gamma = 1 + gain · I(x)`, `beta = 0`, where `I(x)` is the structure
/// intensity bilinearly resampled to the feature resolution.
#[derive(Debug, Clone, Copy)]
pub struct StructureModulation {
    pub gain: f64,
}

impl Default for StructureModulation {
    fn default() -> Self {
        Self { gain: 1.0 }
    }
}

impl ModulationProvider for StructureModulation {
    fn modulation(
        &self,
        guide: &ImageGrid,
        height: usize,
        width: usize,
    ) -> Result<(ImageGrid, ImageGrid)> {
        let intensity = match guide.channels() {
            1 => guide.clone(),
            _ => to_grayscale(guide)?,
        };
        let gamma = bilinear_resize(&intensity, height, width)?.map(|v| 1.0 + self.gain * v);
        let beta = ImageGrid::zeros(height, width, 1)?;
        Ok((gamma, beta))
    }
}

/// Bilinear resampling with pixel-centre alignment.
pub fn bilinear_resize(img: &ImageGrid, height: usize, width: usize) -> Result<ImageGrid> {
    let (sh, sw) = (img.height(), img.width());
    let src = |dst: usize, dst_len: usize, src_len: usize| {
        let pos = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5)
            .clamp(0.0, (src_len - 1) as f64);
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(src_len - 1);
        (i0, i1, pos - i0 as f64)
    };
    ImageGrid::from_fn(height, width, img.channels(), |r, c, k| {
        let (r0, r1, fr) = src(r, height, sh);
        let (c0, c1, fc) = src(c, width, sw);
        let top = img.get(r0, c0, k) * (1.0 - fc) + img.get(r0, c1, k) * fc;
        let bottom = img.get(r1, c0, k) * (1.0 - fc) + img.get(r1, c1, k) * fc;
        top * (1.0 - fr) + bottom * fr
    })
}

/// Applies the normalization at every level of a feature pyramid.
pub fn spade_pyramid(
    levels: &[FeatureMap],
    guide: &ImageGrid,
    provider: &dyn ModulationProvider,
    eps: f64,
) -> Result<Vec<FeatureMap>> {
    levels
        .iter()
        .map(|f| {
            let (gamma, beta) = provider.modulation(guide, f.height, f.width)?;
            spade_normalize(f, &gamma, &beta, eps)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_stream;
    use rand::Rng as _;

    fn two_channel(a: f64, b: f64) -> FeatureMap {
        FeatureMap::new(2, 1, 1, vec![a, b]).unwrap()
    }

    fn scalar(v: f64) -> ImageGrid {
        ImageGrid::filled(1, 1, 1, v).unwrap()
    }

    #[test]
    fn stats_of_two_values() {
        let s = positional_stats(&two_channel(1.0, 3.0));
        assert_eq!(s.mean.data(), &[2.0]);
        assert_eq!(s.std.data(), &[1.0]);
    }

    #[test]
    fn stats_match_two_pass_oracle() {
        let mut rng = rng_stream(21, 0);
        let f = FeatureMap::from_fn(8, 4, 4, |_, _, _| rng.random_range(-2.0..2.0)).unwrap();
        let s = positional_stats(&f);
        for h in 0..4 {
            for w in 0..4 {
                let vals: Vec<f64> = (0..8).map(|c| f.get(c, h, w)).collect();
                let mut sum = 0.0;
                for v in &vals {
                    sum += v;
                }
                let mean = sum / 8.0;
                let mut sq = 0.0;
                for v in &vals {
                    sq += (v - mean).powi(2);
                }
                assert!((s.mean.get(h, w, 0) - mean).abs() < 1e-12);
                assert!((s.std.get(h, w, 0) - (sq / 8.0).sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_channels_give_zero_std_and_bias_output() {
        let f = FeatureMap::from_fn(5, 3, 3, |_, h, w| (h * 3 + w) as f64).unwrap();
        let s = positional_stats(&f);
        assert!(s.std.data().iter().all(|&v| v == 0.0));
        let gamma = ImageGrid::filled(3, 3, 1, 2.0).unwrap();
        let beta = ImageGrid::from_fn(3, 3, 1, |h, w, _| (h as f64) - (w as f64)).unwrap();
        let out = spade_normalize(&f, &gamma, &beta, SPADE_EPS).unwrap();
        for c in 0..5 {
            for h in 0..3 {
                for w in 0..3 {
                    assert_eq!(out.get(c, h, w), beta.get(h, w, 0));
                }
            }
        }
    }

    #[test]
    fn scale_and_bias_arithmetic() {
        let out = spade_normalize(
            &two_channel(1.0, 3.0),
            &scalar(2.0),
            &scalar(1.0),
            SPADE_EPS,
        )
        .unwrap();
        assert!((out.data()[0] + 1.0).abs() < 1e-4);
        assert!((out.data()[1] - 3.0).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = two_channel(1.0, 3.0);
        assert!(spade_normalize(&f, &scalar(1.0), &scalar(0.0), 0.0).is_err());
        let wide = ImageGrid::zeros(1, 2, 1).unwrap();
        assert!(spade_normalize(&f, &wide, &scalar(0.0), SPADE_EPS).is_err());
    }

    #[test]
    fn pyramid_uses_structure_scale() {
        let guide = ImageGrid::from_fn(8, 8, 1, |r, _, _| if r < 4 { 0.0 } else { 1.0 }).unwrap();
        let mut rng = rng_stream(22, 0);
        let levels = vec![
            FeatureMap::from_fn(4, 8, 8, |_, _, _| rng.random_range(-1.0..1.0)).unwrap(),
            FeatureMap::from_fn(4, 4, 4, |_, _, _| rng.random_range(-1.0..1.0)).unwrap(),
        ];
        let out =
            spade_pyramid(&levels, &guide, &StructureModulation::default(), SPADE_EPS).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!((out[1].height(), out[1].width()), (4, 4));
        // gamma is 1 on the dark half, 2 on the bright half: std doubles
        let std = |f: &FeatureMap, h, w| positional_stats(f).std.get(h, w, 0);
        assert!((std(&out[0], 0, 0) - 1.0).abs() < 1e-3);
        assert!((std(&out[0], 7, 0) - 2.0).abs() < 1e-3);
    }

    #[test]
    fn bilinear_identity_and_constant() {
        let img = ImageGrid::from_fn(3, 5, 1, |r, c, _| (r * 5 + c) as f64).unwrap();
        assert_eq!(bilinear_resize(&img, 3, 5).unwrap(), img);
        let flat = ImageGrid::filled(4, 4, 1, 0.7).unwrap();
        assert!(bilinear_resize(&flat, 9, 2)
            .unwrap()
            .data()
            .iter()
            .all(|v| (v - 0.7).abs() < 1e-15));
    }
}
