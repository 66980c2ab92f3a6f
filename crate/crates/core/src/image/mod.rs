//! Image grids, binary masks and the pixel operations built on them.

mod ops;
pub mod pnm;
pub mod synth;

pub use ops::{
    apply_mask, box_mean, edge_map, edge_map_with_threshold, merge_result, sobel_magnitude,
    to_grayscale, EDGE_THRESHOLD, LUMA_WEIGHTS,
};
pub use synth::{gen_mask, gen_synthetic, ImageKind, ImageSpec, MaskKind, MaskSpec};

use crate::error::{invalid, shape_mismatch, Result};

/// A real-valued `H×W×C` image stored row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(invalid(format!("channels must be 1 or 3, got {channels}")));
        }
        if data.len() != height * width * channels {
            return Err(shape_mismatch(
                format!("{} values", height * width * channels),
                format!("{} values", data.len()),
            ));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::filled(height, width, channels, 0.0)
    }

    /// Builds an image from `f(row, col, channel)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for k in 0..channels {
                    data.push(f(r, c, k));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f64) {
        self.data[(row * self.width + col) * self.channels + channel] = value;
    }

    pub fn same_shape(&self, other: &ImageGrid) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub fn same_extent(&self, other: &ImageGrid) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub(crate) fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.height, self.width, self.channels)
    }

    pub(crate) fn check_same_shape(&self, other: &ImageGrid) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(shape_mismatch(self.shape_string(), other.shape_string()))
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ImageGrid {
        ImageGrid {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    /// Elementwise combination of two same-shaped images.
    pub fn zip_map(
        &self,
        other: &ImageGrid,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Result<ImageGrid> {
        self.check_same_shape(other)?;
        Ok(ImageGrid {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            ..*self
        })
    }

    /// Repeats a single-channel image across `channels`.
    pub fn broadcast(&self, channels: usize) -> Result<ImageGrid> {
        if self.channels == channels {
            return Ok(self.clone());
        }
        if self.channels != 1 {
            return Err(invalid(format!(
                "cannot broadcast a {}-channel image to {channels} channels",
                self.channels
            )));
        }
        let data = self
            .data
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, channels))
            .collect();
        ImageGrid::new(self.height, self.width, channels, data)
    }

    /// Per-element root mean square.
    pub fn rms(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64).sqrt()
    }
}

/// Binary inpainting mask: 0 marks the region to fill, 1 the known region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid(format!(
                "mask dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(shape_mismatch(
                format!("{} values", height * width),
                format!("{} values", data.len()),
            ));
        }
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            return Err(invalid(format!("mask values must be 0 or 1, got {v}")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: u8) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(u8::from(f(r, c)));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// `true` where the pixel is known (value 1).
    pub fn is_known(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] == 1
    }

    /// Mask value at flat pixel index as a real.
    pub fn weight(&self, pixel: usize) -> f64 {
        f64::from(self.data[pixel])
    }

    /// Fraction of pixels in the masked (value 0) region.
    pub fn masked_ratio(&self) -> f64 {
        self.data.iter().filter(|&&v| v == 0).count() as f64 / self.data.len() as f64
    }

    pub fn masked_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 0).count()
    }

    pub fn known_count(&self) -> usize {
        self.data.len() - self.masked_count()
    }

    pub fn invert(&self) -> Mask {
        Mask {
            data: self.data.iter().map(|v| 1 - v).collect(),
            ..self.clone()
        }
    }

    pub(crate) fn check_extent(&self, img: &ImageGrid) -> Result<()> {
        if self.height == img.height() && self.width == img.width() {
            Ok(())
        } else {
            Err(shape_mismatch(
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", img.height(), img.width()),
            ))
        }
    }

    /// The mask as a one-channel image of 0.0/1.0.
    pub fn to_image(&self) -> ImageGrid {
        ImageGrid::new(
            self.height,
            self.width,
            1,
            self.data.iter().map(|&v| f64::from(v)).collect(),
        )
        .expect("mask dimensions are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_validate() {
        assert!(ImageGrid::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(ImageGrid::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(ImageGrid::new(0, 2, 1, vec![]).is_err());
        assert!(Mask::new(2, 2, vec![0, 1, 2, 1]).is_err());
        assert!(Mask::new(2, 2, vec![0, 1, 1]).is_err());
    }

    #[test]
    fn broadcast_repeats_channels() {
        let g = ImageGrid::new(1, 2, 1, vec![0.25, 0.75]).unwrap();
        let b = g.broadcast(3).unwrap();
        assert_eq!(b.data(), &[0.25, 0.25, 0.25, 0.75, 0.75, 0.75]);
        assert!(b.broadcast(1).is_err());
    }

    #[test]
    fn masked_ratio_counts_zeros() {
        let m = Mask::from_fn(4, 4, |r, _| r >= 1).unwrap();
        assert_eq!(m.masked_ratio(), 0.25);
        assert_eq!(m.invert().masked_ratio(), 0.75);
    }
}
