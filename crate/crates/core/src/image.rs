use crate::error::{Error, Result};

/// Row-major grayscale raster of real intensities.
///
/// Loaded images live in `[0, 255]`; intermediate images (noisy observations,
/// iterates) may leave that range and are only clamped on request.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid_input("image dimensions must be positive"));
        }
        if pixels.len() != height * width {
            return Err(Error::invalid_input(format!(
                "{height}x{width} image needs {} pixels, got {}",
                height * width,
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid_input("image contains non-finite pixels"));
        }
        Ok(ImageBuffer {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        ImageBuffer {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        ImageBuffer {
            height,
            width,
            pixels,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pixels[row * self.width + col] = value;
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    /// Contiguous slice of `len` pixels starting at `(row, col)`.
    #[inline]
    pub fn row_span(&self, row: usize, col: usize, len: usize) -> &[f64] {
        let start = row * self.width + col;
        &self.pixels[start..start + len]
    }

    pub fn clamp_to_range(&mut self) {
        for p in &mut self.pixels {
            *p = p.clamp(0.0, 255.0);
        }
    }

    pub fn clamped(mut self) -> Self {
        self.clamp_to_range();
        self
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.pixels.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / self.pixels.len() as f64
    }

    pub fn squared_norm(&self) -> f64 {
        self.pixels.iter().map(|p| p * p).sum()
    }
}

/// Observation mask, `true` = observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskBuffer {
    height: usize,
    width: usize,
    observed: Vec<bool>,
}

impl MaskBuffer {
    pub fn new(height: usize, width: usize, observed: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 || observed.len() != height * width {
            return Err(Error::invalid_input(format!(
                "mask of {height}x{width} needs {} flags, got {}",
                height * width,
                observed.len()
            )));
        }
        if !observed.iter().any(|&o| o) {
            return Err(Error::invalid_input("mask has no observed pixels"));
        }
        Ok(MaskBuffer {
            height,
            width,
            observed,
        })
    }

    pub fn all_observed(height: usize, width: usize) -> Self {
        MaskBuffer {
            height,
            width,
            observed: vec![true; height * width],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn flags(&self) -> &[bool] {
        &self.observed
    }

    #[inline]
    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.observed[row * self.width + col]
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn missing_count(&self) -> usize {
        self.observed.len() - self.observed_count()
    }

    /// Zero every missing pixel of `img`.
    pub fn apply(&self, img: &ImageBuffer) -> Result<ImageBuffer> {
        if img.shape() != self.shape() {
            return Err(Error::invalid_input(format!(
                "mask is {:?}, image is {:?}",
                self.shape(),
                img.shape()
            )));
        }
        let pixels = img
            .pixels()
            .iter()
            .zip(&self.observed)
            .map(|(&p, &o)| if o { p } else { 0.0 })
            .collect();
        ImageBuffer::new(self.height, self.width, pixels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimensions() {
        assert!(ImageBuffer::new(0, 3, vec![]).is_err());
        assert!(ImageBuffer::new(2, 2, vec![1.0; 3]).is_err());
        assert!(ImageBuffer::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn mask_requires_an_observation() {
        assert!(MaskBuffer::new(1, 2, vec![false, false]).is_err());
        let m = MaskBuffer::new(1, 2, vec![false, true]).unwrap();
        assert_eq!(m.observed_count(), 1);
        let img = ImageBuffer::new(1, 2, vec![5.0, 6.0]).unwrap();
        assert_eq!(m.apply(&img).unwrap().pixels(), &[0.0, 6.0]);
    }
}
