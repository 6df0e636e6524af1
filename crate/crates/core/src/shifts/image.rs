use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Height x width x channels image, pixels stored row-major with interleaved
/// channels, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if height * width * channels != pixels.len() {
            return Err(Error::shape(format!(
                "{height}x{width}x{channels} image given {} pixels",
                pixels.len()
            )));
        }
        Ok(Image {
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Image {
            height,
            width,
            channels,
            pixels: vec![value; height * width * channels],
        }
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.pixels[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        let i = self.index(y, x, c);
        self.pixels[i] = v;
    }

    pub fn clamp_unit(&mut self) {
        self.pixels.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
    }

    pub fn sum(&self) -> f64 {
        self.pixels.iter().sum()
    }

    /// Flattened network input.
    pub fn to_tensor(&self) -> Tensor {
        let shape = if self.channels == 1 {
            vec![self.height, self.width]
        } else {
            vec![self.height, self.width, self.channels]
        };
        Tensor::new(shape, self.pixels.clone()).expect("image pixels are finite")
    }
}
