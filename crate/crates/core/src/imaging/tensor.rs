use std::sync::OnceLock;

use crate::error::{Error, Result};

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

/// An `H x W x C` pixel grid with values in `[0, 1]`, stored row-major with
/// interleaved channels.
#[derive(Debug, Clone)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
    gray: OnceLock<GrayPlane>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::UnsupportedChannels(channels));
        }
        if height < 3 || width < 3 {
            return Err(Error::InvalidDimensions {
                height,
                width,
                reason: "height and width must be at least 3",
            });
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidDimensions {
                height,
                width,
                reason: "data length does not match height * width * channels",
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::ValueOutOfRange { index, value });
        }
        Ok(ImageTensor {
            height,
            width,
            channels,
            data,
            gray: OnceLock::new(),
        })
    }

    /// Builds a tensor from a closure evaluated at every `(y, x, c)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
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

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Grayscale plane, computed on first use.
    pub fn gray(&self) -> &GrayPlane {
        self.gray.get_or_init(|| to_grayscale(self))
    }
}

/// Converts to a single gray plane: identity for one channel, BT.601 luma
/// weights for RGB.
pub fn to_grayscale(img: &ImageTensor) -> GrayPlane {
    let values = match img.channels {
        1 => img.data.clone(),
        _ => img
            .data
            .chunks_exact(3)
            .map(|px| (LUMA_R * px[0] + LUMA_G * px[1] + LUMA_B * px[2]).clamp(0.0, 1.0))
            .collect(),
    };
    GrayPlane {
        height: img.height,
        width: img.width,
        values,
    }
}

/// Single-channel plane of gray values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayPlane {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl GrayPlane {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::InvalidDimensions {
                height,
                width,
                reason: "data length does not match height * width",
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::ValueOutOfRange { index, value });
        }
        Ok(GrayPlane {
            height,
            width,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// 8-bit gray level: `floor(255 * v + 0.5)` clamped to `[0, 255]`.
    #[inline]
    pub fn level(&self, y: usize, x: usize) -> u8 {
        quantize(self.get(y, x))
    }
}

#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    (255.0 * v + 0.5).floor().clamp(0.0, 255.0) as u8
}
