//! Raster frames: RGB and grayscale payloads of the stream.

use crate::error::{Error, Result};

/// 8-bit RGB raster, row-major interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>, // r,g,b per pixel
}

/// 8-bit single-channel raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    intensities: Vec<u8>,
}

/// Either raster kind, as frames arrive from a stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    Gray(GrayFrame),
    Rgb(RgbFrame),
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("frame dimensions must be positive"));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::invalid(format!(
                "expected {} rgb bytes for {}x{}, got {}",
                width * height * 3,
                width,
                height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// (r, g, b) at `row`, `col`.
    pub fn pixel(&self, row: usize, col: usize) -> (u8, u8, u8) {
        let i = (row * self.width + col) * 3;
        (self.pixels[i], self.pixels[i + 1], self.pixels[i + 2])
    }

    /// Luminance conversion: g = round(0.299 R + 0.587 G + 0.114 B),
    /// rounded half away from zero and clamped to [0, 255].
    pub fn to_grayscale(&self) -> GrayFrame {
        let intensities = self
            .pixels
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect();
        GrayFrame {
            width: self.width,
            height: self.height,
            intensities,
        }
    }
}

fn luma(r: u8, g: u8, b: u8) -> u8 {
    let v = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    v.round().clamp(0.0, 255.0) as u8
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, intensities: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("frame dimensions must be positive"));
        }
        if intensities.len() != width * height {
            return Err(Error::invalid(format!(
                "expected {} intensities for {}x{}, got {}",
                width * height,
                width,
                height,
                intensities.len()
            )));
        }
        Ok(Self {
            width,
            height,
            intensities,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn intensities(&self) -> &[u8] {
        &self.intensities
    }

    pub fn intensity(&self, row: usize, col: usize) -> u8 {
        self.intensities[row * self.width + col]
    }

    /// Quantize intensities from [0, 255] into [0, levels-1] with
    /// bin = floor(g * levels / 256). Order-preserving.
    pub fn quantize(&self, levels: usize) -> Result<GrayFrame> {
        if !(2..=256).contains(&levels) {
            return Err(Error::invalid(format!(
                "quantization levels must be in 2..=256, got {levels}"
            )));
        }
        let intensities = self
            .intensities
            .iter()
            .map(|&g| ((g as usize * levels) / 256) as u8)
            .collect();
        Ok(GrayFrame {
            width: self.width,
            height: self.height,
            intensities,
        })
    }
}

impl Frame {
    /// Convert to grayscale, consuming the frame. Gray frames pass through.
    pub fn into_gray(self) -> GrayFrame {
        match self {
            Frame::Gray(g) => g,
            Frame::Rgb(rgb) => rgb.to_grayscale(),
        }
    }

    pub fn width(&self) -> usize {
        match self {
            Frame::Gray(g) => g.width(),
            Frame::Rgb(r) => r.width(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Frame::Gray(g) => g.height(),
            Frame::Rgb(r) => r.height(),
        }
    }
}
