//! Planar real-valued images.

use crate::color::{rgb_to_yuv, Rgb};
use crate::error::{Error, Result};

/// A planar image with one (gray) or three (RGB) channels of `f64` samples,
/// each stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: Vec<Vec<f64>>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: Vec<Vec<f64>>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels.len() != 1 && channels.len() != 3 {
            return Err(Error::InvalidRaster(format!(
                "expected 1 or 3 channels, got {}",
                channels.len()
            )));
        }
        let n = width * height;
        if let Some(bad) = channels.iter().find(|c| c.len() != n) {
            return Err(Error::InvalidRaster(format!(
                "channel has {} samples, expected {n}",
                bad.len()
            )));
        }
        Ok(Raster {
            width,
            height,
            channels,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(width, height, vec![data])
    }

    pub fn rgb(width: usize, height: usize, r: Vec<f64>, g: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        Self::new(width, height, vec![r, g, b])
    }

    /// A constant single-channel raster.
    pub fn filled_gray(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::gray(width, height, vec![value; width * height])
    }

    /// A constant RGB raster.
    pub fn filled_rgb(width: usize, height: usize, color: Rgb) -> Result<Self> {
        let n = width * height;
        Self::rgb(
            width,
            height,
            vec![color.r; n],
            vec![color.g; n],
            vec![color.b; n],
        )
    }

    /// Builds a raster by evaluating `f(row, col)` for every pixel.
    pub fn from_fn_gray(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self::gray(width, height, data)
    }

    pub fn from_fn_rgb(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Rgb,
    ) -> Result<Self> {
        let n = width * height;
        let (mut r, mut g, mut b) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        for row in 0..height {
            for col in 0..width {
                let c = f(row, col);
                r.push(c.r);
                g.push(c.g);
                b.push(c.b);
            }
        }
        Self::rgb(width, height, r, g, b)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn is_gray(&self) -> bool {
        self.channels.len() == 1
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.channels[c]
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// Sample of channel `c` at (`row`, `col`).
    #[inline]
    pub fn at(&self, c: usize, row: usize, col: usize) -> f64 {
        self.channels[c][row * self.width + col]
    }

    /// RGB triple at a row-major pixel index. Gray rasters replicate the sample.
    pub fn rgb_at(&self, idx: usize) -> Rgb {
        if self.is_gray() {
            let v = self.channels[0][idx];
            Rgb::new(v, v, v)
        } else {
            Rgb::new(
                self.channels[0][idx],
                self.channels[1][idx],
                self.channels[2][idx],
            )
        }
    }

    pub fn same_shape(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_shape(&self, width: usize, height: usize) -> Result<()> {
        if self.width == width && self.height == height {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: (width, height),
                actual: (self.width, self.height),
            })
        }
    }

    /// The raster as RGB; gray rasters are replicated into three channels.
    pub fn to_rgb(&self) -> Raster {
        if self.is_gray() {
            let c = self.channels[0].clone();
            Raster {
                width: self.width,
                height: self.height,
                channels: vec![c.clone(), c.clone(), c],
            }
        } else {
            self.clone()
        }
    }
}

/// BT.601 luma of every pixel. Single-channel input is returned unchanged.
pub fn to_grayscale(img: &Raster) -> Raster {
    if img.is_gray() {
        return img.clone();
    }
    let data = (0..img.len())
        .map(|i| rgb_to_yuv(img.rgb_at(i)).y)
        .collect();
    Raster {
        width: img.width,
        height: img.height,
        channels: vec![data],
    }
}
