//! Complex Gabor filter bank, 8 orientations x 5 scales.
//!
//! Wavelengths are `pi * e^s` for `s = 0..5`, the Gaussian envelope has
//! `sigma = 0.56 * lambda` and is truncated at `3 sigma`. Every discrete kernel
//! is re-centred to zero mean after sampling so constant images give an exact
//! zero response.
//!
//! The image is extended by half-sample symmetric mirroring. That extension
//! is periodic with period `(2h, 2w)`, so linear filtering of the extended
//! image equals circular convolution of the `2h x 2w` mirrored tile with the
//! kernel folded modulo the tile size. This keeps the FFT size independent of
//! the (large) kernel support at coarse scales.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::raster::Raster;

pub const GABOR_ORIENTATIONS: usize = 8;
pub const GABOR_SCALES: usize = 5;
pub const GABOR_DIMS: usize = GABOR_ORIENTATIONS * GABOR_SCALES;

const SIGMA_PER_WAVELENGTH: f64 = 0.56;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborParams {
    pub theta: f64,
    pub wavelength: f64,
    pub sigma: f64,
    pub radius: usize,
}

/// The fixed filter bank. Index of a filter is `5 * orientation + scale`.
#[derive(Debug, Clone)]
pub struct GaborBank {
    filters: Vec<GaborParams>,
}

impl Default for GaborBank {
    fn default() -> Self {
        Self::new()
    }
}

impl GaborBank {
    pub fn new() -> Self {
        let mut filters = Vec::with_capacity(GABOR_DIMS);
        for o in 0..GABOR_ORIENTATIONS {
            for s in 0..GABOR_SCALES {
                let wavelength = PI * (s as f64).exp();
                let sigma = SIGMA_PER_WAVELENGTH * wavelength;
                filters.push(GaborParams {
                    theta: o as f64 * PI / GABOR_ORIENTATIONS as f64,
                    wavelength,
                    sigma,
                    radius: (3.0 * sigma).ceil() as usize,
                });
            }
        }
        GaborBank { filters }
    }

    pub fn filters(&self) -> &[GaborParams] {
        &self.filters
    }

    /// Per-pixel response magnitude of every filter, in bank order.
    pub fn responses(&self, gray: &Raster) -> Vec<Vec<f64>> {
        let (w, h) = (gray.width(), gray.height());
        let fft = Fft2::new(2 * h, 2 * w);
        let mut tile = mirrored_tile(gray.channel(0), w, h);
        fft.forward(&mut tile);

        let norm = 1.0 / (4 * w * h) as f64;
        self.filters
            .iter()
            .map(|p| {
                let mut freq = folded_kernel(p, 2 * h, 2 * w);
                fft.forward(&mut freq);
                for (s, t) in freq.iter_mut().zip(&tile) {
                    *s *= t;
                }
                fft.inverse(&mut freq);
                let mut out = Vec::with_capacity(w * h);
                for row in 0..h {
                    for col in 0..w {
                        out.push(freq[row * 2 * w + col].norm() * norm);
                    }
                }
                out
            })
            .collect()
    }
}

/// Half-sample symmetric index: `... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...`.
#[inline]
fn mirror(i: usize, n: usize) -> usize {
    if i < n {
        i
    } else {
        2 * n - 1 - i
    }
}

fn mirrored_tile(img: &[f64], w: usize, h: usize) -> Vec<Complex64> {
    let (h2, w2) = (2 * h, 2 * w);
    let mut tile = Vec::with_capacity(h2 * w2);
    for r in 0..h2 {
        let rr = mirror(r, h);
        for c in 0..w2 {
            tile.push(Complex64::new(img[rr * w + mirror(c, w)], 0.0));
        }
    }
    tile
}

/// Samples the zero-mean kernel on its square support and folds it onto a
/// `rows x cols` periodic grid.
fn folded_kernel(p: &GaborParams, rows: usize, cols: usize) -> Vec<Complex64> {
    let r = p.radius as isize;
    let side = 2 * p.radius + 1;
    let (cos_t, sin_t) = (p.theta.cos(), p.theta.sin());
    let inv_two_sigma2 = 1.0 / (2.0 * p.sigma * p.sigma);
    let freq = 2.0 * PI / p.wavelength;

    let mut taps = Vec::with_capacity(side * side);
    let mut env_sum = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            let (x, y) = (dx as f64, dy as f64);
            let env = (-(x * x + y * y) * inv_two_sigma2).exp();
            let phase = freq * (x * cos_t + y * sin_t);
            env_sum += env;
            taps.push(Complex64::from_polar(env, phase));
        }
    }
    let mut mean = Complex64::new(0.0, 0.0);
    for t in &mut taps {
        *t /= env_sum;
        mean += *t;
    }
    mean /= taps.len() as f64;

    let wrap = |d: isize, n: usize| d.rem_euclid(n as isize) as usize;
    let row_idx: Vec<usize> = (-r..=r).map(|d| wrap(d, rows)).collect();
    let col_idx: Vec<usize> = (-r..=r).map(|d| wrap(d, cols)).collect();
    let mut grid = vec![Complex64::new(0.0, 0.0); rows * cols];
    for (i, &ri) in row_idx.iter().enumerate() {
        let base = ri * cols;
        for (j, &cj) in col_idx.iter().enumerate() {
            grid[base + cj] += taps[i * side + j] - mean;
        }
    }
    grid
}

/// Unnormalized 2-D FFT over a row-major buffer.
struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.row_fwd, &self.col_fwd);
    }

    fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.row_inv, &self.col_inv);
    }

    fn run(&self, buf: &mut [Complex64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        row.process(buf);
        let mut column = vec![Complex64::new(0.0, 0.0); self.rows];
        for c in 0..self.cols {
            for r in 0..self.rows {
                column[r] = buf[r * self.cols + c];
            }
            col.process(&mut column);
            for r in 0..self.rows {
                buf[r * self.cols + c] = column[r];
            }
        }
    }
}
