//! Dense SIFT: one 4x4x8 descriptor per pixel over a 16x16 patch.

use std::f64::consts::TAU;

use crate::raster::Raster;
use crate::superpixel::SuperpixelMap;

pub const SIFT_DIMS: usize = 128;
const CELLS: usize = 4;
const CELL_SIZE: usize = 4;
const BINS: usize = 8;
const HALF_PATCH: isize = (CELLS * CELL_SIZE / 2) as isize;
const CLIP: f64 = 0.2;

/// Gradient field of a gray image, pre-binned for descriptor accumulation.
pub struct DenseSift {
    width: usize,
    height: usize,
    /// (lower bin, weight to lower bin, weight to upper bin) per pixel.
    binned: Vec<(usize, f64, f64)>,
}

impl DenseSift {
    pub fn new(gray: &Raster) -> Self {
        let (w, h) = (gray.width(), gray.height());
        let img = gray.channel(0);
        let mut binned = Vec::with_capacity(w * h);
        for row in 0..h {
            let up = row.saturating_sub(1);
            let down = (row + 1).min(h - 1);
            for col in 0..w {
                let left = col.saturating_sub(1);
                let right = (col + 1).min(w - 1);
                let gx = 0.5 * (img[row * w + right] - img[row * w + left]);
                let gy = 0.5 * (img[down * w + col] - img[up * w + col]);
                let mag = gx.hypot(gy);
                if mag == 0.0 {
                    binned.push((0, 0.0, 0.0));
                    continue;
                }
                let angle = gy.atan2(gx).rem_euclid(TAU);
                let pos = angle / (TAU / BINS as f64);
                let lo = pos.floor();
                let frac = pos - lo;
                binned.push(((lo as usize) % BINS, mag * (1.0 - frac), mag * frac));
            }
        }
        DenseSift {
            width: w,
            height: h,
            binned,
        }
    }

    /// Normalized descriptor of the patch centred at (`row`, `col`). Index is
    /// `(4 * cell_row + cell_col) * 8 + bin`. Zero-gradient patches give zeros.
    pub fn descriptor_at(&self, row: usize, col: usize) -> [f64; SIFT_DIMS] {
        let mut d = [0.0; SIFT_DIMS];
        let (w, h) = (self.width as isize, self.height as isize);
        for dy in -HALF_PATCH..HALF_PATCH {
            let r = row as isize + dy;
            if r < 0 || r >= h {
                continue;
            }
            let cell_r = ((dy + HALF_PATCH) as usize) / CELL_SIZE;
            for dx in -HALF_PATCH..HALF_PATCH {
                let c = col as isize + dx;
                if c < 0 || c >= w {
                    continue;
                }
                let cell_c = ((dx + HALF_PATCH) as usize) / CELL_SIZE;
                let (bin, lo, hi) = self.binned[(r * w + c) as usize];
                let base = (cell_r * CELLS + cell_c) * BINS;
                d[base + bin] += lo;
                d[base + (bin + 1) % BINS] += hi;
            }
        }
        normalize(&mut d);
        d
    }

    /// Mean descriptor over each superpixel's members.
    pub fn superpixel_means(&self, sp: &SuperpixelMap) -> Vec<Vec<f64>> {
        let mut sums = vec![vec![0.0; SIFT_DIMS]; sp.len()];
        for row in 0..self.height {
            for col in 0..self.width {
                let d = self.descriptor_at(row, col);
                let s = &mut sums[sp.labels()[row * self.width + col]];
                for (acc, v) in s.iter_mut().zip(d) {
                    *acc += v;
                }
            }
        }
        for (i, s) in sums.iter_mut().enumerate() {
            let n = sp.members(i).len() as f64;
            s.iter_mut().for_each(|v| *v /= n);
        }
        sums
    }
}

fn normalize(d: &mut [f64; SIFT_DIMS]) {
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 1e-12 {
        d.fill(0.0);
        return;
    }
    for v in d.iter_mut() {
        *v = (*v / norm).min(CLIP);
    }
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    d.iter_mut().for_each(|v| *v /= norm);
}
