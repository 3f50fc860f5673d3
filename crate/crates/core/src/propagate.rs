//! Chroma propagation from sparse scribbles.
//!
//! Every pixel's chroma should match the weighted mean of its 8 neighbours,
//! with weights falling off with luminance difference. Scribble pixels are
//! hard constraints. The remaining unknowns solve the least-squares problem
//! `min |A_u x + A_k c|²` with `A = I - W`, via preconditioned conjugate
//! gradient on the normal equations, matrix-free.

use std::fmt::Write as _;

use crate::color::{gray_lightness, lab_to_rgb, rgb_to_yuv, yuv_to_rgb, Lab, Yuv};
use crate::error::{Error, Result};
use crate::features::local_stddev;
use crate::quantize::ChromaPalette;
use crate::raster::Raster;
use crate::superpixel::SuperpixelMap;

pub const SIGMA_FLOOR: f64 = 1e-4;

/// Per-pixel normalized affinities to the 8-neighbourhood, stored as CSR.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStencil {
    width: usize,
    height: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    sigma: Vec<f64>,
}

impl WeightStencil {
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
        self.len() == 0
    }

    pub fn neighbors(&self, p: usize) -> &[usize] {
        &self.neighbors[self.offsets[p]..self.offsets[p + 1]]
    }

    pub fn weights(&self, p: usize) -> &[f64] {
        &self.weights[self.offsets[p]..self.offsets[p + 1]]
    }

    pub fn sigma(&self, p: usize) -> f64 {
        self.sigma[p]
    }

    /// `y = (I - W) x`
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (p, out) in y.iter_mut().enumerate() {
            let (a, b) = (self.offsets[p], self.offsets[p + 1]);
            let mut acc = x[p];
            for (&q, &w) in self.neighbors[a..b].iter().zip(&self.weights[a..b]) {
                acc -= w * x[q];
            }
            *out = acc;
        }
    }

    /// `y = (I - W)^T x`
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        for (p, &xp) in x.iter().enumerate() {
            let (a, b) = (self.offsets[p], self.offsets[p + 1]);
            for (&q, &w) in self.neighbors[a..b].iter().zip(&self.weights[a..b]) {
                y[q] -= w * xp;
            }
        }
    }
}

/// Builds the affinity stencil of a luminance raster.
pub fn compute_weights(gray: &Raster) -> Result<WeightStencil> {
    if !gray.is_gray() {
        return Err(Error::InvalidRaster(
            "weights need a single-channel raster".into(),
        ));
    }
    let (w, h) = (gray.width(), gray.height());
    let y = gray.channel(0);
    let sigma: Vec<f64> = local_stddev(gray, 1)
        .into_iter()
        .map(|s| s.max(SIGMA_FLOOR))
        .collect();
    let mut offsets = Vec::with_capacity(w * h + 1);
    let mut neighbors = Vec::with_capacity(8 * w * h);
    let mut weights = Vec::with_capacity(8 * w * h);
    let mut exponents = Vec::with_capacity(8);
    offsets.push(0);
    for row in 0..h {
        for col in 0..w {
            let p = row * w + col;
            let inv = 1.0 / (2.0 * sigma[p] * sigma[p]);
            let start = neighbors.len();
            exponents.clear();
            for r in row.saturating_sub(1)..=(row + 1).min(h - 1) {
                for c in col.saturating_sub(1)..=(col + 1).min(w - 1) {
                    let q = r * w + c;
                    if q != p {
                        let d = y[p] - y[q];
                        neighbors.push(q);
                        exponents.push(d * d * inv);
                    }
                }
            }
            // Shifting by the smallest exponent cancels in the normalization
            // and keeps at least one raw weight at exactly 1.
            let shift = exponents.iter().copied().fold(f64::INFINITY, f64::min);
            let total: f64 = exponents.iter().map(|e| (shift - e).exp()).sum();
            weights.extend(exponents.iter().map(|e| (shift - e).exp() / total));
            debug_assert_eq!(neighbors.len() - start, exponents.len());
            offsets.push(neighbors.len());
        }
    }
    Ok(WeightStencil {
        width: w,
        height: h,
        offsets,
        neighbors,
        weights,
        sigma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scribble {
    pub pixel: usize,
    pub u: f64,
    pub v: f64,
}

/// Hard chroma constraints at single pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScribbleSet {
    width: usize,
    height: usize,
    entries: Vec<Scribble>,
}

impl ScribbleSet {
    pub fn new(width: usize, height: usize, entries: Vec<Scribble>) -> Result<Self> {
        let n = width * height;
        let mut seen = vec![false; n];
        for s in &entries {
            if s.pixel >= n {
                return Err(Error::InvalidInput(format!(
                    "scribble at pixel {} outside the raster",
                    s.pixel
                )));
            }
            if std::mem::replace(&mut seen[s.pixel], true) {
                return Err(Error::InvalidInput(format!(
                    "duplicate scribble at pixel {}",
                    s.pixel
                )));
            }
        }
        Ok(ScribbleSet {
            width,
            height,
            entries,
        })
    }

    pub fn entries(&self) -> &[Scribble] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One `row col U V` line per scribble.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.entries {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                s.pixel / self.width,
                s.pixel % self.width,
                s.u,
                s.v
            );
        }
        out
    }
}

/// (U, V) of palette chroma `(a, b)` shown at the lightness of gray level `g`.
pub fn scribble_chroma(g: f64, ab: [f64; 2]) -> (f64, f64) {
    let rgb = lab_to_rgb(Lab::new(gray_lightness(g), ab[0], ab[1]));
    let yuv = rgb_to_yuv(rgb);
    (yuv.u, yuv.v)
}

/// One scribble per superpixel, at its centroid pixel, carrying the chroma of
/// its label.
pub fn place_scribbles(
    sp: &SuperpixelMap,
    labels: &[usize],
    palette: &ChromaPalette,
    gray: &Raster,
) -> Result<ScribbleSet> {
    if labels.len() != sp.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} superpixels",
            labels.len(),
            sp.len()
        )));
    }
    gray.check_shape(sp.width(), sp.height())?;
    let g = gray.channel(0);
    let entries = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let pixel = sp.centroid_pixel(i)?;
            let (u, v) = scribble_chroma(g[pixel], palette.label_to_chroma(label)?);
            Ok(Scribble { pixel, u, v })
        })
        .collect::<Result<Vec<_>>>()?;
    ScribbleSet::new(sp.width(), sp.height(), entries)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once the normal-equation residual, relative to the right-hand
    /// side, drops below this. Solution error is of the same order.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-8,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves one channel with the given pixels held fixed. Returns the full
/// field and convergence details.
pub fn solve_constrained(
    stencil: &WeightStencil,
    known: &[(usize, f64)],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    if known.is_empty() {
        return Err(Error::NoScribbles);
    }
    let n = stencil.len();
    let mut fixed = vec![false; n];
    let mut field = vec![0.0; n];
    for &(p, c) in known {
        if p >= n {
            return Err(Error::InvalidInput(format!(
                "constraint at pixel {p} outside the raster"
            )));
        }
        fixed[p] = true;
        field[p] = c;
    }
    let free: Vec<usize> = (0..n).filter(|&p| !fixed[p]).collect();
    let done = SolveReport {
        iterations: 0,
        relative_residual: 0.0,
        converged: true,
    };
    if free.is_empty() {
        return Ok((field, done));
    }

    // Scratch buffers over the full grid.
    let mut full = vec![0.0; n];
    let mut ax = vec![0.0; n];
    let mut atax = vec![0.0; n];
    // M x for a free-only vector: restrict (A^T A) to the free set.
    let mut normal = |x: &[f64], out: &mut [f64]| {
        full.fill(0.0);
        for (&p, &v) in free.iter().zip(x) {
            full[p] = v;
        }
        stencil.apply(&full, &mut ax);
        stencil.apply_transpose(&ax, &mut atax);
        for (o, &p) in out.iter_mut().zip(&free) {
            *o = atax[p];
        }
    };

    // b = -A_u^T A_k c
    let mut known_only = vec![0.0; n];
    for &(p, c) in known {
        known_only[p] = c;
    }
    let mut tmp = vec![0.0; n];
    let mut tmp2 = vec![0.0; n];
    stencil.apply(&known_only, &mut tmp);
    stencil.apply_transpose(&tmp, &mut tmp2);
    let b: Vec<f64> = free.iter().map(|&p| -tmp2[p]).collect();

    // Jacobi preconditioner: diag(A^T A)_q = sum_p A_pq^2.
    let mut diag = vec![1.0; n];
    for p in 0..n {
        for (&q, &w) in stencil.neighbors(p).iter().zip(stencil.weights(p)) {
            diag[q] += w * w;
        }
    }
    let inv_diag: Vec<f64> = free.iter().map(|&p| 1.0 / diag[p]).collect();

    let start = known.iter().map(|k| k.1).sum::<f64>() / known.len() as f64;
    let m = free.len();
    let mut x = vec![start; m];
    let mut r = vec![0.0; m];
    normal(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(&b) {
        *ri = bi - *ri;
    }
    let b_norm = dot(&b, &b).sqrt();
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
    let mut rel = dot(&r, &r).sqrt() / scale;
    let mut best = (rel, x.clone());
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    let mut dir = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; m];
    let mut iterations = 0;
    while rel >= opts.tolerance && iterations < opts.max_iterations {
        normal(&dir, &mut q);
        let dq = dot(&dir, &q);
        if dq <= 0.0 {
            break;
        }
        let alpha = rz / dq;
        for i in 0..m {
            x[i] += alpha * dir[i];
            r[i] -= alpha * q[i];
        }
        iterations += 1;
        rel = dot(&r, &r).sqrt() / scale;
        if rel < best.0 {
            best = (rel, x.clone());
        }
        for i in 0..m {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..m {
            dir[i] = z[i] + beta * dir[i];
        }
    }
    let converged = best.0 < opts.tolerance;
    if !converged {
        log::warn!(
            "chroma propagation stopped after {iterations} iterations at relative residual {:.3e}",
            best.0
        );
    }
    for (&p, &v) in free.iter().zip(&best.1) {
        field[p] = v;
    }
    Ok((
        field,
        SolveReport {
            iterations,
            relative_residual: best.0,
            converged,
        },
    ))
}

/// Propagates the U and V channels of the scribbles over the whole raster.
pub fn propagate_chroma(
    stencil: &WeightStencil,
    scribbles: &ScribbleSet,
    opts: &SolverOptions,
) -> Result<(Raster, Raster)> {
    if scribbles.is_empty() {
        return Err(Error::NoScribbles);
    }
    if (scribbles.width, scribbles.height) != (stencil.width, stencil.height) {
        return Err(Error::ShapeMismatch {
            expected: (stencil.width, stencil.height),
            actual: (scribbles.width, scribbles.height),
        });
    }
    let us: Vec<(usize, f64)> = scribbles.entries.iter().map(|s| (s.pixel, s.u)).collect();
    let vs: Vec<(usize, f64)> = scribbles.entries.iter().map(|s| (s.pixel, s.v)).collect();
    let (u, v) = rayon::join(
        || solve_constrained(stencil, &us, opts),
        || solve_constrained(stencil, &vs, opts),
    );
    let (w, h) = (stencil.width, stencil.height);
    Ok((Raster::gray(w, h, u?.0)?, Raster::gray(w, h, v?.0)?))
}

/// Recombines the original luminance with propagated chroma.
pub fn compose_output(gray: &Raster, u: &Raster, v: &Raster) -> Result<Raster> {
    let (w, h) = (gray.width(), gray.height());
    u.check_shape(w, h)?;
    v.check_shape(w, h)?;
    let (y, u, v) = (gray.channel(0), u.channel(0), v.channel(0));
    let mut chans = vec![
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
    ];
    for p in 0..w * h {
        let c = yuv_to_rgb(Yuv::new(y[p], u[p], v[p]));
        chans[0].push(c.r);
        chans[1].push(c.g);
        chans[2].push(c.b);
    }
    Raster::new(w, h, chans)
}
