//! Deterministic synthetic inputs shared by the benchmarks.

use chromaforest::{Raster, Rgb};

/// Smooth textured color image with a few hue regions.
pub fn scene(width: usize, height: usize) -> Raster {
    let palette = [
        Rgb::new(0.70, 0.35, 0.30),
        Rgb::new(0.30, 0.55, 0.70),
        Rgb::new(0.55, 0.70, 0.30),
        Rgb::new(0.85, 0.80, 0.45),
    ];
    Raster::from_fn_rgb(width, height, |r, c| {
        let region = (2 * r / height) * 2 + 2 * c / width;
        let base = palette[region.min(3)];
        let t = 0.05 * ((r as f64 * 0.31).sin() + (c as f64 * 0.17).cos());
        Rgb::new(base.r + t, base.g + t, base.b + t).clamped()
    })
    .expect("non-empty dimensions")
}

/// Gray version of [`scene`].
pub fn gray_scene(width: usize, height: usize) -> Raster {
    chromaforest::to_grayscale(&scene(width, height))
}
