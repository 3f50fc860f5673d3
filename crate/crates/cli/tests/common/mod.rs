#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use chromaforest::{Raster, Rgb};

pub const BIN: &str = env!("CARGO_BIN_EXE_chromaforest");

pub fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Four flat quadrants with distinct chroma and well separated luminance.
pub const QUADRANT_COLORS: [Rgb; 4] = [
    Rgb::new(0.15, 0.25, 0.55),
    Rgb::new(0.75, 0.30, 0.25),
    Rgb::new(0.40, 0.70, 0.35),
    Rgb::new(0.95, 0.85, 0.45),
];

pub fn quadrant_index(w: usize, h: usize, r: usize, c: usize) -> usize {
    2 * usize::from(r >= h / 2) + usize::from(c >= w / 2)
}

pub fn quadrants(w: usize, h: usize) -> Raster {
    Raster::from_fn_rgb(w, h, |r, c| QUADRANT_COLORS[quadrant_index(w, h, r, c)]).unwrap()
}

pub fn write_png(img: &Raster, path: &Path) {
    chromaforest::io::save_png(img, path).unwrap();
}
