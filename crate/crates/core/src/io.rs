//! 8-bit PNG I/O and 16-bit label-map dumps.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb as ImgRgb};

use crate::error::{Error, Result};
use crate::raster::Raster;

fn image_err(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

/// Quantizes a `[0, 1]` sample to 8 bits.
#[inline]
pub fn to_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Loads a PNG. Gray (with or without alpha) becomes a 1-channel raster,
/// everything else 3-channel RGB. Alpha is discarded.
pub fn load_png(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let img = image::open(path).map_err(image_err(path))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = matches!(
        img,
        DynamicImage::ImageLuma8(_)
            | DynamicImage::ImageLumaA8(_)
            | DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
    );
    if gray {
        let buf = img.to_luma8();
        let data = buf.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
        Raster::gray(w, h, data)
    } else {
        let buf = img.to_rgb8();
        let n = w * h;
        let mut ch = [
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        ];
        for px in buf.as_raw().chunks_exact(3) {
            for (c, &v) in ch.iter_mut().zip(px) {
                c.push(v as f64 / 255.0);
            }
        }
        let [r, g, b] = ch;
        Raster::rgb(w, h, r, g, b)
    }
}

/// Saves a raster as an 8-bit gray or RGB PNG.
pub fn save_png(img: &Raster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (img.width() as u32, img.height() as u32);
    if img.is_gray() {
        let data = img.channel(0).iter().map(|&v| to_u8(v)).collect();
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(w, h, data)
            .ok_or_else(|| Error::InvalidRaster("buffer size mismatch".into()))?;
        buf.save(path).map_err(image_err(path))
    } else {
        let mut data = Vec::with_capacity(img.len() * 3);
        for i in 0..img.len() {
            for c in 0..3 {
                data.push(to_u8(img.channel(c)[i]));
            }
        }
        let buf: ImageBuffer<ImgRgb<u8>, Vec<u8>> = ImageBuffer::from_raw(w, h, data)
            .ok_or_else(|| Error::InvalidRaster("buffer size mismatch".into()))?;
        buf.save(path).map_err(image_err(path))
    }
}

/// Writes an id map (superpixels or segments) as a 16-bit gray PNG whose
/// sample values are the ids themselves.
pub fn save_label_png(
    labels: &[usize],
    width: usize,
    height: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if labels.len() != width * height {
        return Err(Error::InvalidInput(format!(
            "label map has {} entries, expected {}",
            labels.len(),
            width * height
        )));
    }
    let data = labels
        .iter()
        .map(|&l| {
            u16::try_from(l)
                .map_err(|_| Error::InvalidInput(format!("id {l} does not fit a 16-bit PNG")))
        })
        .collect::<Result<Vec<u16>>>()?;
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width as u32, height as u32, data)
            .ok_or_else(|| Error::InvalidInput("buffer size mismatch".into()))?;
    buf.save(path).map_err(image_err(path))
}

/// Reads back a map written by [`save_label_png`].
pub fn load_label_png(path: impl AsRef<Path>) -> Result<(Vec<usize>, usize, usize)> {
    let path = path.as_ref();
    let img = image::open(path).map_err(image_err(path))?.to_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok((img.as_raw().iter().map(|&v| v as usize).collect(), w, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::Rgb;

    #[test]
    fn png_round_trip_is_exact_on_8bit_values() {
        let dir = tempfile::tempdir().unwrap();
        let img = Raster::from_fn_rgb(7, 5, |r, c| {
            Rgb::new(
                (r * 30) as f64 / 255.0,
                (c * 20) as f64 / 255.0,
                ((r + c) * 9) as f64 / 255.0,
            )
        })
        .unwrap();
        let p = dir.path().join("a.png");
        save_png(&img, &p).unwrap();
        assert_eq!(load_png(&p).unwrap(), img);

        let gray = Raster::from_fn_gray(3, 4, |r, c| (r * 3 + c) as f64 / 255.0).unwrap();
        let p = dir.path().join("g.png");
        save_png(&gray, &p).unwrap();
        assert_eq!(load_png(&p).unwrap(), gray);
    }

    #[test]
    fn save_clamps_and_rounds() {
        assert_eq!(to_u8(-0.5), 0);
        assert_eq!(to_u8(1.7), 255);
        assert_eq!(to_u8(0.5), 128);
    }

    #[test]
    fn label_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.png");
        let labels: Vec<usize> = (0..12).map(|i| i * 1000).collect();
        save_label_png(&labels, 4, 3, &p).unwrap();
        assert_eq!(load_label_png(&p).unwrap(), (labels, 4, 3));
        assert!(save_label_png(&[70_000], 1, 1, &p).is_err());
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_png("/nonexistent/x.png").unwrap_err();
        assert!(err.is_io());
    }
}
