//! Per-superpixel feature vectors.
//!
//! Layout of the 172 dimensions:
//!
//! | dims      | content                                                  |
//! |-----------|----------------------------------------------------------|
//! | 0, 1      | mean intensity of the superpixel / of its neighbours     |
//! | 2, 3      | same aggregation of the 5x5 local standard deviation     |
//! | 4 ..= 43  | Gabor magnitudes, `4 + 5 * orientation + scale`          |
//! | 44 ..= 171| dense SIFT descriptor averaged over the members          |

mod gabor;
mod sift;

pub use gabor::{GaborBank, GABOR_DIMS, GABOR_ORIENTATIONS, GABOR_SCALES};
pub use sift::{DenseSift, SIFT_DIMS};

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::raster::Raster;
use crate::superpixel::SuperpixelMap;

pub const FEATURE_DIM: usize = 172;
pub const INTENSITY_OFFSET: usize = 0;
pub const STDDEV_OFFSET: usize = 2;
pub const GABOR_OFFSET: usize = 4;
pub const SIFT_OFFSET: usize = GABOR_OFFSET + GABOR_DIMS;

const STDDEV_RADIUS: usize = 2;

/// Fixed-length feature vector of one superpixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn zeros() -> Self {
        FeatureVector([0.0; FEATURE_DIM])
    }
}

impl Default for FeatureVector {
    fn default() -> Self {
        Self::zeros()
    }
}

impl Deref for FeatureVector {
    type Target = [f64; FEATURE_DIM];
    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl DerefMut for FeatureVector {
    fn deref_mut(&mut self) -> &mut Self::Target {
        &mut self.0
    }
}

/// Multipliers that bring the Gabor and SIFT blocks to a unit maximum over
/// the training set. Frozen into the model and reused at inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScales {
    pub gabor: f64,
    pub sift: f64,
}

impl Default for FeatureScales {
    fn default() -> Self {
        FeatureScales {
            gabor: 1.0,
            sift: 1.0,
        }
    }
}

impl FeatureScales {
    pub fn fit(features: &[FeatureVector]) -> Self {
        let block_max = |range: std::ops::Range<usize>| {
            features
                .iter()
                .flat_map(|f| f[range.clone()].iter().copied())
                .fold(0.0f64, f64::max)
        };
        let inv = |m: f64| if m > 0.0 { 1.0 / m } else { 1.0 };
        FeatureScales {
            gabor: inv(block_max(GABOR_OFFSET..SIFT_OFFSET)),
            sift: inv(block_max(SIFT_OFFSET..FEATURE_DIM)),
        }
    }

    pub fn apply(&self, features: &mut [FeatureVector]) {
        for f in features {
            f[GABOR_OFFSET..SIFT_OFFSET]
                .iter_mut()
                .for_each(|v| *v *= self.gabor);
            f[SIFT_OFFSET..].iter_mut().for_each(|v| *v *= self.sift);
        }
    }
}

/// Aggregates a per-pixel map into (own mean, pooled neighbour mean).
/// Superpixels without neighbours repeat their own mean.
pub fn aggregate_with_neighbors(map: &[f64], sp: &SuperpixelMap) -> Vec<(f64, f64)> {
    let sums: Vec<f64> = (0..sp.len())
        .map(|i| sp.members(i).iter().map(|&p| map[p]).sum())
        .collect();
    (0..sp.len())
        .map(|i| {
            let own = sums[i] / sp.members(i).len() as f64;
            let nb = sp.neighbors(i);
            if nb.is_empty() {
                return (own, own);
            }
            let total: f64 = nb.iter().map(|&j| sums[j]).sum();
            let count: usize = nb.iter().map(|&j| sp.members(j).len()).sum();
            (own, total / count as f64)
        })
        .collect()
}

/// Mean of each per-pixel map over every superpixel's members.
pub(crate) fn member_means(maps: &[Vec<f64>], sp: &SuperpixelMap) -> Vec<Vec<f64>> {
    (0..sp.len())
        .map(|i| {
            let m = sp.members(i);
            maps.iter()
                .map(|map| m.iter().map(|&p| map[p]).sum::<f64>() / m.len() as f64)
                .collect()
        })
        .collect()
}

pub fn intensity_feature(gray: &Raster, sp: &SuperpixelMap) -> Result<Vec<(f64, f64)>> {
    gray.check_shape(sp.width(), sp.height())?;
    Ok(aggregate_with_neighbors(gray.channel(0), sp))
}

/// Population standard deviation over the `(2r+1)²` window around each
/// pixel, clipped at the borders.
pub fn local_stddev(gray: &Raster, radius: usize) -> Vec<f64> {
    let (w, h) = (gray.width(), gray.height());
    let img = gray.channel(0);
    let mut out = Vec::with_capacity(w * h);
    for row in 0..h {
        let r0 = row.saturating_sub(radius);
        let r1 = (row + radius).min(h - 1);
        for col in 0..w {
            let c0 = col.saturating_sub(radius);
            let c1 = (col + radius).min(w - 1);
            // Deviations from the centre pixel: flat windows give exactly 0.
            let centre = img[row * w + col];
            let (mut s, mut s2, mut n) = (0.0, 0.0, 0usize);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let d = img[r * w + c] - centre;
                    s += d;
                    s2 += d * d;
                    n += 1;
                }
            }
            let mean = s / n as f64;
            out.push((s2 / n as f64 - mean * mean).max(0.0).sqrt());
        }
    }
    out
}

pub fn stddev_feature(gray: &Raster, sp: &SuperpixelMap) -> Result<Vec<(f64, f64)>> {
    gray.check_shape(sp.width(), sp.height())?;
    Ok(aggregate_with_neighbors(
        &local_stddev(gray, STDDEV_RADIUS),
        sp,
    ))
}

pub fn gabor_feature(gray: &Raster, sp: &SuperpixelMap) -> Result<Vec<Vec<f64>>> {
    gray.check_shape(sp.width(), sp.height())?;
    let maps = GaborBank::new().responses(gray);
    Ok(member_means(&maps, sp))
}

pub fn dense_sift_feature(gray: &Raster, sp: &SuperpixelMap) -> Result<Vec<Vec<f64>>> {
    gray.check_shape(sp.width(), sp.height())?;
    Ok(DenseSift::new(gray).superpixel_means(sp))
}

/// Unscaled feature vectors for every superpixel, in id order.
pub fn assemble_features(gray: &Raster, sp: &SuperpixelMap) -> Result<Vec<FeatureVector>> {
    let intensity = intensity_feature(gray, sp)?;
    let stddev = stddev_feature(gray, sp)?;
    let gabor = gabor_feature(gray, sp)?;
    let sift = dense_sift_feature(gray, sp)?;
    Ok((0..sp.len())
        .map(|i| {
            let mut f = FeatureVector::zeros();
            f[INTENSITY_OFFSET] = intensity[i].0;
            f[INTENSITY_OFFSET + 1] = intensity[i].1;
            f[STDDEV_OFFSET] = stddev[i].0;
            f[STDDEV_OFFSET + 1] = stddev[i].1;
            f[GABOR_OFFSET..SIFT_OFFSET].copy_from_slice(&gabor[i]);
            f[SIFT_OFFSET..].copy_from_slice(&sift[i]);
            f
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superpixel::extract_superpixels;

    #[test]
    fn uniform_raster_features() {
        let img = Raster::filled_gray(24, 20, 0.37).unwrap();
        let sp = extract_superpixels(&img, 40).unwrap();
        for f in assemble_features(&img, &sp).unwrap() {
            assert!((f[0] - 0.37).abs() < 1e-12 && (f[1] - 0.37).abs() < 1e-12);
            assert_eq!(f[2], 0.0);
            assert_eq!(f[3], 0.0);
            assert!(f[GABOR_OFFSET..SIFT_OFFSET].iter().all(|v| v.abs() < 1e-9));
            assert!(f[SIFT_OFFSET..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn intensity_of_two_equal_halves() {
        let img = Raster::from_fn_gray(4, 2, |_, c| if c < 2 { 0.1 } else { 0.2 }).unwrap();
        let sp = SuperpixelMap::from_labels(4, 2, vec![0, 0, 1, 1, 0, 0, 1, 1]).unwrap();
        let f = intensity_feature(&img, &sp).unwrap();
        assert!((f[0].0 - 0.1).abs() < 1e-12 && (f[0].1 - 0.2).abs() < 1e-12);
        assert!((f[1].0 - 0.2).abs() < 1e-12 && (f[1].1 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn single_superpixel_falls_back_to_own_mean() {
        let img = Raster::filled_gray(3, 3, 0.6).unwrap();
        let sp = SuperpixelMap::from_labels(3, 3, vec![0; 9]).unwrap();
        assert_eq!(intensity_feature(&img, &sp).unwrap(), vec![(0.6, 0.6)]);
        let s = stddev_feature(&img, &sp).unwrap();
        assert_eq!(s[0].1, 0.0);
    }

    #[test]
    fn checkerboard_stddev_interior() {
        let img = Raster::from_fn_gray(9, 9, |r, c| ((r + c) % 2) as f64).unwrap();
        let sd = local_stddev(&img, 2);
        // Brute-force count: 13 of one tone and 12 of the other in a 5x5 window.
        let expected = (156.0f64 / 625.0).sqrt();
        assert!((sd[4 * 9 + 4] - expected).abs() < 1e-12);
        assert!((expected - 0.4996).abs() < 1e-4);
    }

    #[test]
    fn identical_content_gives_identical_vectors() {
        let img =
            Raster::from_fn_gray(30, 26, |r, c| ((r * 7 + c * 3) % 11) as f64 / 10.0).unwrap();
        let sp = extract_superpixels(&img, 40).unwrap();
        let a = assemble_features(&img, &sp).unwrap();
        let b = assemble_features(&img.clone(), &sp).unwrap();
        assert_eq!(a, b);
        for f in &a {
            assert!(f.iter().all(|v| v.is_finite()));
            assert!((0.0..=1.0).contains(&f[0]) && (0.0..=1.0).contains(&f[3]));
            assert!(f[GABOR_OFFSET..].iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn scales_normalize_block_maxima() {
        let mut a = FeatureVector::zeros();
        a[GABOR_OFFSET] = 4.0;
        a[SIFT_OFFSET + 3] = 0.5;
        let mut b = FeatureVector::zeros();
        b[GABOR_OFFSET + 7] = 2.0;
        let mut feats = vec![a, b];
        let s = FeatureScales::fit(&feats);
        assert_eq!(
            s,
            FeatureScales {
                gabor: 0.25,
                sift: 2.0
            }
        );
        s.apply(&mut feats);
        assert_eq!(feats[0][GABOR_OFFSET], 1.0);
        assert_eq!(feats[0][SIFT_OFFSET + 3], 1.0);
        assert_eq!(
            FeatureScales::fit(&[FeatureVector::zeros()]),
            FeatureScales::default()
        );
    }

    #[test]
    fn stddev_is_shift_consistent() {
        let f = |r: usize, c: usize| ((r * 13 + c * 5) % 17) as f64 / 16.0;
        let a = Raster::from_fn_gray(20, 20, f).unwrap();
        let b = Raster::from_fn_gray(20, 20, |r, c| f(r + 3, c + 2)).unwrap();
        let (sa, sb) = (local_stddev(&a, 2), local_stddev(&b, 2));
        for r in 2..15 {
            for c in 2..16 {
                assert!((sb[r * 20 + c] - sa[(r + 3) * 20 + c + 2]).abs() < 1e-12);
            }
        }
    }
}
