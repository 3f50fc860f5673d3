//! k-means quantization of superpixel chroma into color labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100;

/// Representative `(a, b)` chroma of each color label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChromaPalette {
    centers: Vec<[f64; 2]>,
}

impl ChromaPalette {
    pub fn new(centers: Vec<[f64; 2]>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidInput(
                "palette needs at least one center".into(),
            ));
        }
        if centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("palette centers must be finite".into()));
        }
        Ok(ChromaPalette { centers })
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    pub fn label_to_chroma(&self, label: usize) -> Result<[f64; 2]> {
        self.centers
            .get(label)
            .copied()
            .ok_or(Error::LabelOutOfRange { label, k: self.k() })
    }

    /// Index of the nearest center; ties go to the lower index.
    pub fn nearest(&self, point: [f64; 2]) -> usize {
        nearest(&self.centers, point).0
    }
}

#[inline]
fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (da, db) = (a[0] - b[0], a[1] - b[1]);
    da * da + db * db
}

fn nearest(centers: &[[f64; 2]], p: [f64; 2]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &c) in centers.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Number of distinct points (exact comparison).
pub fn count_distinct(points: &[[f64; 2]]) -> usize {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    sorted.dedup();
    sorted.len()
}

/// Sum of squared distances from each point to its assigned center.
pub fn distortion(points: &[[f64; 2]], centers: &[[f64; 2]], labels: &[usize]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(&p, &l)| dist2(p, centers[l]))
        .sum()
}

fn kmeans_plus_plus(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = d2.iter().rposition(|&d| d > 0.0).unwrap_or(0);
        for (i, &d) in d2.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            if target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        let c = points[pick];
        centers.push(c);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, c));
        }
    }
    centers
}

/// Clusters `points` into `k` groups. Returns the palette and the label of
/// every point.
pub fn quantize_chroma(
    points: &[[f64; 2]],
    k: usize,
    seed: u64,
) -> Result<(ChromaPalette, Vec<usize>)> {
    if points.is_empty() {
        return Err(Error::InvalidInput("no chroma points to cluster".into()));
    }
    if k == 0 {
        return Err(Error::InvalidInput("cluster count must be positive".into()));
    }
    let distinct = count_distinct(points);
    if k > distinct {
        return Err(Error::TooManyClusters { k, distinct });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_plus_plus(points, k, &mut rng);
    let mut labels: Vec<usize> = points.iter().map(|&p| nearest(&centers, p).0).collect();

    for _ in 0..MAX_ITERATIONS {
        update_centers(points, &mut labels, &mut centers);
        let mut changed = false;
        for (l, &p) in labels.iter_mut().zip(points) {
            let n = nearest(&centers, p).0;
            if n != *l {
                *l = n;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok((ChromaPalette { centers }, labels))
}

/// Moves every center to the mean of its points. An empty cluster is
/// re-seeded at the point farthest from its current center.
fn update_centers(points: &[[f64; 2]], labels: &mut [usize], centers: &mut [[f64; 2]]) {
    let k = centers.len();
    loop {
        let mut sums = vec![[0.0, 0.0]; k];
        let mut counts = vec![0usize; k];
        for (&p, &l) in points.iter().zip(labels.iter()) {
            sums[l][0] += p[0];
            sums[l][1] += p[1];
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            for ((c, s), &n) in centers.iter_mut().zip(&sums).zip(&counts) {
                *c = [s[0] / n as f64, s[1] / n as f64];
            }
            return;
        };
        // Farthest point from its center, among clusters that can spare one.
        let far = (0..points.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| {
                dist2(points[a], centers[labels[a]])
                    .total_cmp(&dist2(points[b], centers[labels[b]]))
                    .then(b.cmp(&a))
            });
        match far {
            Some(i) => {
                centers[empty] = points[i];
                labels[i] = empty;
            }
            None => return,
        }
    }
}
