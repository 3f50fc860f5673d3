//! Compact connected superpixels by local k-means in (intensity, x, y).
//!
//! Seeds are placed on a grid with spacing `sqrt(target_size)` and refined
//! for a fixed number of iterations, each center only competing for pixels
//! inside a window around itself. A final pass keeps the largest 4-connected
//! component of every cluster and hands orphaned fragments to the adjacent
//! superpixel they share the longest border with.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::raster::Raster;

const ITERATIONS: usize = 10;
const COMPACTNESS: f64 = 0.1;

/// Dense partition of a raster into superpixels.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelMap {
    width: usize,
    height: usize,
    labels: Vec<usize>,
    members: Vec<Vec<usize>>,
    centroids: Vec<(f64, f64)>,
    neighbors: Vec<Vec<usize>>,
}

impl SuperpixelMap {
    /// Builds the map from a per-pixel id array. Ids must be dense `0..K`.
    /// Connectivity is not checked here; see [`SuperpixelMap::is_connected`].
    pub fn from_labels(width: usize, height: usize, labels: Vec<usize>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(Error::InvalidSuperpixels(format!(
                "{} labels for a {width}x{height} raster",
                labels.len()
            )));
        }
        let k = labels.iter().max().map_or(0, |&m| m + 1);
        let mut members = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            members[l].push(i);
        }
        if let Some(id) = members.iter().position(|m| m.is_empty()) {
            return Err(Error::InvalidSuperpixels(format!("id {id} has no pixels")));
        }
        let centroids = members
            .iter()
            .map(|m| {
                let (mut sr, mut sc) = (0.0, 0.0);
                for &p in m {
                    sr += (p / width) as f64;
                    sc += (p % width) as f64;
                }
                (sr / m.len() as f64, sc / m.len() as f64)
            })
            .collect();
        let mut neighbors = vec![Vec::new(); k];
        for row in 0..height {
            for col in 0..width {
                let a = labels[row * width + col];
                if col + 1 < width {
                    let b = labels[row * width + col + 1];
                    if a != b {
                        neighbors[a].push(b);
                        neighbors[b].push(a);
                    }
                }
                if row + 1 < height {
                    let b = labels[(row + 1) * width + col];
                    if a != b {
                        neighbors[a].push(b);
                        neighbors[b].push(a);
                    }
                }
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }
        Ok(SuperpixelMap {
            width,
            height,
            labels,
            members,
            centroids,
            neighbors,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of superpixels `K`.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Per-pixel superpixel id, row-major.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Pixel indices of superpixel `id`, ascending.
    pub fn members(&self, id: usize) -> &[usize] {
        &self.members[id]
    }

    /// Real-valued (row, col) centroid of superpixel `id`.
    pub fn centroid(&self, id: usize) -> (f64, f64) {
        self.centroids[id]
    }

    /// Ids sharing a 4-connected border with `id`, ascending.
    pub fn neighbors(&self, id: usize) -> &[usize] {
        &self.neighbors[id]
    }

    pub fn mean_area(&self) -> f64 {
        self.labels.len() as f64 / self.len() as f64
    }

    /// The member pixel nearest the centroid; ties go to the smallest index.
    pub fn centroid_pixel(&self, id: usize) -> Result<usize> {
        let members = self.members.get(id).ok_or(Error::SuperpixelOutOfRange {
            id,
            count: self.len(),
        })?;
        let (cr, cc) = self.centroids[id];
        let mut best = members[0];
        let mut best_d = f64::INFINITY;
        for &p in members {
            let dr = (p / self.width) as f64 - cr;
            let dc = (p % self.width) as f64 - cc;
            let d = dr * dr + dc * dc;
            if d < best_d {
                best_d = d;
                best = p;
            }
        }
        Ok(best)
    }

    /// True when every superpixel's members form one 4-connected region.
    pub fn is_connected(&self) -> bool {
        count_components(&self.labels, self.width, self.height) == self.len()
    }
}

/// Number of 4-connected components of equal label.
pub(crate) fn count_components(labels: &[usize], width: usize, height: usize) -> usize {
    component_ids(labels, width, height).1
}

/// Labels every 4-connected run of equal ids; components are numbered in
/// row-major order of their first pixel.
pub(crate) fn component_ids(labels: &[usize], width: usize, height: usize) -> (Vec<usize>, usize) {
    let n = labels.len();
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = count;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for q in neighbors4(p, width, height) {
                if comp[q] == usize::MAX && labels[q] == labels[start] {
                    comp[q] = count;
                    queue.push_back(q);
                }
            }
        }
        count += 1;
    }
    (comp, count)
}

#[inline]
pub(crate) fn neighbors4(p: usize, width: usize, height: usize) -> impl Iterator<Item = usize> {
    let (row, col) = (p / width, p % width);
    let up = (row > 0).then(|| p - width);
    let down = (row + 1 < height).then(|| p + width);
    let left = (col > 0).then(|| p - 1);
    let right = (col + 1 < width).then(|| p + 1);
    [up, left, right, down].into_iter().flatten()
}

#[derive(Clone, Copy)]
struct Center {
    row: f64,
    col: f64,
    intensity: f64,
}

/// Partitions `gray` into superpixels of roughly `target_size` pixels.
pub fn extract_superpixels(gray: &Raster, target_size: usize) -> Result<SuperpixelMap> {
    if !gray.is_gray() {
        return Err(Error::InvalidRaster(
            "superpixels need a single-channel raster".into(),
        ));
    }
    if target_size == 0 {
        return Err(Error::InvalidInput(
            "target superpixel size must be positive".into(),
        ));
    }
    let (w, h) = (gray.width(), gray.height());
    let img = gray.channel(0);
    let spacing = (target_size as f64).sqrt();
    let nx = ((w as f64 / spacing).round() as usize).max(1);
    let ny = ((h as f64 / spacing).round() as usize).max(1);
    let step_x = w as f64 / nx as f64;
    let step_y = h as f64 / ny as f64;

    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let row = (j as f64 + 0.5) * step_y;
            let col = (i as f64 + 0.5) * step_x;
            let p = (row as usize).min(h - 1) * w + (col as usize).min(w - 1);
            centers.push(Center {
                row,
                col,
                intensity: img[p],
            });
        }
    }
    let mut labels: Vec<usize> = (0..w * h)
        .map(|p| {
            let j = (((p / w) as f64 / step_y) as usize).min(ny - 1);
            let i = (((p % w) as f64 / step_x) as usize).min(nx - 1);
            j * nx + i
        })
        .collect();

    let radius = step_x.max(step_y).ceil();
    let spatial_weight = COMPACTNESS * COMPACTNESS / (spacing * spacing);
    let mut dist = vec![f64::INFINITY; w * h];
    for _ in 0..ITERATIONS {
        dist.fill(f64::INFINITY);
        for (k, c) in centers.iter().enumerate() {
            let r0 = (c.row - radius).floor().max(0.0) as usize;
            let r1 = ((c.row + radius).ceil() as usize).min(h - 1);
            let c0 = (c.col - radius).floor().max(0.0) as usize;
            let c1 = ((c.col + radius).ceil() as usize).min(w - 1);
            for row in r0..=r1 {
                let dr = row as f64 - c.row;
                for col in c0..=c1 {
                    let dc = col as f64 - c.col;
                    let p = row * w + col;
                    let di = img[p] - c.intensity;
                    let d = di * di + spatial_weight * (dr * dr + dc * dc);
                    if d < dist[p] {
                        dist[p] = d;
                        labels[p] = k;
                    }
                }
            }
        }
        let mut sums = vec![(0.0, 0.0, 0.0, 0usize); centers.len()];
        for (p, &l) in labels.iter().enumerate() {
            let s = &mut sums[l];
            s.0 += (p / w) as f64;
            s.1 += (p % w) as f64;
            s.2 += img[p];
            s.3 += 1;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s.3 > 0 {
                let n = s.3 as f64;
                *c = Center {
                    row: s.0 / n,
                    col: s.1 / n,
                    intensity: s.2 / n,
                };
            }
        }
    }

    enforce_connectivity(&mut labels, w, h);
    SuperpixelMap::from_labels(w, h, densify(&labels))
}

/// Keeps the largest component of every label and reassigns the remaining
/// fragments to the neighbouring label with the longest shared border.
fn enforce_connectivity(labels: &mut [usize], w: usize, h: usize) {
    let (comp, ncomp) = component_ids(labels, w, h);
    let mut comp_label = vec![0usize; ncomp];
    let mut comp_size = vec![0usize; ncomp];
    let mut comp_pixels: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for (p, &c) in comp.iter().enumerate() {
        comp_label[c] = labels[p];
        comp_size[c] += 1;
        comp_pixels[c].push(p);
    }
    let nlabels = labels.iter().max().map_or(0, |&m| m + 1);
    let mut keeper = vec![usize::MAX; nlabels];
    for c in 0..ncomp {
        let l = comp_label[c];
        if keeper[l] == usize::MAX || comp_size[c] > comp_size[keeper[l]] {
            keeper[l] = c;
        }
    }
    let mut resolved: Vec<bool> = (0..ncomp).map(|c| keeper[comp_label[c]] == c).collect();
    let mut pending: Vec<usize> = (0..ncomp).filter(|&c| !resolved[c]).collect();
    while !pending.is_empty() {
        let mut still = Vec::new();
        for &c in &pending {
            // Count border contacts with already-resolved components, by label.
            let mut contacts: Vec<(usize, usize)> = Vec::new();
            for &p in &comp_pixels[c] {
                for q in neighbors4(p, w, h) {
                    let qc = comp[q];
                    if qc != c && resolved[qc] {
                        let l = comp_label[qc];
                        match contacts.iter_mut().find(|(lab, _)| *lab == l) {
                            Some(e) => e.1 += 1,
                            None => contacts.push((l, 1)),
                        }
                    }
                }
            }
            let best = contacts
                .iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|&(l, _)| l);
            match best {
                Some(l) => {
                    comp_label[c] = l;
                    resolved[c] = true;
                    for &p in &comp_pixels[c] {
                        labels[p] = l;
                    }
                }
                None => still.push(c),
            }
        }
        if still.len() == pending.len() {
            // Unreachable for a 4-connected raster, which always borders a keeper.
            break;
        }
        pending = still;
    }
}

/// Renumbers ids densely in row-major order of first appearance.
pub(crate) fn densify(labels: &[usize]) -> Vec<usize> {
    let nlabels = labels.iter().max().map_or(0, |&m| m + 1);
    let mut map = vec![usize::MAX; nlabels];
    let mut next = 0;
    labels
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_invariants(sp: &SuperpixelMap) {
        let k = sp.len();
        assert!(sp.labels().iter().all(|&l| l < k));
        let total: usize = (0..k).map(|i| sp.members(i).len()).sum();
        assert_eq!(total, sp.width() * sp.height());
        assert!((0..k).all(|i| !sp.members(i).is_empty()));
        assert!(sp.is_connected());
        for i in 0..k {
            for &j in sp.neighbors(i) {
                assert_ne!(i, j);
                assert!(sp.neighbors(j).contains(&i));
            }
        }
    }

    #[test]
    fn uniform_raster_hits_the_size_target() {
        let img = Raster::filled_gray(200, 200, 0.4).unwrap();
        let sp = extract_superpixels(&img, 40).unwrap();
        assert!((800..=1200).contains(&sp.len()), "K = {}", sp.len());
        check_invariants(&sp);
    }

    #[test]
    fn forty_pixel_raster_is_one_superpixel() {
        let img = Raster::filled_gray(8, 5, 0.5).unwrap();
        let sp = extract_superpixels(&img, 40).unwrap();
        assert_eq!(sp.len(), 1);
        assert_eq!(sp.centroid(0), (2.0, 3.5));
    }

    #[test]
    fn two_tone_halves_give_pure_superpixels() {
        let img = Raster::from_fn_gray(100, 100, |_, c| if c < 50 { 0.2 } else { 0.8 }).unwrap();
        let sp = extract_superpixels(&img, 40).unwrap();
        check_invariants(&sp);
        let pure = (0..sp.len())
            .filter(|&i| {
                let m = sp.members(i);
                let left = m.iter().filter(|&&p| p % 100 < 50).count();
                left == 0 || left == m.len()
            })
            .count();
        assert!(pure as f64 >= 0.95 * sp.len() as f64, "{pure}/{}", sp.len());
    }

    #[test]
    fn noisy_input_is_still_a_connected_partition() {
        let mut state = 12345u64;
        let img = Raster::from_fn_gray(64, 48, |_, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .unwrap();
        let sp = extract_superpixels(&img, 40).unwrap();
        check_invariants(&sp);
        let again = extract_superpixels(&img, 40).unwrap();
        assert_eq!(sp.labels(), again.labels());
    }

    #[test]
    fn centroid_pixel_rules() {
        let sp = SuperpixelMap::from_labels(3, 3, vec![0; 9]).unwrap();
        assert_eq!(sp.centroid_pixel(0).unwrap(), 4);
        assert!(matches!(
            sp.centroid_pixel(1),
            Err(Error::SuperpixelOutOfRange { id: 1, count: 1 })
        ));

        // L shape with centroid (2.0, 0.5): pixel (2, 1) is as close but
        // belongs to the other superpixel, so the answer is (2, 0).
        #[rustfmt::skip]
        let labels = vec![
            0, 1, 1,
            0, 1, 1,
            0, 1, 1,
            0, 0, 0,
        ];
        let sp = SuperpixelMap::from_labels(3, 4, labels).unwrap();
        assert_eq!(sp.centroid(0), (2.0, 0.5));
        let p = sp.centroid_pixel(0).unwrap();
        assert_eq!(sp.labels()[p], 0);
        assert_eq!(p, 6);

        let sp = SuperpixelMap::from_labels(2, 1, vec![0, 1]).unwrap();
        assert_eq!(sp.centroid_pixel(1).unwrap(), 1);
    }

    #[test]
    fn from_labels_rejects_gaps() {
        assert!(SuperpixelMap::from_labels(2, 1, vec![0, 2]).is_err());
        assert!(SuperpixelMap::from_labels(2, 1, vec![0]).is_err());
    }

    #[test]
    fn connectivity_pass_absorbs_fragments() {
        // Label 1 appears as two islands; the smaller joins its surroundings.
        #[rustfmt::skip]
        let mut labels = vec![
            0, 0, 0, 0,
            0, 1, 0, 1,
            0, 1, 0, 0,
        ];
        enforce_connectivity(&mut labels, 4, 3);
        assert_eq!(labels[7], 0);
        assert_eq!(labels[5], 1);
        assert_eq!(count_components(&labels, 4, 3), 2);
    }
}
