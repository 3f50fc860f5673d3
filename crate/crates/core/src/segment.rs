//! Gray-level mean-shift segmentation, user merge maps, and segment-level
//! voting over superpixel labels.

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::superpixel::{component_ids, densify, neighbors4, SuperpixelMap};

const MAX_SHIFT_ITERATIONS: usize = 100;
const SHIFT_EPSILON: f64 = 0.01;

/// Dense partition of a raster into segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    width: usize,
    height: usize,
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl Segmentation {
    /// Wraps a per-pixel segment id array; ids must be dense `0..S`.
    pub fn from_labels(width: usize, height: usize, labels: Vec<usize>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(Error::InvalidSegmentation(format!(
                "{} labels for a {width}x{height} raster",
                labels.len()
            )));
        }
        let count = labels.iter().max().map_or(0, |&m| m + 1);
        let mut sizes = vec![0; count];
        for &l in &labels {
            sizes[l] += 1;
        }
        if let Some(id) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidSegmentation(format!("segment {id} is empty")));
        }
        Ok(Segmentation {
            width,
            height,
            labels,
            sizes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of segments `S`.
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// True when every segment is one 4-connected region.
    pub fn is_connected(&self) -> bool {
        component_ids(&self.labels, self.width, self.height).1 == self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanShiftParams {
    /// Spatial radius in pixels.
    pub spatial_bandwidth: f64,
    /// Range radius in 0..255 gray levels.
    pub range_bandwidth: f64,
    /// Regions smaller than this many pixels are merged away.
    pub min_region: usize,
}

impl Default for MeanShiftParams {
    fn default() -> Self {
        MeanShiftParams {
            spatial_bandwidth: 2.0,
            range_bandwidth: 3.0,
            min_region: 20,
        }
    }
}

/// Mean-shift filtering in the joint (row, col, gray) domain with flat
/// kernels. Returns the gray level of the mode each pixel converges to, in
/// 0..255 units.
pub fn mean_shift_filter(gray: &Raster, spatial_bw: f64, range_bw: f64) -> Vec<f64> {
    let (w, h) = (gray.width(), gray.height());
    let img: Vec<f64> = gray.channel(0).iter().map(|v| v * 255.0).collect();
    let hs2 = spatial_bw * spatial_bw;
    let reach = spatial_bw.floor() as isize;
    let mut out = Vec::with_capacity(w * h);
    for p in 0..w * h {
        let (mut yr, mut yc, mut yi) = ((p / w) as f64, (p % w) as f64, img[p]);
        for _ in 0..MAX_SHIFT_ITERATIONS {
            let (cr, cc) = (yr.round() as isize, yc.round() as isize);
            let (mut sr, mut sc, mut si, mut n) = (0.0, 0.0, 0.0, 0usize);
            for r in (cr - reach - 1)..=(cr + reach + 1) {
                if r < 0 || r >= h as isize {
                    continue;
                }
                let dr = r as f64 - yr;
                for c in (cc - reach - 1)..=(cc + reach + 1) {
                    if c < 0 || c >= w as isize {
                        continue;
                    }
                    let dc = c as f64 - yc;
                    if dr * dr + dc * dc > hs2 {
                        continue;
                    }
                    let v = img[r as usize * w + c as usize];
                    if (v - yi).abs() > range_bw {
                        continue;
                    }
                    sr += r as f64;
                    sc += c as f64;
                    si += v;
                    n += 1;
                }
            }
            if n == 0 {
                break;
            }
            let (nr, nc, ni) = (sr / n as f64, sc / n as f64, si / n as f64);
            let shift = (nr - yr).powi(2) + (nc - yc).powi(2) + (ni - yi).powi(2);
            (yr, yc, yi) = (nr, nc, ni);
            if shift < SHIFT_EPSILON * SHIFT_EPSILON {
                break;
            }
        }
        out.push(yi);
    }
    out
}

/// Segments a gray raster: mean-shift filtering, grouping of 4-adjacent
/// pixels whose modes lie within the range bandwidth, then absorption of
/// regions smaller than `min_region` into their most similar neighbour.
pub fn meanshift_segment(gray: &Raster, params: &MeanShiftParams) -> Result<Segmentation> {
    if !gray.is_gray() {
        return Err(Error::InvalidRaster(
            "segmentation needs a single-channel raster".into(),
        ));
    }
    if !(params.spatial_bandwidth > 0.0 && params.range_bandwidth > 0.0) {
        return Err(Error::InvalidInput(
            "mean-shift bandwidths must be positive".into(),
        ));
    }
    let (w, h) = (gray.width(), gray.height());
    let modes = mean_shift_filter(gray, params.spatial_bandwidth, params.range_bandwidth);

    // Region growing over the filtered image.
    let mut labels = vec![usize::MAX; w * h];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if labels[start] != usize::MAX {
            continue;
        }
        labels[start] = count;
        stack.push(start);
        while let Some(p) = stack.pop() {
            for q in neighbors4(p, w, h) {
                if labels[q] == usize::MAX && (modes[q] - modes[p]).abs() < params.range_bandwidth {
                    labels[q] = count;
                    stack.push(q);
                }
            }
        }
        count += 1;
    }

    merge_small_regions(&mut labels, count, &modes, w, h, params.min_region);
    Segmentation::from_labels(w, h, densify(&labels))
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Repeatedly merges every region below `min_region` pixels into the
/// adjacent region with the closest mean mode value (ties: lower id).
fn merge_small_regions(
    labels: &mut [usize],
    count: usize,
    modes: &[f64],
    w: usize,
    h: usize,
    min_region: usize,
) {
    let mut parent: Vec<usize> = (0..count).collect();
    let mut size = vec![0usize; count];
    let mut sum = vec![0.0; count];
    for (p, &l) in labels.iter().enumerate() {
        size[l] += 1;
        sum[l] += modes[p];
    }
    loop {
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); count];
        for p in 0..w * h {
            let a = find(&mut parent, labels[p]);
            for q in [p + 1, p + w] {
                let valid = if q == p + 1 {
                    (p % w) + 1 < w
                } else {
                    q < w * h
                };
                if !valid {
                    continue;
                }
                let b = find(&mut parent, labels[q]);
                if a != b {
                    adjacency[a].push(b);
                    adjacency[b].push(a);
                }
            }
        }
        let mut merged_any = false;
        for r in 0..count {
            if find(&mut parent, r) != r || size[r] >= min_region {
                continue;
            }
            let mean = sum[r] / size[r] as f64;
            let mut best: Option<(f64, usize)> = None;
            let mut nb: Vec<usize> = adjacency[r].iter().map(|&b| find(&mut parent, b)).collect();
            nb.sort_unstable();
            nb.dedup();
            for b in nb {
                if b == r {
                    continue;
                }
                let d = (sum[b] / size[b] as f64 - mean).abs();
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, b));
                }
            }
            if let Some((_, b)) = best {
                let (keep, gone) = if b < r { (b, r) } else { (r, b) };
                parent[gone] = keep;
                size[keep] += size[gone];
                sum[keep] += sum[gone];
                merged_any = true;
            }
        }
        if !merged_any {
            break;
        }
    }
    for l in labels.iter_mut() {
        *l = find(&mut parent, *l);
    }
}

/// Joins the listed segment pairs (transitively). Each merged segment takes
/// the rank of its smallest original id, so an empty list is the identity.
/// Pairs need not be adjacent; merging distant segments yields a segment
/// that is not 4-connected.
pub fn apply_merge_map(seg: &Segmentation, merges: &[(usize, usize)]) -> Result<Segmentation> {
    let count = seg.len();
    let mut parent: Vec<usize> = (0..count).collect();
    for &(a, b) in merges {
        if a >= count || b >= count {
            return Err(Error::InvalidMerge { a, b, count });
        }
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            let (keep, gone) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[gone] = keep;
        }
    }
    let mut new_id = vec![usize::MAX; count];
    let mut next = 0;
    for id in 0..count {
        let root = find(&mut parent, id);
        if new_id[root] == usize::MAX {
            new_id[root] = next;
            next += 1;
        }
        new_id[id] = new_id[root];
    }
    let labels = seg.labels.iter().map(|&l| new_id[l]).collect();
    Segmentation::from_labels(seg.width, seg.height, labels)
}

/// Parses a merge map: one `<segment_id> <segment_id>` pair per line; blank
/// lines and `#` comments are ignored.
pub fn parse_merge_map(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: String| Error::MergeMapSyntax {
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(syntax(format!(
                "expected two segment ids, found {}",
                fields.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| syntax(format!("'{s}' is not a segment id")))
        };
        out.push((parse(fields[0])?, parse(fields[1])?));
    }
    Ok(out)
}

/// Segment holding the majority of each superpixel's pixels (ties: lower id).
pub fn superpixel_segments(sp: &SuperpixelMap, seg: &Segmentation) -> Vec<usize> {
    let mut counts: Vec<(usize, usize)> = Vec::new();
    (0..sp.len())
        .map(|i| {
            counts.clear();
            for &p in sp.members(i) {
                let s = seg.labels[p];
                match counts.iter_mut().find(|(id, _)| *id == s) {
                    Some(e) => e.1 += 1,
                    None => counts.push((s, 1)),
                }
            }
            counts
                .iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|&(s, _)| s)
                .expect("superpixels are non-empty")
        })
        .collect()
}

/// Within every segment that hosts at least three superpixels, overwrite all
/// member labels with the plurality label. Segments with a tied plurality, or
/// fewer than three superpixels, keep their labels.
pub fn vote_refine(labels: &[usize], sp: &SuperpixelMap, seg: &Segmentation) -> Result<Vec<usize>> {
    if labels.len() != sp.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} superpixels",
            labels.len(),
            sp.len()
        )));
    }
    if sp.width() != seg.width || sp.height() != seg.height {
        return Err(Error::ShapeMismatch {
            expected: (sp.width(), sp.height()),
            actual: (seg.width, seg.height),
        });
    }
    let owner = superpixel_segments(sp, seg);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); seg.len()];
    for (i, &s) in owner.iter().enumerate() {
        groups[s].push(i);
    }
    let mut out = labels.to_vec();
    let mut tally: Vec<(usize, usize)> = Vec::new();
    for group in groups.iter().filter(|g| g.len() >= 3) {
        tally.clear();
        for &i in group {
            match tally.iter_mut().find(|(l, _)| *l == labels[i]) {
                Some(e) => e.1 += 1,
                None => tally.push((labels[i], 1)),
            }
        }
        let top = tally.iter().map(|t| t.1).max().unwrap_or(0);
        let mut winners = tally.iter().filter(|t| t.1 == top);
        let (winner, _) = *winners.next().expect("group is non-empty");
        if winners.next().is_some() {
            continue;
        }
        for &i in group {
            out[i] = winner;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halves(w: usize, h: usize, a: f64, b: f64) -> Raster {
        Raster::from_fn_gray(w, h, |_, c| if c < w / 2 { a } else { b }).unwrap()
    }

    #[test]
    fn uniform_raster_is_one_segment() {
        let img = Raster::filled_gray(16, 12, 0.5).unwrap();
        let seg = meanshift_segment(&img, &MeanShiftParams::default()).unwrap();
        assert_eq!(seg.len(), 1);
    }

    #[test]
    fn two_tones_far_apart_are_two_segments() {
        let img = halves(20, 20, 50.0 / 255.0, 150.0 / 255.0);
        let seg = meanshift_segment(&img, &MeanShiftParams::default()).unwrap();
        assert_eq!(seg.len(), 2);
        assert!(seg.is_connected());
        // Brute-force: every pixel converges onto its own tone.
        let modes = mean_shift_filter(&img, 2.0, 3.0);
        for (p, m) in modes.iter().enumerate() {
            let tone = if p % 20 < 10 { 50.0 } else { 150.0 };
            assert!((m - tone).abs() < 1e-9);
        }
    }

    #[test]
    fn speckle_is_absorbed() {
        let clean = halves(24, 24, 0.2, 0.7);
        let mut noisy = clean.clone();
        for p in [5 * 24 + 4, 5 * 24 + 5, 6 * 24 + 4] {
            noisy.channel_mut(0)[p] = 0.95;
        }
        let params = MeanShiftParams::default();
        let a = meanshift_segment(&clean, &params).unwrap();
        let b = meanshift_segment(&noisy, &params).unwrap();
        assert_eq!(a.len(), b.len());
        assert_eq!(b.labels()[5 * 24 + 4], b.labels()[0]);
    }

    #[test]
    fn merge_map_behaviour() {
        let seg = Segmentation::from_labels(3, 1, vec![0, 1, 2]).unwrap();
        assert_eq!(apply_merge_map(&seg, &[]).unwrap(), seg);
        let two = Segmentation::from_labels(2, 1, vec![0, 1]).unwrap();
        assert_eq!(apply_merge_map(&two, &[(0, 1)]).unwrap().len(), 1);
        let one = apply_merge_map(&seg, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(one.labels(), &[0, 0, 0]);
        let partial = apply_merge_map(&seg, &[(2, 1)]).unwrap();
        assert_eq!(partial.labels(), &[0, 1, 1]);
        assert!(matches!(
            apply_merge_map(&seg, &[(0, 7)]),
            Err(Error::InvalidMerge {
                a: 0,
                b: 7,
                count: 3
            })
        ));
    }

    #[test]
    fn merge_map_parsing() {
        let m = parse_merge_map("# header\n0 1\n\n  3   2 # trailing\n").unwrap();
        assert_eq!(m, vec![(0, 1), (3, 2)]);
        assert!(matches!(
            parse_merge_map("0 1\n4\n"),
            Err(Error::MergeMapSyntax { line: 2, .. })
        ));
        assert!(parse_merge_map("a b").is_err());
    }

    /// Four 1x2 superpixels side by side inside one segment (or split as given).
    fn strip(seg_labels: Vec<usize>) -> (SuperpixelMap, Segmentation) {
        let sp = SuperpixelMap::from_labels(8, 1, vec![0, 0, 1, 1, 2, 2, 3, 3]).unwrap();
        let seg = Segmentation::from_labels(8, 1, seg_labels).unwrap();
        (sp, seg)
    }

    #[test]
    fn voting_rules() {
        let sp = SuperpixelMap::from_labels(6, 1, vec![0, 0, 1, 1, 2, 2]).unwrap();
        let seg = Segmentation::from_labels(6, 1, vec![0; 6]).unwrap();
        assert_eq!(vote_refine(&[1, 1, 2], &sp, &seg).unwrap(), vec![1, 1, 1]);

        let sp2 = SuperpixelMap::from_labels(4, 1, vec![0, 0, 1, 1]).unwrap();
        let seg2 = Segmentation::from_labels(4, 1, vec![0; 4]).unwrap();
        assert_eq!(vote_refine(&[1, 2], &sp2, &seg2).unwrap(), vec![1, 2]);

        let (sp4, seg4) = strip(vec![0; 8]);
        assert_eq!(
            vote_refine(&[1, 1, 2, 2], &sp4, &seg4).unwrap(),
            vec![1, 1, 2, 2]
        );
        assert!(vote_refine(&[1, 1], &sp4, &seg4).is_err());
    }

    #[test]
    fn superpixels_follow_their_majority_segment() {
        // Superpixel 1 straddles: one pixel in segment 0, one in segment 1.
        // Tie goes to the lower segment id.
        let (sp, seg) = strip(vec![0, 0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(superpixel_segments(&sp, &seg), vec![0, 0, 1, 1]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn instance() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<usize>)> {
            // 12x1 strip: superpixels are consecutive pairs, segments are
            // consecutive runs given by break points.
            (
                prop::collection::vec(0usize..4, 6),
                prop::collection::vec(any::<bool>(), 11),
            )
                .prop_map(|(labels, breaks)| {
                    let sp: Vec<usize> = (0..12).map(|p| p / 2).collect();
                    let mut seg = vec![0usize; 12];
                    for p in 1..12 {
                        seg[p] = seg[p - 1] + usize::from(breaks[p - 1]);
                    }
                    (labels, sp, seg)
                })
        }

        proptest! {
            #[test]
            fn idempotent_and_conservative((labels, sp, seg) in instance()) {
                let sp = SuperpixelMap::from_labels(12, 1, sp).unwrap();
                let seg = Segmentation::from_labels(12, 1, seg).unwrap();
                let once = vote_refine(&labels, &sp, &seg).unwrap();
                let twice = vote_refine(&once, &sp, &seg).unwrap();
                prop_assert_eq!(&once, &twice);
                let owner = superpixel_segments(&sp, &seg);
                for (i, &l) in once.iter().enumerate() {
                    let members: Vec<usize> = (0..6).filter(|&j| owner[j] == owner[i]).collect();
                    prop_assert!(members.iter().any(|&j| labels[j] == l));
                    if members.len() < 3 {
                        prop_assert_eq!(l, labels[i]);
                    }
                }
            }
        }
    }
}
