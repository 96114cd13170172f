//! Reference grid, block matching and overlapping-patch aggregation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{arg_err, Error, Result};
use crate::image::Image;
use crate::tensor::RTensor;

/// Top-left corners of the reference patches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub ps: usize,
    pub step: usize,
}

impl PatchGrid {
    /// Row-major list of `(row, col)` positions.
    pub fn positions(&self) -> Vec<(usize, usize)> {
        self.rows
            .iter()
            .flat_map(|&r| self.cols.iter().map(move |&c| (r, c)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len() * self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn axis_positions(dim: usize, ps: usize, step: usize) -> Vec<usize> {
    let last = dim - ps;
    let mut v: Vec<usize> = (0..=last).step_by(step).collect();
    if *v.last().expect("0 is always present") != last {
        v.push(last);
    }
    v
}

/// Positions `{0, step, 2 step, ...}` plus the last valid offset, per axis.
pub fn reference_grid(h: usize, w: usize, ps: usize, step: usize) -> Result<PatchGrid> {
    if ps == 0 || step == 0 {
        return arg_err("patch size and step must be positive");
    }
    if ps > h || ps > w {
        return arg_err(format!("patch size {ps} exceeds image size {h}x{w}"));
    }
    Ok(PatchGrid {
        rows: axis_positions(h, ps, step),
        cols: axis_positions(w, ps, step),
        ps,
        step,
    })
}

/// Distance used to rank candidate patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    /// Squared Frobenius distance over all channels.
    Full,
    /// Squared distance of the first (DC) Fourier slice along the channels.
    FirstSlice,
}

/// `K` similar patches stacked as a `ps x ps x C x K` array; patch 0 is the
/// reference.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGroup {
    ps: usize,
    channels: usize,
    coords: Vec<(usize, usize)>,
    /// How many trailing entries repeat the reference because the search
    /// window held fewer than `K` candidates.
    padded: usize,
    data: Vec<f64>,
}

impl PatchGroup {
    /// Copies the patches at `coords` out of `img`.
    pub fn extract(img: &Image, ps: usize, coords: Vec<(usize, usize)>, padded: usize) -> Result<Self> {
        let (h, w, c) = img.dims();
        if coords.is_empty() {
            return arg_err("a group needs at least one patch");
        }
        if let Some(&(r, col)) = coords.iter().find(|&&(r, col)| r + ps > h || col + ps > w) {
            return arg_err(format!("patch at ({r},{col}) exceeds image bounds {h}x{w}"));
        }
        let mut data = Vec::with_capacity(ps * ps * c * coords.len());
        for &(r, col) in &coords {
            for ch in 0..c {
                let plane = img.plane(ch);
                for b in 0..ps {
                    let start = r + h * (col + b);
                    data.extend_from_slice(&plane[start..start + ps]);
                }
            }
        }
        Ok(Self { ps, channels: c, coords, padded, data })
    }

    pub fn from_parts(ps: usize, channels: usize, coords: Vec<(usize, usize)>, data: Vec<f64>) -> Result<Self> {
        if data.len() != ps * ps * channels * coords.len() || coords.is_empty() {
            return arg_err("group data length does not match ps*ps*C*K");
        }
        Ok(Self { ps, channels, coords, padded: 0, data })
    }

    pub fn ps(&self) -> usize {
        self.ps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn size(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[(usize, usize)] {
        &self.coords
    }

    pub fn padded(&self) -> usize {
        self.padded
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn patch_len(&self) -> usize {
        self.ps * self.ps * self.channels
    }

    pub fn patch(&self, k: usize) -> &[f64] {
        let n = self.patch_len();
        &self.data[k * n..(k + 1) * n]
    }

    /// Same group with new sample values (e.g. after filtering).
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        if data.len() != self.data.len() {
            return arg_err("replacement data has the wrong length");
        }
        Ok(Self { data, ..self.clone() })
    }

    pub fn to_tensor(&self) -> RTensor {
        RTensor::from_vec(&[self.ps, self.ps, self.channels, self.size()], self.data.clone())
            .expect("group dims are positive")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    row: usize,
    col: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.row.cmp(&other.row))
            .then(self.col.cmp(&other.col))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Block matcher over one image; precomputes the first-slice plane when that
/// metric is selected.
#[derive(Debug)]
pub struct Matcher<'a> {
    img: &'a Image,
    ps: usize,
    search_radius: usize,
    group_size: usize,
    metric: DistanceMetric,
    first_slice: Vec<f64>,
}

impl<'a> Matcher<'a> {
    pub fn new(
        img: &'a Image,
        ps: usize,
        search_radius: usize,
        group_size: usize,
        metric: DistanceMetric,
    ) -> Result<Self> {
        if group_size == 0 {
            return arg_err("group size must be at least 1");
        }
        if ps == 0 || ps > img.height() || ps > img.width() {
            return arg_err(format!("patch size {ps} does not fit image {}x{}", img.height(), img.width()));
        }
        let first_slice = match metric {
            DistanceMetric::Full => Vec::new(),
            DistanceMetric::FirstSlice => first_slice_plane(img),
        };
        Ok(Self { img, ps, search_radius, group_size, metric, first_slice })
    }

    fn planes(&self) -> Vec<&[f64]> {
        match self.metric {
            DistanceMetric::Full => (0..self.img.channels()).map(|c| self.img.plane(c)).collect(),
            DistanceMetric::FirstSlice => vec![&self.first_slice],
        }
    }

    /// Squared distance between patches at `a` and `b`; stops early and
    /// returns a value above `limit` once the partial sum exceeds it.
    #[inline]
    fn distance(&self, planes: &[&[f64]], a: (usize, usize), b: (usize, usize), limit: f64) -> f64 {
        let h = self.img.height();
        let ps = self.ps;
        let mut acc = 0.0;
        for plane in planes {
            for col in 0..ps {
                let oa = a.0 + h * (a.1 + col);
                let ob = b.0 + h * (b.1 + col);
                let pa = &plane[oa..oa + ps];
                let pb = &plane[ob..ob + ps];
                for (x, y) in pa.iter().zip(pb) {
                    let d = x - y;
                    acc += d * d;
                }
                if acc > limit {
                    return acc;
                }
            }
        }
        acc
    }

    /// Coordinates of the `K` most similar patches to the one at `reference`
    /// (reference first) and the number of padding repeats.
    pub fn find(&self, reference: (usize, usize)) -> Result<(Vec<(usize, usize)>, usize)> {
        let (h, w) = (self.img.height(), self.img.width());
        let ps = self.ps;
        if reference.0 + ps > h || reference.1 + ps > w {
            return arg_err(format!("reference {reference:?} is outside the image"));
        }
        let sr = self.search_radius;
        let r_lo = reference.0.saturating_sub(sr);
        let r_hi = (reference.0 + sr).min(h - ps);
        let c_lo = reference.1.saturating_sub(sr);
        let c_hi = (reference.1 + sr).min(w - ps);

        let planes = self.planes();
        let keep = self.group_size - 1;
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(keep + 1);
        if keep > 0 {
            for row in r_lo..=r_hi {
                for col in c_lo..=c_hi {
                    if (row, col) == reference {
                        continue;
                    }
                    let limit = if heap.len() == keep { heap.peek().map_or(f64::INFINITY, |c| c.dist) } else { f64::INFINITY };
                    let dist = self.distance(&planes, reference, (row, col), limit);
                    if dist > limit {
                        continue;
                    }
                    let cand = Candidate { dist, row, col };
                    if heap.len() < keep {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
        }
        let mut coords = Vec::with_capacity(self.group_size);
        coords.push(reference);
        coords.extend(heap.into_sorted_vec().into_iter().map(|c| (c.row, c.col)));
        let padded = self.group_size - coords.len();
        coords.resize(self.group_size, reference);
        Ok((coords, padded))
    }

    pub fn match_block(&self, reference: (usize, usize)) -> Result<PatchGroup> {
        let (coords, padded) = self.find(reference)?;
        PatchGroup::extract(self.img, self.ps, coords, padded)
    }
}

/// The first slice of the unitary DFT along channels: `sum_c I_c / sqrt(C)`.
pub fn first_slice_plane(img: &Image) -> Vec<f64> {
    let n = img.height() * img.width();
    let scale = 1.0 / (img.channels() as f64).sqrt();
    let mut out = vec![0.0; n];
    for ch in 0..img.channels() {
        for (o, &v) in out.iter_mut().zip(img.plane(ch)) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

/// One-shot block matching; see [`Matcher`].
pub fn match_block(
    img: &Image,
    reference: (usize, usize),
    ps: usize,
    search_radius: usize,
    group_size: usize,
    metric: DistanceMetric,
) -> Result<PatchGroup> {
    Matcher::new(img, ps, search_radius, group_size, metric)?.match_block(reference)
}

/// Running weighted sums for overlapping write-back.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregator {
    height: usize,
    width: usize,
    channels: usize,
    numerator: Vec<f64>,
    /// Per pixel; identical for all channels of a pixel.
    weight: Vec<f64>,
}

impl Aggregator {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            numerator: vec![0.0; height * width * channels],
            weight: vec![0.0; height * width],
        }
    }

    pub fn for_image(img: &Image) -> Self {
        Self::new(img.height(), img.width(), img.channels())
    }

    /// Adds `w * patch` for every patch of `group` at its source position.
    pub fn accumulate(&mut self, group: &PatchGroup, w: f64) -> Result<()> {
        if group.channels() != self.channels {
            return arg_err("group channel count does not match the aggregator");
        }
        if !(w >= 0.0 && w.is_finite()) {
            return arg_err(format!("aggregation weight must be finite and non-negative, got {w}"));
        }
        let (h, ps) = (self.height, group.ps());
        let plane_len = self.height * self.width;
        for (k, &(r, c)) in group.coords().iter().enumerate() {
            if r + ps > self.height || c + ps > self.width {
                return arg_err(format!("patch ({r},{c}) outside aggregation buffer"));
            }
            let patch = group.patch(k);
            for b in 0..ps {
                let start = r + h * (c + b);
                for wv in &mut self.weight[start..start + ps] {
                    *wv += w;
                }
                for ch in 0..self.channels {
                    let src = &patch[ps * ps * ch + ps * b..][..ps];
                    let dst = &mut self.numerator[ch * plane_len + start..][..ps];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
        Ok(())
    }

    /// Adds another partition's sums into this one.
    pub fn merge(&mut self, other: &Aggregator) -> Result<()> {
        if (self.height, self.width, self.channels) != (other.height, other.width, other.channels) {
            return arg_err("cannot merge aggregators of different shapes");
        }
        for (a, b) in self.numerator.iter_mut().zip(&other.numerator) {
            *a += b;
        }
        for (a, b) in self.weight.iter_mut().zip(&other.weight) {
            *a += b;
        }
        Ok(())
    }

    pub fn weight_at(&self, row: usize, col: usize) -> f64 {
        self.weight[row + self.height * col]
    }

    /// Pixelwise `numerator / weight`.
    pub fn finalize(&self) -> Result<Image> {
        let plane_len = self.height * self.width;
        if let Some(i) = self.weight.iter().position(|&w| w <= 0.0) {
            return Err(Error::Invariant(format!(
                "pixel ({}, {}) received no patch during aggregation",
                i % self.height,
                i / self.height
            )));
        }
        let data = self
            .numerator
            .iter()
            .enumerate()
            .map(|(i, &n)| n / self.weight[i % plane_len])
            .collect();
        Image::from_vec(self.height, self.width, self.channels, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        let g = reference_grid(16, 16, 8, 4).unwrap();
        assert_eq!(g.rows, vec![0, 4, 8]);
        assert_eq!(g.len(), 9);
        let g = reference_grid(8, 8, 8, 4).unwrap();
        assert_eq!(g.positions(), vec![(0, 0)]);
        let g = reference_grid(9, 20, 8, 4).unwrap();
        assert_eq!(g.rows, vec![0, 1]);
        assert_eq!(g.cols, vec![0, 4, 8, 12]);
        assert!(reference_grid(7, 20, 8, 4).is_err());
        assert!(reference_grid(20, 20, 8, 0).is_err());
    }

    #[test]
    fn grid_leaves_gaps_when_step_exceeds_ps() {
        let g = reference_grid(30, 11, 4, 7).unwrap();
        assert_eq!(g.rows, vec![0, 7, 14, 21, 26]);
    }

    #[test]
    fn grid_covers_every_pixel() {
        for (h, w, ps, step) in [(9, 13, 8, 4), (17, 17, 5, 3), (30, 11, 4, 4), (8, 8, 8, 1), (20, 9, 2, 2), (23, 19, 7, 7)] {
            let g = reference_grid(h, w, ps, step).unwrap();
            let mut covered = vec![false; h * w];
            for (r, c) in g.positions() {
                for dc in 0..ps {
                    for dr in 0..ps {
                        covered[(r + dr) + h * (c + dc)] = true;
                    }
                }
            }
            assert!(covered.iter().all(|&x| x), "{h}x{w} ps={ps} step={step}");
        }
    }

    fn random_image(h: usize, w: usize, c: usize, seed: u64, gray: bool) -> Image {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 33) as f64 / (1u64 << 31) as f64 * 255.0
        };
        let base: Vec<f64> = (0..h * w * c).map(|_| next()).collect();
        Image::from_fn(h, w, c, |r, col, ch| base[r + h * (col + w * if gray { 0 } else { ch })]).unwrap()
    }

    #[test]
    fn reference_first_and_zero_distance() {
        let img = random_image(24, 24, 3, 1, false);
        let m = Matcher::new(&img, 8, 5, 10, DistanceMetric::Full).unwrap();
        let (coords, padded) = m.find((8, 4)).unwrap();
        assert_eq!(coords[0], (8, 4));
        assert_eq!(coords.len(), 10);
        assert_eq!(padded, 0);
        let mut uniq = coords.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 10);
    }

    #[test]
    fn constant_image_tie_break() {
        let img = Image::from_fn(20, 20, 3, |_, _, _| 7.0).unwrap();
        let m = Matcher::new(&img, 4, 3, 5, DistanceMetric::Full).unwrap();
        let (coords, _) = m.find((8, 8)).unwrap();
        assert_eq!(coords, vec![(8, 8), (5, 5), (5, 6), (5, 7), (5, 8)]);
    }

    #[test]
    fn full_and_first_slice_agree_on_gray() {
        for seed in 0..5 {
            let img = random_image(32, 32, 3, seed, true);
            let full = Matcher::new(&img, 8, 8, 16, DistanceMetric::Full).unwrap();
            let first = Matcher::new(&img, 8, 8, 16, DistanceMetric::FirstSlice).unwrap();
            for r in [(0, 0), (12, 20), (24, 24)] {
                assert_eq!(full.find(r).unwrap(), first.find(r).unwrap());
            }
        }
    }

    #[test]
    fn early_exit_matches_exhaustive() {
        let img = random_image(30, 30, 2, 9, false);
        let m = Matcher::new(&img, 6, 7, 12, DistanceMetric::Full).unwrap();
        let reference = (10, 13);
        let planes = m.planes();
        let mut all = vec![];
        for r in 3..=17 {
            for c in 6..=20 {
                if (r, c) != reference {
                    all.push(Candidate { dist: m.distance(&planes, reference, (r, c), f64::INFINITY), row: r, col: c });
                }
            }
        }
        all.sort();
        let expect: Vec<_> = std::iter::once(reference).chain(all.iter().take(11).map(|c| (c.row, c.col))).collect();
        assert_eq!(m.find(reference).unwrap().0, expect);
    }

    #[test]
    fn small_window_pads_with_reference() {
        let img = random_image(10, 10, 1, 3, false);
        let m = Matcher::new(&img, 8, 1, 10, DistanceMetric::Full).unwrap();
        let (coords, padded) = m.find((0, 0)).unwrap();
        assert_eq!(padded, 6);
        assert_eq!(&coords[4..], &[(0, 0); 6]);
        let g = m.match_block((0, 0)).unwrap();
        assert_eq!(g.padded(), 6);
        assert_eq!(g.patch(0), g.patch(9));
    }

    #[test]
    fn group_matches_image_patches() {
        let img = random_image(16, 16, 3, 5, false);
        let g = match_block(&img, (4, 4), 4, 4, 5, DistanceMetric::Full).unwrap();
        let t = g.to_tensor();
        for (k, &(r, c)) in g.coords().iter().enumerate() {
            for ch in 0..3 {
                for b in 0..4 {
                    for a in 0..4 {
                        assert_eq!(t.get(&[a, b, ch, k]), img.get(r + a, c + b, ch));
                    }
                }
            }
        }
    }

    #[test]
    fn aggregation_rules() {
        let img = Image::from_fn(4, 6, 1, |_, c, _| if c < 3 { 2.0 } else { 6.0 }).unwrap();
        let mut agg = Aggregator::for_image(&img);
        let a = PatchGroup::extract(&img, 4, vec![(0, 0)], 0).unwrap();
        agg.accumulate(&a, 1.0).unwrap();
        assert!(matches!(agg.finalize(), Err(Error::Invariant(_))));
        let b = PatchGroup::extract(&img, 4, vec![(0, 2)], 0).unwrap();
        agg.accumulate(&b, 1.0).unwrap();
        let c = PatchGroup::extract(&img, 4, vec![(0, 2)], 0).unwrap();
        agg.accumulate(&c, 1.0).unwrap();
        let out = agg.finalize().unwrap();
        // columns 2 and 3 are covered by the patch at (0,0) and twice by (0,2)
        assert_eq!(out.get(0, 0, 0), 2.0);
        assert_eq!(out.get(0, 2, 0), 2.0);
        assert!((out.get(0, 3, 0) - 6.0).abs() < 1e-15);
        assert_eq!(out.get(0, 5, 0), 6.0);

        // overlap of different values averages them
        let mut agg = Aggregator::new(1, 3, 1);
        let p = PatchGroup::from_parts(1, 1, vec![(0, 1)], vec![4.0]).unwrap();
        let q = PatchGroup::from_parts(1, 1, vec![(0, 1)], vec![10.0]).unwrap();
        agg.accumulate(&p, 1.0).unwrap();
        agg.accumulate(&q, 1.0).unwrap();
        let e = PatchGroup::from_parts(1, 1, vec![(0, 0), (0, 2)], vec![1.0, 1.0]).unwrap();
        agg.accumulate(&e, 1.0).unwrap();
        assert_eq!(agg.finalize().unwrap().as_slice(), &[1.0, 7.0, 1.0]);
    }

    #[test]
    fn weight_scale_invariance() {
        let img = random_image(12, 12, 2, 4, false);
        let grid = reference_grid(12, 12, 4, 3).unwrap();
        let mut a1 = Aggregator::for_image(&img);
        let mut a2 = Aggregator::for_image(&img);
        for (i, pos) in grid.positions().into_iter().enumerate() {
            let g = PatchGroup::extract(&img, 4, vec![pos], 0).unwrap();
            let w = 1.0 + (i % 3) as f64;
            a1.accumulate(&g, w).unwrap();
            a2.accumulate(&g, 2.0 * w).unwrap();
        }
        let o1 = a1.finalize().unwrap();
        let o2 = a2.finalize().unwrap();
        for ((x, y), z) in o1.as_slice().iter().zip(o2.as_slice()).zip(img.as_slice()) {
            assert!((x - y).abs() < 1e-12 && (x - z).abs() < 1e-12);
        }
    }
}
