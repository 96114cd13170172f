//! Seeded synthetic test images: piecewise-constant scenes built from random
//! rectangles and discs.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::image::Image;

struct Rng(ChaCha8Rng);

impl Rng {
    fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }
}

enum Shape {
    Rect { r0: f64, c0: f64, r1: f64, c1: f64 },
    Disc { r: f64, c: f64, radius: f64 },
}

impl Shape {
    fn contains(&self, row: f64, col: f64) -> bool {
        match *self {
            Shape::Rect { r0, c0, r1, c1 } => row >= r0 && row < r1 && col >= c0 && col < c1,
            Shape::Disc { r, c, radius } => (row - r).powi(2) + (col - c).powi(2) < radius * radius,
        }
    }
}

/// Label of every pixel (column-major), `0` being the background. Later
/// shapes paint over earlier ones.
fn label_map(h: usize, w: usize, shapes: usize, rng: &mut Rng) -> Vec<usize> {
    let (hf, wf) = (h as f64, w as f64);
    let list: Vec<Shape> = (0..shapes)
        .map(|_| {
            if rng.uniform() < 0.5 {
                let (r0, c0) = (rng.range(-0.1, 0.8) * hf, rng.range(-0.1, 0.8) * wf);
                Shape::Rect { r0, c0, r1: r0 + rng.range(0.15, 0.5) * hf, c1: c0 + rng.range(0.15, 0.5) * wf }
            } else {
                Shape::Disc { r: rng.range(0.0, 1.0) * hf, c: rng.range(0.0, 1.0) * wf, radius: rng.range(0.08, 0.3) * hf.min(wf) }
            }
        })
        .collect();
    let mut labels = vec![0; h * w];
    for col in 0..w {
        for row in 0..h {
            let (y, x) = (row as f64 + 0.5, col as f64 + 0.5);
            if let Some(i) = list.iter().rposition(|s| s.contains(y, x)) {
                labels[row + h * col] = i + 1;
            }
        }
    }
    labels
}

/// `size x size x 3` piecewise-constant color scene with values in `[20, 235]`.
pub fn synthetic_color(size: usize, seed: u64) -> Result<Image> {
    let mut rng = Rng::new(seed);
    let shapes = 12;
    let labels = label_map(size, size, shapes, &mut rng);
    let colors: Vec<[f64; 3]> = (0..=shapes).map(|_| [rng.range(20.0, 235.0), rng.range(20.0, 235.0), rng.range(20.0, 235.0)]).collect();
    Image::from_fn(size, size, 3, |r, c, ch| colors[labels[r + size * c]][ch])
}

/// Smooth reflectance-like spectrum over `bands` samples.
fn spectrum(bands: usize, rng: &mut Rng) -> Vec<f64> {
    let base = rng.range(60.0, 170.0);
    let amp = rng.range(10.0, 50.0);
    let freq = rng.range(0.5, 2.0);
    let phase = rng.range(0.0, std::f64::consts::TAU);
    let slope = rng.range(-30.0, 30.0);
    (0..bands)
        .map(|b| {
            let t = if bands > 1 { b as f64 / (bands - 1) as f64 } else { 0.0 };
            (base + amp * (std::f64::consts::TAU * freq * t + phase).sin() + slope * (t - 0.5)).clamp(15.0, 240.0)
        })
        .collect()
}

/// `h x w x bands` cube: a handful of materials, each with a smooth spectrum,
/// laid out as a piecewise-constant scene.
pub fn synthetic_msi(h: usize, w: usize, bands: usize, seed: u64) -> Result<Image> {
    let mut rng = Rng::new(seed ^ 0x6d73_6931);
    let shapes = 10;
    let labels = label_map(h, w, shapes, &mut rng);
    let materials = 6;
    let spectra: Vec<Vec<f64>> = (0..materials).map(|_| spectrum(bands, &mut rng)).collect();
    let assign: Vec<usize> = (0..=shapes).map(|_| rng.below(materials)).collect();
    Image::from_fn(h, w, bands, |r, c, b| spectra[assign[labels[r + h * c]]][b])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_in_range() {
        let a = synthetic_color(64, 1).unwrap();
        assert_eq!(a, synthetic_color(64, 1).unwrap());
        assert_ne!(a, synthetic_color(64, 2).unwrap());
        assert!(a.as_slice().iter().all(|v| (20.0..=235.0).contains(v)));
        let m = synthetic_msi(32, 40, 31, 3).unwrap();
        assert_eq!(m.dims(), (32, 40, 31));
        assert!(m.as_slice().iter().all(|v| (15.0..=240.0).contains(v)));
    }

    #[test]
    fn scenes_are_not_flat() {
        let a = synthetic_color(128, 0).unwrap();
        let distinct = {
            let mut v: Vec<u64> = a.plane(0).iter().map(|x| x.to_bits()).collect();
            v.sort_unstable();
            v.dedup();
            v.len()
        };
        assert!(distinct >= 4, "{distinct}");
    }
}
