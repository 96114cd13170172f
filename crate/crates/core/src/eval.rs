//! Noise synthesis and quality metrics.
//!
//! Gaussian samples come from a ChaCha8 stream keyed by the seed. Entry `i`
//! (in image linearization order) consumes stream words `4i .. 4i+4`, which
//! are turned into one standard normal by Box–Muller. The value added to an
//! entry therefore depends only on `(seed, i)`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::image::Image;

const PEAK: f64 = 255.0;
const STRIPE_STREAM: u64 = 1;

fn unit_open(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn unit_closed_open(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(a: u64, b: u64) -> f64 {
    let r = (-2.0 * unit_open(a).ln()).sqrt();
    r * (std::f64::consts::TAU * unit_closed_open(b)).cos()
}

/// The standard normal sample assigned to entry `index` under `seed`.
pub fn gaussian_at(seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(u128::from(index) * 4);
    let a = rng.next_u64();
    let b = rng.next_u64();
    box_muller(a, b)
}

/// Standard normal field of length `n`, entry `i` equal to `gaussian_at(seed, i)`.
pub fn gaussian_field(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = rng.next_u64();
            let b = rng.next_u64();
            box_muller(a, b)
        })
        .collect()
}

pub fn add_awgn(img: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return arg_err(format!("sigma must be finite and non-negative, got {sigma}"));
    }
    let mut out = img.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let z = gaussian_field(seed, img.len());
    for (v, z) in out.as_mut_slice().iter_mut().zip(z) {
        *v += sigma * z;
    }
    Ok(out)
}

/// Noise level of band `b` out of `bands` when interpolating linearly from
/// `lo` to `hi`.
pub fn ramp_sigma(lo: f64, hi: f64, b: usize, bands: usize) -> f64 {
    if bands < 2 {
        return lo;
    }
    lo + (hi - lo) * b as f64 / (bands - 1) as f64
}

pub fn add_awgn_band_ramp(img: &Image, sigma_lo: f64, sigma_hi: f64, seed: u64) -> Result<Image> {
    let bands = img.channels();
    if bands < 2 {
        return arg_err("band ramp noise needs at least 2 bands");
    }
    if !(sigma_lo >= 0.0 && sigma_lo <= sigma_hi && sigma_hi.is_finite()) {
        return arg_err(format!("need 0 <= sigma_lo <= sigma_hi, got {sigma_lo}..{sigma_hi}"));
    }
    let mut out = img.clone();
    let z = gaussian_field(seed, img.len());
    let plane = img.height() * img.width();
    for b in 0..bands {
        let s = ramp_sigma(sigma_lo, sigma_hi, b, bands);
        let zs = &z[b * plane..(b + 1) * plane];
        for (v, z) in out.plane_mut(b).iter_mut().zip(zs) {
            *v += s * z;
        }
    }
    Ok(out)
}

/// Per-column offsets uniform in `[-amplitude, amplitude]`, one row per
/// listed band.
pub fn stripe_offsets(width: usize, bands: &[usize], amplitude: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STRIPE_STREAM);
    bands
        .iter()
        .map(|_| (0..width).map(|_| amplitude * (2.0 * unit_closed_open(rng.next_u64()) - 1.0)).collect())
        .collect()
}

/// Adds vertical stripes to the listed bands.
pub fn add_stripes(img: &Image, bands: &[usize], amplitude: f64, seed: u64) -> Result<Image> {
    if let Some(&b) = bands.iter().find(|&&b| b >= img.channels()) {
        return arg_err(format!("stripe band {b} out of range for {} bands", img.channels()));
    }
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return arg_err(format!("stripe amplitude must be finite and non-negative, got {amplitude}"));
    }
    let offsets = stripe_offsets(img.width(), bands, amplitude, seed);
    let h = img.height();
    let mut out = img.clone();
    for (&b, offs) in bands.iter().zip(&offsets) {
        let plane = out.plane_mut(b);
        for (col, &o) in offs.iter().enumerate() {
            for v in &mut plane[col * h..(col + 1) * h] {
                *v += o;
            }
        }
    }
    Ok(out)
}

fn check_shapes(a: &Image, b: &Image) -> Result<()> {
    if !a.same_shape(b) {
        return arg_err(format!("shape mismatch: {:?} vs {:?}", a.dims(), b.dims()));
    }
    Ok(())
}

pub fn mse(clean: &Image, test: &Image) -> Result<f64> {
    check_shapes(clean, test)?;
    let s: f64 = clean.as_slice().iter().zip(test.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(s / clean.len() as f64)
}

/// Mean squared error restricted to the listed bands.
pub fn band_mse(clean: &Image, test: &Image, bands: &[usize]) -> Result<f64> {
    check_shapes(clean, test)?;
    if bands.is_empty() || bands.iter().any(|&b| b >= clean.channels()) {
        return arg_err("band list empty or out of range");
    }
    let mut s = 0.0;
    for &b in bands {
        s += clean.plane(b).iter().zip(test.plane(b)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(s / (bands.len() * clean.height() * clean.width()) as f64)
}

/// Peak 255, global MSE. Identical inputs give `f64::INFINITY`.
pub fn psnr(clean: &Image, test: &Image) -> Result<f64> {
    let m = mse(clean, test)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / m).log10())
}

const SSIM_RADIUS: usize = 5;
const SSIM_STD: f64 = 1.5;

fn gaussian_kernel() -> [f64; 2 * SSIM_RADIUS + 1] {
    let mut k = [0.0; 2 * SSIM_RADIUS + 1];
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - SSIM_RADIUS as f64;
        *v = (-x * x / (2.0 * SSIM_STD * SSIM_STD)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable valid-mode filtering of an `h x w` column-major plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (vh, vw) = (h + 1 - n, w + 1 - n);
    let mut rows = vec![0.0; vh * w];
    for c in 0..w {
        let col = &plane[c * h..(c + 1) * h];
        for r in 0..vh {
            rows[r + vh * c] = k.iter().zip(&col[r..r + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; vh * vw];
    for c in 0..vw {
        for r in 0..vh {
            out[r + vh * c] = k.iter().enumerate().map(|(i, a)| a * rows[r + vh * (c + i)]).sum();
        }
    }
    out
}

fn ssim_plane(x: &[f64], y: &[f64], h: usize, w: usize) -> f64 {
    let k = gaussian_kernel();
    let c1 = (0.01 * PEAK).powi(2);
    let c2 = (0.03 * PEAK).powi(2);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mx = filter_valid(x, h, w, &k);
    let my = filter_valid(y, h, w, &k);
    let mxx = filter_valid(&xx, h, w, &k);
    let myy = filter_valid(&yy, h, w, &k);
    let mxy = filter_valid(&xy, h, w, &k);
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx[i], my[i]);
        let vx = mxx[i] - ux * ux;
        let vy = myy[i] - uy * uy;
        let cxy = mxy[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    total / mx.len() as f64
}

/// Mean SSIM over an 11x11 Gaussian window (std 1.5), valid positions only,
/// averaged over channels. Images need to be at least 11x11.
pub fn ssim(clean: &Image, test: &Image) -> Result<f64> {
    check_shapes(clean, test)?;
    let (h, w, c) = clean.dims();
    let n = 2 * SSIM_RADIUS + 1;
    if h < n || w < n {
        return arg_err(format!("SSIM needs at least {n}x{n} pixels, got {h}x{w}"));
    }
    let s: f64 = (0..c).map(|ch| ssim_plane(clean.plane(ch), test.plane(ch), h, w)).sum();
    Ok(s / c as f64)
}

/// Relative global error with resolution ratio 1, clean image as reference.
pub fn ergas(clean: &Image, test: &Image) -> Result<f64> {
    check_shapes(clean, test)?;
    let (h, w, bands) = clean.dims();
    let n = (h * w) as f64;
    let mut acc = 0.0;
    for b in 0..bands {
        let (p, q) = (clean.plane(b), test.plane(b));
        let mean = p.iter().sum::<f64>() / n;
        if mean == 0.0 {
            return arg_err(format!("ERGAS is undefined: band {b} of the reference has zero mean"));
        }
        let rmse2 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
        acc += rmse2 / (mean * mean);
    }
    Ok(100.0 * (acc / bands as f64).sqrt())
}

/// Mean spectral angle in radians. Pixels where either spectrum is the zero
/// vector are skipped.
///
/// The angle is taken as `2 atan2(|x/|x| - y/|y||, |x/|x| + y/|y||)`, which
/// stays accurate near zero where `acos` of the cosine does not.
pub fn sam(clean: &Image, test: &Image) -> Result<f64> {
    check_shapes(clean, test)?;
    let (h, w, bands) = clean.dims();
    let n = h * w;
    let (x, y) = (clean.as_slice(), test.as_slice());
    let mut total = 0.0;
    let mut count = 0usize;
    for p in 0..n {
        let (mut nx, mut ny) = (0.0, 0.0);
        for b in 0..bands {
            nx += x[p + n * b] * x[p + n * b];
            ny += y[p + n * b] * y[p + n * b];
        }
        if nx == 0.0 || ny == 0.0 {
            continue;
        }
        let (nx, ny) = (nx.sqrt(), ny.sqrt());
        let (mut diff, mut sum) = (0.0, 0.0);
        for b in 0..bands {
            let (a, c) = (x[p + n * b] / nx, y[p + n * b] / ny);
            diff += (a - c) * (a - c);
            sum += (a + c) * (a + c);
        }
        total += 2.0 * diff.sqrt().atan2(sum.sqrt());
        count += 1;
    }
    if count == 0 {
        return arg_err("SAM is undefined: every pixel has a zero spectrum");
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub psnr: f64,
    pub ssim: f64,
    pub ergas: f64,
    pub sam: f64,
}

impl MetricBlock {
    pub fn compute(clean: &Image, test: &Image) -> Result<Self> {
        Ok(Self { psnr: psnr(clean, test)?, ssim: ssim(clean, test)?, ergas: ergas(clean, test)?, sam: sam(clean, test)? })
    }
}

pub const CSV_HEADER: &str = "method,sigma,psnr,ssim,ergas,sam,seconds";

fn fmt_psnr(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

/// One CSV row in `CSV_HEADER` column order. Infinite PSNR prints as `inf`.
pub fn csv_row(method: &str, sigma: f64, m: &MetricBlock, seconds: f64) -> String {
    format!("{method},{sigma},{},{:.6},{:.6},{:.6},{seconds:.3}", fmt_psnr(m.psnr), m.ssim, m.ergas, m.sam)
}
