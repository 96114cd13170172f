//! WebAssembly bindings for the browser demo. Images cross the boundary as
//! row-major RGBA bytes, the layout of a canvas `ImageData`; alpha is ignored
//! on input and set opaque on output.

use mstsvd::eval::{add_awgn, MetricBlock};
use mstsvd::synth::synthetic_color;
use mstsvd::{default_params, denoise, Image, ImageKind, Method};
use wasm_bindgen::prelude::*;

pub type DemoResult<T> = std::result::Result<T, String>;

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

pub fn rgba_to_image(rgba: &[u8], width: usize, height: usize) -> DemoResult<Image> {
    if rgba.len() != width * height * 4 {
        return Err(format!("expected {} bytes for {width}x{height} RGBA, got {}", width * height * 4, rgba.len()));
    }
    Image::from_fn(height, width, 3, |r, c, ch| rgba[(r * width + c) * 4 + ch] as f64).map_err(text)
}

pub fn image_to_rgba(img: &Image) -> Vec<u8> {
    let (h, w, _) = img.dims();
    let mut out = vec![255u8; h * w * 4];
    for r in 0..h {
        for c in 0..w {
            for ch in 0..3 {
                out[(r * w + c) * 4 + ch] = (img.get(r, c, ch) + 0.5).floor().clamp(0.0, 255.0) as u8;
            }
        }
    }
    out
}

pub fn scene(size: usize, seed: u64) -> DemoResult<Vec<u8>> {
    Ok(image_to_rgba(&synthetic_color(size, seed).map_err(text)?))
}

pub fn noisy(rgba: &[u8], width: usize, height: usize, sigma: f64, seed: u64) -> DemoResult<Vec<u8>> {
    let img = rgba_to_image(rgba, width, height)?;
    Ok(image_to_rgba(&add_awgn(&img, sigma, seed).map_err(text)?))
}

/// Returns the denoised RGBA buffer and the elapsed seconds.
pub fn denoised(rgba: &[u8], width: usize, height: usize, sigma: f64, method: &str) -> DemoResult<(Vec<u8>, f64)> {
    let m: Method = method.parse().map_err(text)?;
    if m == Method::Twist {
        return Err("twist needs a multispectral cube".into());
    }
    let img = rgba_to_image(rgba, width, height)?;
    let (out, rep) = denoise(&img, &default_params(m, ImageKind::Color, sigma)).map_err(text)?;
    Ok((image_to_rgba(&out), rep.seconds))
}

/// `[psnr, ssim, ergas, sam]` of `test` against `clean`.
pub fn quality(clean: &[u8], test: &[u8], width: usize, height: usize) -> DemoResult<[f64; 4]> {
    let a = rgba_to_image(clean, width, height)?;
    let b = rgba_to_image(test, width, height)?;
    let m = MetricBlock::compute(&a, &b).map_err(text)?;
    Ok([m.psnr, m.ssim, m.ergas, m.sam])
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen(js_name = syntheticScene)]
pub fn synthetic_scene(size: usize, seed: u32) -> Result<Vec<u8>, JsError> {
    scene(size, seed as u64).map_err(js)
}

#[wasm_bindgen(js_name = addNoise)]
pub fn add_noise(rgba: &[u8], width: usize, height: usize, sigma: f64, seed: u32) -> Result<Vec<u8>, JsError> {
    noisy(rgba, width, height, sigma, seed as u64).map_err(js)
}

/// Denoised pixels; the run time lands in `lastSeconds`.
#[wasm_bindgen(js_name = denoise)]
pub fn denoise_rgba(rgba: &[u8], width: usize, height: usize, sigma: f64, method: &str) -> Result<Vec<u8>, JsError> {
    let (out, secs) = denoised(rgba, width, height, sigma, method).map_err(js)?;
    LAST_SECONDS.with(|s| s.set(secs));
    Ok(out)
}

thread_local! {
    static LAST_SECONDS: std::cell::Cell<f64> = const { std::cell::Cell::new(0.0) };
}

#[wasm_bindgen(js_name = lastSeconds)]
pub fn last_seconds() -> f64 {
    LAST_SECONDS.with(|s| s.get())
}

#[wasm_bindgen]
pub fn metrics(clean: &[u8], test: &[u8], width: usize, height: usize) -> Result<Vec<f64>, JsError> {
    quality(clean, test, width, height).map(|m| m.to_vec()).map_err(js)
}
