//! Image files: the MSI1 cube container, 8-bit PNG rasters and directories
//! of per-band rasters.

use std::fs;
use std::path::{Path, PathBuf};

use mstsvd::Image;

use crate::error::{CliError, CliResult};

const MSI_MAGIC: &[u8; 4] = b"MSI1";
const MSI_HEADER: usize = 16;

/// Serializes `img` as MSI1: magic, `u32` H, W, C, then `f32` samples in
/// image order (row fastest), all little-endian.
pub fn encode_msi(img: &Image) -> CliResult<Vec<u8>> {
    let (h, w, c) = img.dims();
    let dim = |v: usize| u32::try_from(v).map_err(|_| CliError::Argument(format!("dimension {v} does not fit in u32")));
    let mut out = Vec::with_capacity(MSI_HEADER + 4 * img.len());
    out.extend_from_slice(MSI_MAGIC);
    for v in [h, w, c] {
        out.extend_from_slice(&dim(v)?.to_le_bytes());
    }
    for &v in img.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

fn format_err(offset: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("malformed MSI1 data at byte {offset}: {msg}"))
}

pub fn decode_msi(bytes: &[u8]) -> CliResult<Image> {
    if bytes.len() < 4 || &bytes[..4] != MSI_MAGIC {
        return Err(format_err(0, "missing \"MSI1\" magic"));
    }
    if bytes.len() < MSI_HEADER {
        return Err(format_err(bytes.len(), "truncated header"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let (h, w, c) = (word(4), word(8), word(12));
    for (at, v) in [(4, h), (8, w), (12, c)] {
        if v == 0 {
            return Err(format_err(at, "zero dimension"));
        }
    }
    let n = h.checked_mul(w).and_then(|v| v.checked_mul(c)).ok_or_else(|| format_err(4, "dimensions overflow"))?;
    let want = n.checked_mul(4).and_then(|v| v.checked_add(MSI_HEADER)).ok_or_else(|| format_err(4, "dimensions overflow"))?;
    if bytes.len() != want {
        return Err(format_err(
            bytes.len().min(want),
            format!("payload is {} bytes, expected {want} for {h}x{w}x{c}", bytes.len()),
        ));
    }
    let mut data = Vec::with_capacity(n);
    for (i, chunk) in bytes[MSI_HEADER..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(format_err(MSI_HEADER + 4 * i, "non-finite sample"));
        }
        data.push(f64::from(v));
    }
    Ok(Image::from_vec(h, w, c, data)?)
}

/// Clamp to `[0, 255]` and round half up.
pub fn to_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

fn read_raster(path: &Path) -> CliResult<Image> {
    let dynimg = image::open(path).map_err(|e| CliError::io(path.display(), e))?;
    let color = dynimg.color();
    if color.has_color() {
        let rgb = dynimg.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        Ok(Image::from_fn(h, w, 3, |r, c, ch| f64::from(rgb.get_pixel(c as u32, r as u32)[ch]))?)
    } else {
        let gray = dynimg.to_luma8();
        let (w, h) = (gray.width() as usize, gray.height() as usize);
        Ok(Image::from_fn(h, w, 1, |r, c, _| f64::from(gray.get_pixel(c as u32, r as u32)[0]))?)
    }
}

fn write_raster(path: &Path, img: &Image) -> CliResult<()> {
    let (h, w, c) = img.dims();
    let (wu, hu) = (w as u32, h as u32);
    let result = match c {
        1 => image::GrayImage::from_fn(wu, hu, |x, y| image::Luma([to_u8(img.get(y as usize, x as usize, 0))])).save(path),
        3 => image::RgbImage::from_fn(wu, hu, |x, y| {
            let (r, col) = (y as usize, x as usize);
            image::Rgb([to_u8(img.get(r, col, 0)), to_u8(img.get(r, col, 1)), to_u8(img.get(r, col, 2))])
        })
        .save(path),
        _ => {
            return Err(CliError::Argument(format!(
                "a raster holds 1 or 3 channels, got {c}; write .msi or a band directory instead"
            )))
        }
    };
    result.map_err(|e| CliError::io(path.display(), e))
}

fn band_index(name: &str) -> Option<usize> {
    let stem = name.strip_prefix("band_")?;
    let digits = stem.split('.').next()?;
    digits.parse().ok()
}

/// Reads `band_00.png`, `band_01.png`, ... in index order into one cube.
fn read_band_dir(dir: &Path) -> CliResult<Image> {
    let mut bands: Vec<(usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir.display(), e))? {
        let entry = entry.map_err(|e| CliError::io(dir.display(), e))?;
        if let Some(i) = entry.file_name().to_str().and_then(band_index) {
            bands.push((i, entry.path()));
        }
    }
    bands.sort();
    if bands.is_empty() {
        return Err(CliError::Io(format!("{}: no band_NN rasters found", dir.display())));
    }
    if let Some(gap) = bands.iter().enumerate().find(|(pos, (i, _))| pos != i) {
        return Err(CliError::Io(format!("{}: band {} missing", dir.display(), gap.0)));
    }
    let planes: Vec<Image> = bands.iter().map(|(_, p)| read_raster(p)).collect::<CliResult<_>>()?;
    let (h, w, _) = planes[0].dims();
    if let Some((i, p)) = planes.iter().enumerate().find(|(_, p)| p.dims() != (h, w, 1)) {
        return Err(CliError::Io(format!("band {i} is {:?}, expected {h}x{w} grayscale", p.dims())));
    }
    let mut data = Vec::with_capacity(h * w * planes.len());
    for p in &planes {
        data.extend_from_slice(p.as_slice());
    }
    Ok(Image::from_vec(h, w, planes.len(), data)?)
}

fn write_band_dir(dir: &Path, img: &Image) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    let (h, w, c) = img.dims();
    let digits = c.saturating_sub(1).to_string().len().max(2);
    for b in 0..c {
        let band = Image::from_vec(h, w, 1, img.plane(b).to_vec())?;
        write_raster(&dir.join(format!("band_{b:0digits$}.png")), &band)?;
    }
    Ok(())
}

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase)
}

/// Chooses the format by extension: `.msi` for MSI1, `.png` for rasters, and
/// a directory (existing, or a path without extension) for band rasters.
pub fn read_image(path: &Path) -> CliResult<Image> {
    if path.is_dir() {
        return read_band_dir(path);
    }
    match extension(path).as_deref() {
        Some("msi") => decode_msi(&fs::read(path).map_err(|e| CliError::io(path.display(), e))?),
        Some("png") => read_raster(path),
        _ => Err(CliError::Argument(format!("{}: unsupported image format (use .msi, .png or a band directory)", path.display()))),
    }
}

pub fn write_image(path: &Path, img: &Image) -> CliResult<()> {
    match extension(path).as_deref() {
        Some("msi") => fs::write(path, encode_msi(img)?).map_err(|e| CliError::io(path.display(), e)),
        Some("png") => write_raster(path, img),
        None => write_band_dir(path, img),
        Some(other) => Err(CliError::Argument(format!("{}: unsupported output format .{other}", path.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_rule() {
        assert_eq!(to_u8(254.5), 255);
        assert_eq!(to_u8(-3.0), 0);
        assert_eq!(to_u8(300.0), 255);
        assert_eq!(to_u8(10.49), 10);
        assert_eq!(to_u8(10.5), 11);
    }

    #[test]
    fn msi_layout() {
        let img = Image::from_vec(1, 2, 1, vec![1.5, -2.0]).unwrap();
        let b = encode_msi(&img).unwrap();
        assert_eq!(b.len(), 16 + 8);
        assert_eq!(&b[..4], b"MSI1");
        assert_eq!(&b[4..16], &[1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&b[16..20], &1.5f32.to_le_bytes());
        assert_eq!(decode_msi(&b).unwrap(), img);
    }

    #[test]
    fn msi_diagnostics() {
        let img = Image::from_vec(2, 2, 1, vec![0.0; 4]).unwrap();
        let good = encode_msi(&img).unwrap();
        let msg = |b: &[u8]| decode_msi(b).unwrap_err().to_string();
        assert!(msg(b"MSI2rest").contains("byte 0"));
        assert!(msg(&good[..10]).contains("byte 10"));
        let mut zero = good.clone();
        zero[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(msg(&zero).contains("byte 8"));
        assert!(msg(&good[..good.len() - 1]).contains("expected 32"));
        let mut nan = good.clone();
        nan[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(msg(&nan).contains("byte 20"));
        assert!(matches!(decode_msi(&nan), Err(CliError::Io(_))));
    }

    #[test]
    fn band_names() {
        assert_eq!(band_index("band_07.png"), Some(7));
        assert_eq!(band_index("band_30.png"), Some(30));
        assert_eq!(band_index("notes.txt"), None);
    }
}
