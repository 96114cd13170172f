//! On-disk cache of trained global bases, keyed by the training image and
//! the parameters that affect training.

use std::fs;
use std::path::{Path, PathBuf};

use mstsvd::pipeline::train_on_image;
use mstsvd::transforms::GlobalBasis;
use mstsvd::{FilterParams, Image};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn cache_key(training: &Image, params: &FilterParams) -> String {
    let mut h = Sha256::new();
    let (rows, cols, ch) = training.dims();
    for v in [rows, cols, ch, params.ps] {
        h.update((v as u64).to_le_bytes());
    }
    for v in training.as_slice() {
        h.update(v.to_le_bytes());
    }
    match params.training_patches {
        Some(m) => {
            h.update([1]);
            h.update((m as u64).to_le_bytes());
            h.update(params.seed.to_le_bytes());
        }
        None => h.update([0]),
    }
    let digest = h.finalize();
    digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

pub fn cache_path(dir: &Path, training: &Image, params: &FilterParams) -> PathBuf {
    dir.join(format!("{}-ps{}.gbas", cache_key(training, params), params.ps))
}

/// Returns the cached basis if present and readable, otherwise trains and
/// stores it. The flag tells whether the cache was hit.
pub fn load_or_train(dir: &Path, training: &Image, params: &FilterParams) -> CliResult<(GlobalBasis, bool)> {
    let path = cache_path(dir, training, params);
    if let Ok(bytes) = fs::read(&path) {
        match GlobalBasis::from_bytes(&bytes) {
            Ok(gb) if gb.ps() == params.ps && gb.n_channels() == training.channels() => return Ok((gb, true)),
            Ok(_) => eprintln!("warning: {} does not match the input, retraining", path.display()),
            Err(e) => eprintln!("warning: ignoring unreadable cache {}: {e}", path.display()),
        }
    }
    let gb = train_on_image(training, params)?;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    fs::write(&path, gb.to_bytes()).map_err(|e| CliError::io(path.display(), e))?;
    Ok((gb, false))
}
