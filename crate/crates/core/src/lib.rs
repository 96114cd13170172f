//! Color and multispectral image denoising with block diagonal representation.
//!
//! The main method (MSt-SVD) trains one t-SVD patch basis per image in the
//! Fourier domain along the channel mode, learns a PCA transform along the
//! grouping mode for every group of similar patches, hard-thresholds the
//! resulting coefficients and writes the filtered patches back with
//! overlapping averaging. A 4D HOSVD baseline, noise simulation and the
//! PSNR/SSIM/ERGAS/SAM quality metrics are included.

pub mod circulant;
pub mod dft;
pub mod eig;
pub mod error;
pub mod eval;
pub mod filter;
pub mod image;
pub mod matrix;
pub mod patch;
pub mod pipeline;
pub mod scalar;
pub mod synth;
pub mod tensor;
pub mod theorems;
pub mod transforms;

pub use error::{Error, Result};
pub use image::Image;
pub use matrix::{CMatrix, Matrix, RMatrix};
pub use pipeline::{denoise, denoise_with_basis, default_params, DenoiseReport, ImageKind, Method};
pub use filter::{FilterParams, WeightMode};
pub use tensor::{CTensor, RTensor, Tensor};
