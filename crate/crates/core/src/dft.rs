//! Discrete Fourier transform along the third (channel) mode.
//!
//! The transform is applied by direct multiplication with the `N x N` DFT
//! matrix; `N` is the channel count and is small.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{arg_err, Result};
use crate::matrix::CMatrix;
use crate::tensor::{CTensor, RTensor};

/// Unitary DFT matrix `F[j,k] = exp(-2 pi i jk / n) / sqrt(n)` (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct DftPair {
    n: usize,
    unitary: CMatrix,
}

impl DftPair {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return arg_err("DFT size must be at least 1");
        }
        // Roots for residues above n/2 are the exact conjugates of the lower
        // ones, so rows j and n-j are exact elementwise conjugates.
        let scale = 1.0 / (n as f64).sqrt();
        let roots: Vec<Complex64> = (0..n)
            .map(|m| {
                let base = m.min(n - m);
                let z = if 2 * base == n {
                    Complex64::new(-scale, 0.0)
                } else if 4 * base == n {
                    Complex64::new(0.0, -scale)
                } else {
                    let angle = -2.0 * PI * base as f64 / n as f64;
                    Complex64::new(angle.cos(), angle.sin()).scale(scale)
                };
                if base == m { z } else { z.conj() }
            })
            .collect();
        let unitary = CMatrix::from_fn(n, n, |j, k| roots[(j * k) % n]);
        Ok(Self { n, unitary })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    /// The unnormalized FFT matrix `W = sqrt(n) F`.
    pub fn unnormalized(&self) -> CMatrix {
        let s = (self.n as f64).sqrt();
        CMatrix::from_fn(self.n, self.n, |j, k| self.unitary[(j, k)] * s)
    }

    #[inline]
    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        self.unitary[(j, k)]
    }
}

/// Convenience constructor mirroring [`DftPair::new`].
pub fn dft_pair(n: usize) -> Result<DftPair> {
    DftPair::new(n)
}

/// Number of Fourier slices that must be computed for real input of `n`
/// channels; the remaining ones are conjugates.
pub fn retained_slices(n: usize) -> usize {
    n / 2 + 1
}

/// How many spectral slices slice `j` stands for in the half spectrum (1 for
/// self-conjugate slices, 2 otherwise).
pub fn slice_multiplicity(j: usize, n: usize) -> usize {
    if j == 0 || 2 * j == n { 1 } else { 2 }
}

fn check_order(t_order: usize) -> Result<()> {
    if t_order < 3 {
        return arg_err(format!("mode-3 transform needs a tensor of order >= 3, got {t_order}"));
    }
    Ok(())
}

/// Unitary DFT along mode 3.
pub fn fft_mode3(t: &CTensor) -> Result<CTensor> {
    check_order(t.order())?;
    let f = DftPair::new(t.shape()[2])?;
    t.mode_product(f.unitary(), 3)
}

/// Real-input form of [`fft_mode3`].
pub fn fft_mode3_real(t: &RTensor) -> Result<CTensor> {
    fft_mode3(&t.to_complex())
}

/// Inverse of [`fft_mode3`].
pub fn ifft_mode3(t: &CTensor) -> Result<CTensor> {
    check_order(t.order())?;
    let f = DftPair::new(t.shape()[2])?;
    t.mode_product(&f.unitary().adjoint(), 3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;

    #[test]
    fn n3_matches_fft_matrix() {
        let w = DftPair::new(3).unwrap().unnormalized();
        let expect = [
            [(1.0, 0.0), (1.0, 0.0), (1.0, 0.0)],
            [(1.0, 0.0), (-0.5, -0.8660), (-0.5, 0.8660)],
            [(1.0, 0.0), (-0.5, 0.8660), (-0.5, -0.8660)],
        ];
        for (j, row) in expect.iter().enumerate() {
            for (k, &(re, im)) in row.iter().enumerate() {
                assert!((w[(j, k)].re - re).abs() < 5e-5, "{j},{k}");
                assert!((w[(j, k)].im - im).abs() < 5e-5, "{j},{k}");
            }
        }
    }

    #[test]
    fn n1_is_one() {
        let f = DftPair::new(1).unwrap();
        assert_eq!(f.unitary()[(0, 0)], Complex64::new(1.0, 0.0));
        assert!(DftPair::new(0).is_err());
    }

    #[test]
    fn unitary_and_symmetric() {
        for n in [2, 3, 4, 7, 31, 64] {
            let f = DftPair::new(n).unwrap();
            assert!(f.unitary().unitarity_error() < 1e-12, "n={n}");
            let c = 1.0 / (n as f64).sqrt();
            for k in 0..n {
                assert!((f.entry(0, k) - Complex64::new(c, 0.0)).norm() < 1e-15);
            }
            for j in 1..n {
                for k in 0..n {
                    assert_eq!(f.entry(j, k), f.entry(n - j, k).conj());
                }
            }
        }
    }

    #[test]
    fn constant_along_mode3_concentrates_in_slice0() {
        let t = RTensor::from_fn(&[4, 5, 6], |i| (i[0] * 3 + i[1]) as f64).unwrap();
        let ft = fft_mode3_real(&t).unwrap();
        for a in 0..4 {
            for b in 0..5 {
                for j in 1..6 {
                    assert!(ft.get(&[a, b, j]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn slice_conjugate_symmetry_exact() {
        let t = RTensor::from_fn(&[8, 8, 3], |i| ((i[0] * 13 + i[1] * 7 + i[2] * 29) % 17) as f64 * 0.37).unwrap();
        let ft = fft_mode3_real(&t).unwrap();
        let f = DftPair::new(3).unwrap();
        for a in 0..8 {
            for b in 0..8 {
                assert_eq!(ft.get(&[a, b, 2]), ft.get(&[a, b, 1]).conj());
                // direct matrix multiply
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..3 {
                    s += f.entry(1, k) * t.get(&[a, b, k]);
                }
                assert!((s - ft.get(&[a, b, 1])).norm() < 1e-12);
            }
        }
        assert!((ft.frobenius_norm() - t.frobenius_norm()).abs() < 1e-10 * t.frobenius_norm());
        let back = ifft_mode3(&ft).unwrap();
        for (x, y) in back.as_slice().iter().zip(t.as_slice()) {
            assert!((x.re() - y).abs() < 1e-10 && x.im().abs() < 1e-10);
        }
    }

    #[test]
    fn multiplicities() {
        assert_eq!(retained_slices(3), 2);
        assert_eq!(retained_slices(31), 16);
        assert_eq!(retained_slices(4), 3);
        assert_eq!(slice_multiplicity(0, 3), 1);
        assert_eq!(slice_multiplicity(1, 3), 2);
        assert_eq!(slice_multiplicity(2, 4), 1);
        let total: usize = (0..retained_slices(31)).map(|j| slice_multiplicity(j, 31)).sum();
        assert_eq!(total, 31);
        let total: usize = (0..retained_slices(64)).map(|j| slice_multiplicity(j, 64)).sum();
        assert_eq!(total, 64);
    }

    #[test]
    fn low_order_rejected() {
        let t = CTensor::zeros(&[2, 2]).unwrap();
        assert!(fft_mode3(&t).is_err());
        assert!(ifft_mode3(&t).is_err());
    }
}
