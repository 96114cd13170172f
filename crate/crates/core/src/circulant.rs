//! Block circulant and block diagonal constructions of patches and groups.
//!
//! These explicit forms are large (`N*ps` square) and are only used to check
//! the Fourier-domain path against; the filter never builds them.

use num_complex::Complex64;

use crate::dft::DftPair;
use crate::error::{arg_err, Error, Result};
use crate::matrix::{CMatrix, Matrix, RMatrix};
use crate::scalar::Scalar;
use crate::tensor::{CTensor, RTensor, Tensor};

fn check_order3<T: Scalar>(p: &Tensor<T>) -> Result<(usize, usize, usize)> {
    match *p.shape() {
        [r, c, n] => Ok((r, c, n)),
        _ => arg_err(format!("expected an order-3 patch, got shape {:?}", p.shape())),
    }
}

fn frontal<T: Scalar>(p: &Tensor<T>, k: usize) -> &[T] {
    let (r, c) = (p.shape()[0], p.shape()[1]);
    &p.as_slice()[k * r * c..(k + 1) * r * c]
}

/// Block circulant matrix of a `r x c x N` patch: block `(i, j)` holds frontal
/// slice `(i - j) mod N`.
pub fn bcirc<T: Scalar>(p: &Tensor<T>) -> Result<Matrix<T>> {
    let (r, c, n) = check_order3(p)?;
    let mut out = Matrix::zeros(n * r, n * c);
    for bi in 0..n {
        for bj in 0..n {
            let slice = frontal(p, (bi + n - bj) % n);
            for col in 0..c {
                for row in 0..r {
                    out[(bi * r + row, bj * c + col)] = slice[row + r * col];
                }
            }
        }
    }
    Ok(out)
}

/// Real-patch form of [`bcirc`].
pub fn bcirc_patch(p: &RTensor) -> Result<RMatrix> {
    bcirc(p)
}

/// Block diagonal matrix with the frontal slices of `p` on the diagonal.
pub fn bdiag<T: Scalar>(p: &Tensor<T>) -> Result<Matrix<T>> {
    let (r, c, n) = check_order3(p)?;
    let mut out = Matrix::zeros(n * r, n * c);
    for b in 0..n {
        let slice = frontal(p, b);
        for col in 0..c {
            for row in 0..r {
                out[(b * r + row, b * c + col)] = slice[row + r * col];
            }
        }
    }
    Ok(out)
}

/// Block circulant tensor of a group `r x c x N x K`: frontal slice `k` is
/// `bcirc` of patch `k`.
pub fn bcirc_tensor(group: &RTensor) -> Result<RTensor> {
    let (r, c, n, k) = match *group.shape() {
        [r, c, n, k] => (r, c, n, k),
        _ => return arg_err(format!("expected an order-4 group, got shape {:?}", group.shape())),
    };
    let per = r * c * n;
    let mut data = Vec::with_capacity(per * n * k);
    for i in 0..k {
        let patch = RTensor::from_vec(&[r, c, n], group.as_slice()[i * per..(i + 1) * per].to_vec())?;
        data.extend(bcirc(&patch)?.into_vec());
    }
    RTensor::from_vec(&[n * r, n * c, k], data)
}

/// Kronecker product `a (x) I_m`.
pub fn kron_identity(a: &CMatrix, m: usize) -> CMatrix {
    CMatrix::from_fn(a.rows() * m, a.cols() * m, |r, c| {
        if r % m == c % m {
            a[(r / m, c / m)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Whether an `nb x nb` block matrix has block `(i, j)` depending only on
/// `(i - j) mod nb`, within `tol` entrywise.
pub fn is_block_circulant<T: Scalar>(m: &Matrix<T>, nb: usize, tol: f64) -> bool {
    if nb == 0 || m.rows() % nb != 0 || m.cols() % nb != 0 {
        return false;
    }
    let (br, bc) = (m.rows() / nb, m.cols() / nb);
    for bi in 0..nb {
        for bj in 0..nb {
            let (ri, rj) = ((bi + nb - bj) % nb, 0);
            for col in 0..bc {
                for row in 0..br {
                    let a = m[(bi * br + row, bj * bc + col)];
                    let b = m[(ri * br + row, rj * bc + col)];
                    if (a - b).abs() > tol {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Block-diagonalizes `bcirc(p)` with `F (x) I` and checks the result against
/// the block diagonal arrangement of `p x_3 W` (`W` the unnormalized DFT).
///
/// Returns the transformed matrix. Fails with [`Error::Invariant`] if the
/// diagonal blocks disagree beyond `1e-9` relative or an off-diagonal block
/// exceeds `1e-9 * ||p||_F`.
pub fn bdiag_from_bcirc(p: &RTensor) -> Result<CMatrix> {
    let (r, c, n) = check_order3(p)?;
    let f = DftPair::new(n)?;
    let left = kron_identity(f.unitary(), r);
    let right = kron_identity(f.unitary(), c).adjoint();
    let transformed = left.matmul(&bcirc(&p.to_complex())?)?.matmul(&right)?;

    let hat: CTensor = p.to_complex().mode_product(&f.unnormalized(), 3)?;
    let expected = bdiag(&hat)?;
    let scale = p.frobenius_norm();
    let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
    for col in 0..n * c {
        for row in 0..n * r {
            let diff = (transformed[(row, col)] - expected[(row, col)]).norm();
            if diff > tol {
                let on_diag = row / r == col / c;
                return Err(Error::Invariant(format!(
                    "block diagonalization mismatch at ({row},{col}) in {} block: {diff:e}",
                    if on_diag { "diagonal" } else { "off-diagonal" }
                )));
            }
        }
    }
    Ok(transformed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(r: usize, c: usize, n: usize, seed: usize) -> RTensor {
        RTensor::from_fn(&[r, c, n], |i| {
            let h = (i[0] * 7919 + i[1] * 104729 + i[2] * 1299709 + seed * 15485863) % 1000;
            h as f64 / 100.0 - 5.0
        })
        .unwrap()
    }

    #[test]
    fn scalar_patch_is_circulant() {
        let p = RTensor::from_vec(&[1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let m = bcirc_patch(&p).unwrap();
        let expect = RMatrix::from_rows(&[vec![1.0, 3.0, 2.0], vec![2.0, 1.0, 3.0], vec![3.0, 2.0, 1.0]]);
        assert_eq!(m, expect);
    }

    #[test]
    fn bcirc_norm_is_sqrt_n_times_patch_norm() {
        for n in [3, 5] {
            let p = patch(4, 4, n, n);
            let lhs = bcirc_patch(&p).unwrap().frobenius_norm();
            assert!((lhs - (n as f64).sqrt() * p.frobenius_norm()).abs() < 1e-10 * lhs);
        }
    }

    #[test]
    fn gram_is_block_circulant() {
        let b = bcirc_patch(&patch(3, 3, 3, 1)).unwrap();
        let g = b.matmul(&b.transpose()).unwrap();
        assert!(is_block_circulant(&g, 3, 1e-9));
        // a non-circulant matrix is rejected
        let mut broken = g.clone();
        broken[(0, 4)] += 1.0;
        assert!(!is_block_circulant(&broken, 3, 1e-9));
    }

    #[test]
    fn block_diagonalization_small() {
        let p = patch(2, 2, 3, 4);
        bdiag_from_bcirc(&p).unwrap();
    }

    #[test]
    fn constant_patch_single_block() {
        let p = RTensor::from_fn(&[2, 2, 3], |i| (i[0] + 2 * i[1]) as f64 + 1.0).unwrap();
        let m = bdiag_from_bcirc(&p).unwrap();
        for col in 0..6 {
            for row in 0..6 {
                if row >= 2 || col >= 2 {
                    assert!(m[(row, col)].norm() < 1e-12);
                }
            }
        }
        assert!(m[(0, 0)].norm() > 0.5);
    }

    #[test]
    fn zero_patch() {
        let p = RTensor::zeros(&[2, 2, 3]).unwrap();
        assert!(bdiag_from_bcirc(&p).unwrap().frobenius_norm() == 0.0);
    }

    #[test]
    fn bcirc_tensor_slices() {
        let g = RTensor::from_fn(&[2, 2, 3, 4], |i| (i[0] + 3 * i[1] + 7 * i[2] + 19 * i[3]) as f64).unwrap();
        let b = bcirc_tensor(&g).unwrap();
        assert_eq!(b.shape(), &[6, 6, 4]);
        assert!(bcirc_tensor(&RTensor::zeros(&[2, 2, 3]).unwrap()).is_err());
    }
}
