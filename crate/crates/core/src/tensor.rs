//! Dense tensors of order 1 to 4 with mode-1-fastest linearization.
//!
//! Entry `(i1, ..., iN)` (0-based) lives at offset `i1 + I1*(i2 + I2*(i3 + ...))`.
//! Modes are numbered from 1 in the public API, matching the usual
//! multilinear-algebra convention (`unfold(t, 1)` gives the mode-1 fibers as
//! columns).

use num_complex::Complex64;

use crate::error::{arg_err, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

pub type RTensor = Tensor<f64>;
pub type CTensor = Tensor<Complex64>;

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > MAX_ORDER {
        return arg_err(format!("tensor order must be 1..={MAX_ORDER}, got {}", shape.len()));
    }
    if shape.iter().any(|&d| d == 0) {
        return arg_err(format!("tensor extents must be positive, got {shape:?}"));
    }
    Ok(shape.iter().product())
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let n = check_shape(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
        })
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n = check_shape(shape)?;
        if data.len() != n {
            return arg_err(format!(
                "data length {} does not match shape {shape:?} ({n} elements)",
                data.len()
            ));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> T) -> Result<Self> {
        let n = check_shape(shape)?;
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for (i, &d) in idx.iter_mut().zip(shape) {
                *i += 1;
                if *i < d {
                    break;
                }
                *i = 0;
            }
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        for (&i, &d) in idx.iter().zip(&self.shape).rev() {
            debug_assert!(i < d);
            off = off * d + i;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: T) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    /// Extent of 1-based `mode`.
    pub fn extent(&self, mode: usize) -> Result<usize> {
        self.check_mode(mode)?;
        Ok(self.shape[mode - 1])
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode == 0 || mode > self.order() {
            return arg_err(format!(
                "mode {mode} out of range for order-{} tensor",
                self.order()
            ));
        }
        Ok(())
    }

    /// (stride of `mode`, extent of `mode`, product of extents above `mode`).
    fn mode_layout(&self, mode: usize) -> (usize, usize, usize) {
        let m = mode - 1;
        let inner: usize = self.shape[..m].iter().product();
        let outer: usize = self.shape[m + 1..].iter().product();
        (inner, self.shape[m], outer)
    }

    /// Mode-`mode` matricization: an `I_n x prod(I_k, k != n)` matrix whose
    /// column index enumerates the remaining indices with lower modes fastest.
    pub fn unfold(&self, mode: usize) -> Result<Matrix<T>> {
        self.check_mode(mode)?;
        let (inner, n, outer) = self.mode_layout(mode);
        let mut out = Matrix::zeros(n, inner * outer);
        for o in 0..outer {
            for k in 0..n {
                let src = &self.data[inner * (k + n * o)..][..inner];
                for (i, &v) in src.iter().enumerate() {
                    out[(k, i + inner * o)] = v;
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`Tensor::unfold`].
    pub fn fold(m: &Matrix<T>, mode: usize, shape: &[usize]) -> Result<Self> {
        let mut t = Self::zeros(shape)?;
        t.check_mode(mode)?;
        let (inner, n, outer) = t.mode_layout(mode);
        if m.rows() != n || m.cols() != inner * outer {
            return arg_err(format!(
                "cannot fold {}x{} matrix into shape {shape:?} along mode {mode}",
                m.rows(),
                m.cols()
            ));
        }
        for o in 0..outer {
            for k in 0..n {
                let dst = &mut t.data[inner * (k + n * o)..][..inner];
                for (i, d) in dst.iter_mut().enumerate() {
                    *d = m[(k, i + inner * o)];
                }
            }
        }
        Ok(t)
    }

    /// n-mode product `t x_n m`: every mode-n fiber is multiplied by `m`.
    pub fn mode_product(&self, m: &Matrix<T>, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        let (inner, n, outer) = self.mode_layout(mode);
        if m.cols() != n {
            return arg_err(format!(
                "mode-{mode} product: matrix has {} columns but extent is {n}",
                m.cols()
            ));
        }
        let r = m.rows();
        let mut shape = self.shape.clone();
        shape[mode - 1] = r;
        let mut out = Self::zeros(&shape)?;
        for o in 0..outer {
            for row in 0..r {
                let dst = &mut out.data[inner * (row + r * o)..][..inner];
                for k in 0..n {
                    let w = m[(row, k)];
                    if w == T::zero() {
                        continue;
                    }
                    let src = &self.data[inner * (k + n * o)..][..inner];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(&self.data)
    }

    /// Returns a tensor with the axes permuted so that new axis `i` is old
    /// axis `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let order = self.order();
        let mut seen = vec![false; order];
        if perm.len() != order || perm.iter().any(|&p| p >= order || std::mem::replace(&mut seen[p], true)) {
            return arg_err(format!("{perm:?} is not a permutation of 0..{order}"));
        }
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let mut src_idx = vec![0usize; order];
        Self::from_fn(&shape, |idx| {
            for (i, &p) in perm.iter().enumerate() {
                src_idx[p] = idx[i];
            }
            self.get(&src_idx)
        })
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl RTensor {
    pub fn to_complex(&self) -> CTensor {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

pub(crate) fn frobenius_norm<T: Scalar>(data: &[T]) -> f64 {
    data.iter().map(|v| v.abs_sqr()).sum::<f64>().sqrt()
}

/// Free-function form of [`Tensor::unfold`].
pub fn unfold<T: Scalar>(t: &Tensor<T>, mode: usize) -> Result<Matrix<T>> {
    t.unfold(mode)
}

/// Free-function form of [`Tensor::mode_product`].
pub fn mode_product<T: Scalar>(t: &Tensor<T>, m: &Matrix<T>, mode: usize) -> Result<Tensor<T>> {
    t.mode_product(m, mode)
}
