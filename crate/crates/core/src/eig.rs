//! Eigendecomposition of small dense Hermitian / real symmetric matrices.
//!
//! [`hermitian_eig`] is a cyclic complex Jacobi solver and handles the
//! per-Fourier-slice Gram matrices of the global basis. [`symmetric_eig`] is a
//! Householder tridiagonalization followed by implicit QL, used for the
//! per-group PCA where it runs once for every reference patch.
//!
//! Both return eigenvalues in descending order and apply the same phase
//! convention: the largest-magnitude entry of each eigenvector is real and
//! positive.

use num_complex::Complex64;

use crate::error::{arg_err, Error, Result};
use crate::matrix::{CMatrix, Matrix, RMatrix};
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 100;
const MAX_QL_ITERS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Eigen<T> {
    /// Descending.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: Matrix<T>,
}

fn check_hermitian<T: Scalar>(g: &Matrix<T>) -> Result<()> {
    if g.rows() != g.cols() {
        return arg_err(format!("eigendecomposition needs a square matrix, got {}x{}", g.rows(), g.cols()));
    }
    let norm = g.frobenius_norm();
    let err = g.hermitian_error();
    if !norm.is_finite() || err > 1e-8 * norm {
        return arg_err(format!("matrix is not Hermitian (asymmetry {err:e}, norm {norm:e})"));
    }
    Ok(())
}

/// Reorders eigenpairs by descending eigenvalue (stable) and fixes phases.
fn finish<T: Scalar>(values: Vec<f64>, vectors: Matrix<T>) -> Eigen<T> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut out = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = vectors.column(src);
        let peak = col.iter().map(|v| v.abs()).fold(0.0, f64::max);
        // First entry within rounding of the peak, so near-ties resolve the
        // same way on every platform.
        let pivot = col.iter().position(|v| v.abs() >= peak * (1.0 - 1e-9)).unwrap_or(0);
        let p = col[pivot];
        let phase = if p.abs() > 0.0 { p.conj().scale(1.0 / p.abs()) } else { T::one() };
        for (d, &v) in out.column_mut(dst).iter_mut().zip(col) {
            *d = v * phase;
        }
        out[(pivot, dst)] = T::from_real(out[(pivot, dst)].abs());
    }
    Eigen {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: out,
    }
}

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
///
/// Iterates until the off-diagonal Frobenius norm drops below
/// `1e-12 * ||g||_F`.
pub fn hermitian_eig(g: &CMatrix) -> Result<Eigen<Complex64>> {
    check_hermitian(g)?;
    let n = g.rows();
    let mut a = CMatrix::from_fn(n, n, |r, c| (g[(r, c)] + g[(c, r)].conj()).scale(0.5));
    let mut v = CMatrix::identity(n);
    let norm = a.frobenius_norm();
    let tol = 1e-12 * norm;

    let off = |a: &CMatrix| {
        let mut s = 0.0;
        for c in 0..n {
            for r in 0..n {
                if r != c {
                    s += a[(r, c)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while norm > 0.0 && off(&a) > tol {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            return Err(Error::Invariant(format!("Jacobi did not converge in {MAX_SWEEPS} sweeps")));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= f64::MIN_POSITIVE || r < 1e-300 {
                    continue;
                }
                let phase = apq.scale(1.0 / r); // e^{i phi}
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let e_neg = phase.conj(); // e^{-i phi}
                // Column update: A <- A U, with
                // U(:,p) = c e_p - s e^{-i phi} e_q, U(:,q) = s e_p + c e^{-i phi} e_q.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)] * e_neg;
                    a[(k, p)] = akp.scale(c) - akq.scale(s);
                    a[(k, q)] = akp.scale(s) + akq.scale(c);
                }
                let e_pos = phase;
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)] * e_pos;
                    a[(p, k)] = apk.scale(c) - aqk.scale(s);
                    a[(q, k)] = apk.scale(s) + aqk.scale(c);
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)] * e_neg;
                    v[(k, p)] = vkp.scale(c) - vkq.scale(s);
                    v[(k, q)] = vkp.scale(s) + vkq.scale(c);
                }
            }
        }
    }
    let values = (0..n).map(|i| a[(i, i)].re).collect();
    Ok(finish(values, v))
}

/// Eigendecomposition of a real symmetric matrix (Householder reduction to
/// tridiagonal form, then implicit QL with shifts).
pub fn symmetric_eig(g: &RMatrix) -> Result<Eigen<f64>> {
    check_hermitian(g)?;
    let n = g.rows();
    if n == 0 {
        return Ok(Eigen { values: vec![], vectors: RMatrix::zeros(0, 0) });
    }
    // Column-major working copy, V[i][j] at v[i + j * n], so the inner
    // loops below run down contiguous columns.
    let mut v: Vec<f64> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx % n, idx / n);
            0.5 * (g[(i, j)] + g[(j, i)])
        })
        .collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    tridiagonal_ql(n, &mut v, &mut d, &mut e)?;
    let vectors = RMatrix::from_col_major(n, n, v)?;
    Ok(finish(d, vectors))
}

fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i + j * n;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                let col = &v[j * n..j * n + i];
                g = e[j] + col[j] * f;
                for ((&vk, &dk), ek) in col[j + 1..].iter().zip(&d[j + 1..i]).zip(&mut e[j + 1..i]) {
                    g += vk * dk;
                    *ek += vk * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for ((vk, &ek), &dk) in v[j * n + j..j * n + i].iter_mut().zip(&e[j..i]).zip(&d[j..i]) {
                    *vk -= f * ek + g * dk;
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    // Accumulate the transformations.
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            let (head, tail) = v.split_at_mut((i + 1) * n);
            let pivot = &tail[..=i];
            for j in 0..=i {
                let col = &mut head[j * n..j * n + i + 1];
                let g: f64 = pivot.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                for (vk, &dk) in col.iter_mut().zip(&d[..=i]) {
                    *vk -= g * dk;
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// `sqrt(a^2 + b^2)`, falling back to `hypot` when the squares leave the
/// normal range.
#[inline]
fn pythag(a: f64, b: f64) -> f64 {
    let s = a * a + b * b;
    if s.is_finite() && s >= f64::MIN_POSITIVE { s.sqrt() } else { a.hypot(b) }
}

fn tridiagonal_ql(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERS {
                    return Err(Error::Invariant("symmetric QL iteration did not converge".into()));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = pythag(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = pythag(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = v.split_at_mut((i + 1) * n);
                    for (a, b) in lo[i * n..].iter_mut().zip(&mut hi[..n]) {
                        let t = *b;
                        *b = s * *a + c * t;
                        *a = c * *a - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
