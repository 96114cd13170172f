//! Randomized checks of the block circulant identities the filter relies on.
//!
//! Each oracle draws random instances from a seeded stream, computes a
//! relative error and compares it against a fixed tolerance. The explicit
//! block circulant matrices are built here on purpose: the filter itself only
//! ever works slice by slice in the Fourier domain.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::circulant::{bcirc, bcirc_tensor, bdiag, kron_identity};
use crate::dft::DftPair;
use crate::error::Result;
use crate::matrix::{CMatrix, Matrix, RMatrix};
use crate::patch::{DistanceMetric, PatchGroup};
use crate::scalar::Scalar;
use crate::tensor::{CTensor, RTensor};
use crate::transforms::{local_pca, train_global_basis, GlobalBasis, GroupBasis};

pub const TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub name: &'static str,
    pub instances: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

struct Draw(ChaCha8Rng);

impl Draw {
    fn uniform(&mut self) -> f64 {
        2.0 * ((self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64) - 1.0
    }

    fn between(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.0.next_u64() % (hi - lo + 1) as u64) as usize
    }

    fn tensor(&mut self, shape: &[usize]) -> RTensor {
        let n: usize = shape.iter().product();
        RTensor::from_vec(shape, (0..n).map(|_| self.uniform()).collect()).expect("positive shape")
    }
}

fn rel(err: f64, scale: f64) -> f64 {
    if scale == 0.0 { err } else { err / scale }
}

/// Largest entrywise deviation of `m` from block circulant structure.
fn circulant_defect<T: Scalar>(m: &Matrix<T>, nb: usize) -> f64 {
    let (br, bc) = (m.rows() / nb, m.cols() / nb);
    let mut worst = 0.0f64;
    for bi in 0..nb {
        for bj in 0..nb {
            let lead = (bi + nb - bj) % nb;
            for col in 0..bc {
                for row in 0..br {
                    let d = (m[(bi * br + row, bj * bc + col)] - m[(lead * br + row, col)]).abs();
                    worst = worst.max(d);
                }
            }
        }
    }
    worst
}

/// `bcirc(p) bcirc(p)^T` is block circulant.
pub fn circulant_gram_defect(p: &RTensor) -> Result<f64> {
    let b = bcirc(p)?;
    let m = b.matmul(&b.transpose())?;
    Ok(rel(circulant_defect(&m, p.shape()[2]), m.frobenius_norm()))
}

/// `||bcirc(p)||_F = sqrt(N) ||p||_F`, and the same for differences of patches.
pub fn norm_relation(a: &RTensor, b: &RTensor) -> Result<f64> {
    let n = a.shape()[2] as f64;
    let diff = RTensor::from_vec(a.shape(), a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x - y).collect())?;
    let lhs = bcirc(a)?.sub(&bcirc(b)?).frobenius_norm();
    let rhs = n.sqrt() * diff.frobenius_norm();
    let single = (bcirc(a)?.frobenius_norm() - n.sqrt() * a.frobenius_norm()).abs();
    Ok(rel((lhs - rhs).abs(), rhs).max(rel(single, n.sqrt() * a.frobenius_norm())))
}

/// The grouping-mode Gram of `bcirc_tensor(g)` is `N` times that of `g`.
pub fn gram_proportionality(group: &RTensor) -> Result<f64> {
    let n = group.shape()[2] as f64;
    let g4 = group.unfold(4)?;
    let gram = g4.matmul(&g4.transpose())?;
    let b3 = bcirc_tensor(group)?.unfold(3)?;
    let gram_b = b3.matmul(&b3.transpose())?;
    let scaled = RMatrix::from_fn(gram.rows(), gram.cols(), |r, c| n * gram[(r, c)]);
    Ok(rel(gram_b.sub(&scaled).frobenius_norm(), scaled.frobenius_norm()))
}

/// `(F (x) I) bcirc(p) (F (x) I)^H = bdiag(p x_3 W)`.
pub fn block_diagonalization(p: &RTensor) -> Result<f64> {
    let (r, c, n) = (p.shape()[0], p.shape()[1], p.shape()[2]);
    let f = DftPair::new(n)?;
    let transformed = kron_identity(f.unitary(), r)
        .matmul(&bcirc(&p.to_complex())?)?
        .matmul(&kron_identity(f.unitary(), c).adjoint())?;
    let expected = bdiag(&p.to_complex().mode_product(&f.unnormalized(), 3)?)?;
    Ok(rel(transformed.sub(&expected).frobenius_norm(), expected.frobenius_norm()))
}

fn frontal(t: &CTensor, j: usize, k: usize) -> CMatrix {
    let (r, c, n) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    let start = r * c * (j + n * k);
    CMatrix::from_col_major(r, c, t.as_slice()[start..start + r * c].to_vec()).expect("slice shape")
}

fn mix(blocks: &[CMatrix], u: &RMatrix) -> Vec<CMatrix> {
    let k = blocks.len();
    (0..k)
        .map(|out| {
            let mut acc = CMatrix::zeros(blocks[0].rows(), blocks[0].cols());
            for (i, b) in blocks.iter().enumerate() {
                let w = u[(i, out)];
                for (a, v) in acc.as_mut_slice().iter_mut().zip(b.as_slice()) {
                    *a += v * w;
                }
            }
            acc
        })
        .collect()
}

/// `(F (x) I)^H bdiag(U_0, .., U_{N-1}) (F (x) I)`.
fn induced_transform(fk: &CMatrix, n: usize, ps: usize, full: impl Fn(usize) -> CMatrix) -> Result<CMatrix> {
    let mut d = CMatrix::zeros(n * ps, n * ps);
    for j in 0..n {
        let u = full(j);
        for c in 0..ps {
            for r in 0..ps {
                d[(j * ps + r, j * ps + c)] = u[(r, c)];
            }
        }
    }
    fk.adjoint().matmul(&d)?.matmul(fk)
}

fn stacked_norm(blocks: &[CMatrix]) -> f64 {
    blocks.iter().map(|b| b.frobenius_norm().powi(2)).sum::<f64>().sqrt()
}

/// Core tensor norms through the f-diagonal (Fourier) path and through the
/// explicit block circulant path with the induced transforms.
///
/// The Fourier side uses the unnormalized `W` on the channel mode; the block
/// circulant side uses `T = (F (x) I)^H bdiag(U) (F (x) I)`.
pub fn core_norms(group: &RTensor, gb: &GlobalBasis, ub: &GroupBasis) -> Result<(f64, f64)> {
    let (ps, n, k) = (group.shape()[0], group.shape()[2], group.shape()[3]);
    let f = DftPair::new(n)?;
    let hat = group.to_complex().mode_product(&f.unnormalized(), 3)?;

    let mut fdiag = Vec::with_capacity(n * k);
    for j in 0..n {
        let (ur, uc) = (gb.u_row_full(j), gb.u_col_full(j));
        let blocks: Vec<CMatrix> = (0..k)
            .map(|kk| ur.adjoint().matmul(&frontal(&hat, j, kk))?.matmul(&uc))
            .collect::<Result<_>>()?;
        fdiag.extend(mix(&blocks, &ub.u_group));
    }

    let fk = kron_identity(f.unitary(), ps);
    let t_row = induced_transform(&fk, n, ps, |j| gb.u_row_full(j))?;
    let t_col = induced_transform(&fk, n, ps, |j| gb.u_col_full(j))?;
    let per = ps * ps * n;
    let blocks: Vec<CMatrix> = (0..k)
        .map(|kk| {
            let p = RTensor::from_vec(&[ps, ps, n], group.as_slice()[kk * per..(kk + 1) * per].to_vec())?;
            t_row.adjoint().matmul(&bcirc(&p.to_complex())?)?.matmul(&t_col)
        })
        .collect::<Result<_>>()?;
    let bcirc_core = mix(&blocks, &ub.u_group);
    Ok((stacked_norm(&fdiag), stacked_norm(&bcirc_core)))
}

pub fn core_norm_equality(group: &RTensor, gb: &GlobalBasis, ub: &GroupBasis) -> Result<f64> {
    let (a, b) = core_norms(group, gb, ub)?;
    Ok(rel((a - b).abs(), a.max(b)))
}

fn group_of(t: &RTensor) -> Result<PatchGroup> {
    let (ps, n, k) = (t.shape()[0], t.shape()[2], t.shape()[3]);
    PatchGroup::from_parts(ps, n, vec![(0, 0); k], t.as_slice().to_vec())
}

fn summarize(name: &'static str, errors: Vec<f64>) -> OracleReport {
    let max = errors.iter().copied().fold(0.0, f64::max);
    let passed = errors.iter().all(|e| e.is_finite() && *e <= TOLERANCE);
    OracleReport { name, instances: errors.len(), max_rel_error: max, tolerance: TOLERANCE, passed }
}

/// Runs every oracle on `instances` random draws.
pub fn run_oracles(instances: usize, seed: u64) -> Result<Vec<OracleReport>> {
    let mut d = Draw(ChaCha8Rng::seed_from_u64(seed));
    let mut t1 = Vec::new();
    let mut t2 = Vec::new();
    let mut t3 = Vec::new();
    let mut t4 = Vec::new();
    let mut e31 = Vec::new();
    for _ in 0..instances {
        let (r, c, n) = (d.between(1, 5), d.between(1, 5), d.between(2, 6));
        t1.push(circulant_gram_defect(&d.tensor(&[r, c, n]))?);
        t2.push(norm_relation(&d.tensor(&[r, c, 3]), &d.tensor(&[r, c, 3]))?);
        let k = d.between(2, 6);
        t3.push(gram_proportionality(&d.tensor(&[r, c, n, k]))?);
        t4.push(block_diagonalization(&d.tensor(&[r, c, n]))?);

        let (ps, n, k) = (d.between(2, 4), d.between(2, 5), d.between(2, 5));
        let training: Vec<RTensor> = (0..3 * ps).map(|_| d.tensor(&[ps, ps, n])).collect();
        let gb = train_global_basis(&training)?;
        let group = d.tensor(&[ps, ps, n, k]);
        let ub = local_pca(&group_of(&group)?, DistanceMetric::Full)?;
        e31.push(core_norm_equality(&group, &gb, &ub)?);
    }
    Ok(vec![
        summarize("circulant gram: bcirc(P) bcirc(P)^T is block circulant", t1),
        summarize("norm relation: ||bcirc(A)||_F = sqrt(3) ||A||_F", t2),
        summarize("gram proportionality: grouping Gram of bcirc(G) = N x Gram of G", t3),
        summarize("block diagonalization: (F x I) bcirc(P) (F x I)^H = bdiag(P x_3 W)", t4),
        summarize("core norm equality: ||C_fdiag||_F = ||C_bcirc||_F", e31),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_oracles_pass() {
        for r in run_oracles(100, 11).unwrap() {
            assert!(r.passed, "{} failed: {:e}", r.name, r.max_rel_error);
            assert_eq!(r.instances, 100);
        }
    }

    #[test]
    fn oracles_detect_violations() {
        let mut d = Draw(ChaCha8Rng::seed_from_u64(1));
        let p = d.tensor(&[2, 3, 4]);
        let mut m = bcirc(&p).unwrap();
        m[(0, 5)] += 1.0;
        assert!(circulant_defect(&m, 4) > 0.5);

        let group = d.tensor(&[3, 3, 3, 4]);
        let gb = GlobalBasis::identity(3, 3);
        let ub = GroupBasis { u_group: RMatrix::identity(4) };
        let (a, b) = core_norms(&group, &gb, &ub).unwrap();
        assert!((a - b).abs() < 1e-9 * a);
        assert!((a - 3f64.sqrt() * group.frobenius_norm()).abs() < 1e-9 * a);
        let bad = GroupBasis { u_group: RMatrix::from_fn(4, 4, |r, c| if r == c { 2.0 } else { 0.0 }) };
        let (a2, b2) = core_norms(&group, &gb, &bad).unwrap();
        assert!((a2 - 2.0 * a).abs() < 1e-9 * a && (b2 - 2.0 * b).abs() < 1e-9 * b);
    }

    #[test]
    fn induced_core_blocks_match_fourier_blocks() {
        let mut d = Draw(ChaCha8Rng::seed_from_u64(5));
        let (ps, n) = (3, 3);
        let training: Vec<RTensor> = (0..10).map(|_| d.tensor(&[ps, ps, n])).collect();
        let gb = train_global_basis(&training).unwrap();
        let p = d.tensor(&[ps, ps, n]);
        let f = DftPair::new(n).unwrap();
        let fk = kron_identity(f.unitary(), ps);
        let hat = p.to_complex().mode_product(&f.unnormalized(), 3).unwrap();
        let hat4 = CTensor::from_vec(&[ps, ps, n, 1], hat.as_slice().to_vec()).unwrap();
        let mut core = CMatrix::zeros(n * ps, n * ps);
        for j in 0..n {
            let b = gb.u_row_full(j).adjoint().matmul(&frontal(&hat4, j, 0)).unwrap().matmul(&gb.u_col_full(j)).unwrap();
            for c in 0..ps {
                for r in 0..ps {
                    core[(j * ps + r, j * ps + c)] = b[(r, c)];
                }
            }
        }
        let back = fk.adjoint().matmul(&core).unwrap().matmul(&fk).unwrap();
        let t_row = induced_transform(&fk, n, ps, |j| gb.u_row_full(j)).unwrap();
        let t_col = induced_transform(&fk, n, ps, |j| gb.u_col_full(j)).unwrap();
        assert!(t_row.unitarity_error() < 1e-10 && t_col.unitarity_error() < 1e-10);
        let direct = t_row.adjoint().matmul(&bcirc(&p.to_complex()).unwrap()).unwrap().matmul(&t_col).unwrap();
        assert!(direct.sub(&back).frobenius_norm() < 1e-9 * direct.frobenius_norm());
    }
}
