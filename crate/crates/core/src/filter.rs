//! Transform-domain collaborative filtering: forward transform of a group
//! into coefficients, hard thresholding and the inverse transform.
//!
//! Coefficients are computed per Fourier slice along the channel mode:
//! `C_j = U_row(j)^H * G_j * U_col(j)` for every patch, followed by the real
//! grouping transform `U_group^T` along the patch index. Only the first
//! `floor(N/2) + 1` slices are stored; the others are their conjugates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft::{retained_slices, slice_multiplicity, DftPair};
use crate::error::{arg_err, Error, Result};
use crate::matrix::{CMatrix, RMatrix};
use crate::patch::PatchGroup;
use crate::pipeline::Method;
use crate::scalar::Scalar;
use crate::tensor::{CTensor, RTensor};
use crate::transforms::{GlobalBasis, GroupBasis, HosvdBasis};

/// How filtered patches are weighted during aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    #[default]
    Uniform,
    /// `1 / (1 + n_retained)` per group.
    Sparsity,
}

impl WeightMode {
    pub fn weight(self, n_retained: usize) -> f64 {
        match self {
            WeightMode::Uniform => 1.0,
            WeightMode::Sparsity => 1.0 / (1.0 + n_retained as f64),
        }
    }
}

/// Parameters of one denoising run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    /// Patch side in pixels.
    pub ps: usize,
    /// Patches per group, reference included.
    pub group_size: usize,
    /// Search radius around the reference (pixels).
    pub search_radius: usize,
    /// Reference grid stride (pixels).
    pub step: usize,
    pub sigma: f64,
    pub gamma: f64,
    /// Replaces the universal threshold when set.
    pub tau_override: Option<f64>,
    pub method: Method,
    pub weight_mode: WeightMode,
    /// Train the global basis on at most this many reference patches, drawn
    /// with `seed`. `None` uses all of them.
    pub training_patches: Option<usize>,
    pub seed: u64,
    /// Worker count; 1 runs on the calling thread.
    pub threads: usize,
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if self.ps == 0 || self.group_size == 0 || self.step == 0 || self.threads == 0 {
            return arg_err("ps, group size, step and threads must be positive");
        }
        if self.step > self.ps {
            return arg_err(format!("step {} exceeds the patch size {}; pixels would be left uncovered", self.step, self.ps));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return arg_err(format!("sigma must be finite and non-negative, got {}", self.sigma));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return arg_err(format!("gamma must be finite and non-negative, got {}", self.gamma));
        }
        if let Some(t) = self.tau_override {
            if !(t >= 0.0 && t.is_finite()) {
                return arg_err(format!("tau must be finite and non-negative, got {t}"));
            }
        }
        if self.training_patches == Some(0) {
            return arg_err("training patch budget must be positive");
        }
        Ok(())
    }

    /// Elements of one group (`ps * ps * C * K`).
    pub fn n_elem(&self, channels: usize) -> usize {
        self.ps * self.ps * channels * self.group_size
    }

    /// Hard threshold for images with `channels` channels.
    pub fn tau(&self, channels: usize) -> f64 {
        self.tau_override
            .unwrap_or_else(|| compute_tau(self.sigma, self.gamma, self.n_elem(channels)))
    }
}

/// Universal threshold `gamma * sigma * sqrt(2 ln n_elem)`.
pub fn compute_tau(sigma: f64, gamma: f64, n_elem: usize) -> f64 {
    gamma * sigma * (2.0 * (n_elem.max(1) as f64).ln()).sqrt()
}

/// Coefficients of one group: `ps x ps x S x K` complex, `S` the retained
/// Fourier slices.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTensor {
    ps: usize,
    n_channels: usize,
    k: usize,
    data: Vec<Complex64>,
    n_retained: usize,
}

impl CoefficientTensor {
    pub fn ps(&self) -> usize {
        self.ps
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn slices(&self) -> usize {
        retained_slices(self.n_channels)
    }

    pub fn group_size(&self) -> usize {
        self.k
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Surviving coefficients in the full spectrum (mirrored slices count
    /// twice).
    pub fn n_retained(&self) -> usize {
        self.n_retained
    }

    /// Total coefficients in the full spectrum, `ps * ps * N * K`.
    pub fn n_total(&self) -> usize {
        self.ps * self.ps * self.n_channels * self.k
    }

    #[inline]
    fn offset(&self, j: usize, k: usize) -> usize {
        self.ps * self.ps * (j + self.slices() * k)
    }

    /// Coefficient block of slice `j`, group index `k` (column-major).
    pub fn block(&self, j: usize, k: usize) -> &[Complex64] {
        let o = self.offset(j, k);
        &self.data[o..o + self.ps * self.ps]
    }

    /// Energy summed over the full spectrum.
    pub fn energy(&self) -> f64 {
        let mut e = 0.0;
        for k in 0..self.k {
            for j in 0..self.slices() {
                let m = slice_multiplicity(j, self.n_channels) as f64;
                e += m * self.block(j, k).iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
        }
        e
    }

    fn recount(&mut self) {
        let plane = self.ps * self.ps;
        let s = self.slices();
        self.n_retained = self
            .data
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm_sqr() > 0.0)
            .map(|(i, _)| slice_multiplicity((i / plane) % s, self.n_channels))
            .sum();
    }
}

/// Zeroes coefficients with modulus below `tau`; others are kept verbatim.
pub fn hard_threshold(mut c: CoefficientTensor, tau: f64) -> CoefficientTensor {
    threshold_in_place(&mut c, tau);
    c
}

pub fn threshold_in_place(c: &mut CoefficientTensor, tau: f64) {
    let t2 = tau * tau;
    for z in &mut c.data {
        if z.norm_sqr() < t2 {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    c.recount();
}

/// Reusable per-channel-count state for the Fourier-domain transform.
#[derive(Debug, Clone)]
pub struct SpectralFilter {
    dft: DftPair,
    u_row: Vec<CMatrix>,
    u_row_adj: Vec<CMatrix>,
    u_col: Vec<CMatrix>,
    u_col_adj: Vec<CMatrix>,
    ps: usize,
}

impl SpectralFilter {
    pub fn new(gb: &GlobalBasis) -> Result<Self> {
        let s = gb.retained_slices();
        Ok(Self {
            dft: DftPair::new(gb.n_channels())?,
            u_row: (0..s).map(|j| gb.u_row(j).clone()).collect(),
            u_row_adj: (0..s).map(|j| gb.u_row(j).adjoint()).collect(),
            u_col: (0..s).map(|j| gb.u_col(j).clone()).collect(),
            u_col_adj: (0..s).map(|j| gb.u_col(j).adjoint()).collect(),
            ps: gb.ps(),
        })
    }

    fn n(&self) -> usize {
        self.dft.size()
    }

    /// Forward transform of a group into half-spectrum coefficients.
    pub fn forward(&self, group: &PatchGroup, ub: &GroupBasis) -> Result<CoefficientTensor> {
        let (ps, n, k) = (self.ps, self.n(), group.size());
        if group.ps() != ps || group.channels() != n {
            return arg_err(format!(
                "group is {}x{}x{} but the basis expects {ps}x{ps}x{n}",
                group.ps(),
                group.ps(),
                group.channels()
            ));
        }
        if ub.u_group.rows() != k || ub.u_group.cols() != k {
            return arg_err(format!("group basis is {}x{}, group has {k} patches", ub.u_group.rows(), ub.u_group.cols()));
        }
        let s = retained_slices(n);
        let plane = ps * ps;
        let zero = Complex64::new(0.0, 0.0);
        let mut spatial = vec![zero; plane * s * k];
        let mut x = vec![zero; plane];
        let mut tmp = vec![zero; plane];
        for kk in 0..k {
            let patch = group.patch(kk);
            for j in 0..s {
                x.iter_mut().for_each(|v| *v = zero);
                for c in 0..n {
                    let f = self.dft.entry(j, c);
                    for (xv, &p) in x.iter_mut().zip(&patch[c * plane..(c + 1) * plane]) {
                        *xv += f * p;
                    }
                }
                let out = &mut spatial[plane * (j + s * kk)..][..plane];
                sandwich(&self.u_row_adj[j], &x, &self.u_col[j], ps, &mut tmp, out);
            }
        }
        let data = group_mix(&spatial, &ub.u_group, plane * s, k, true);
        let mut c = CoefficientTensor { ps, n_channels: n, k, data, n_retained: 0 };
        c.recount();
        Ok(c)
    }

    /// Inverse of [`SpectralFilter::forward`]; returns group samples in the
    /// `ps x ps x N x K` layout.
    pub fn inverse(&self, c: &CoefficientTensor, ub: &GroupBasis) -> Result<Vec<f64>> {
        let (ps, n, k) = (self.ps, self.n(), c.k);
        if c.ps != ps || c.n_channels != n || ub.u_group.rows() != k {
            return arg_err("coefficient tensor does not match the transform");
        }
        let s = retained_slices(n);
        let plane = ps * ps;
        let spatial = group_mix(&c.data, &ub.u_group, plane * s, k, false);
        let zero = Complex64::new(0.0, 0.0);
        let mut x = vec![zero; plane];
        let mut tmp = vec![zero; plane];
        let mut out = vec![0.0; plane * n * k];
        let mut residue = 0.0_f64;
        for kk in 0..k {
            let dst = &mut out[plane * n * kk..][..plane * n];
            for j in 0..s {
                let y = &spatial[plane * (j + s * kk)..][..plane];
                sandwich(&self.u_row[j], y, &self.u_col_adj[j], ps, &mut tmp, &mut x);
                let m = slice_multiplicity(j, n) as f64;
                if m == 1.0 {
                    residue = residue.max(x.iter().map(|z| z.im.abs()).fold(0.0, f64::max));
                }
                for ch in 0..n {
                    let f = self.dft.entry(j, ch).conj();
                    for (d, xv) in dst[ch * plane..(ch + 1) * plane].iter_mut().zip(&x) {
                        *d += m * (f.re * xv.re - f.im * xv.im);
                    }
                }
            }
        }
        let norm = c.energy().sqrt();
        if residue > 1e-9 * norm.max(1.0) {
            return Err(Error::Invariant(format!(
                "self-conjugate slice has imaginary residue {residue:e} (norm {norm:e})"
            )));
        }
        Ok(out)
    }

    /// Forward, threshold, inverse. Returns the filtered samples and the
    /// retained coefficient count.
    pub fn filter(&self, group: &PatchGroup, ub: &GroupBasis, tau: f64) -> Result<(Vec<f64>, usize)> {
        let mut c = self.forward(group, ub)?;
        threshold_in_place(&mut c, tau);
        let out = self.inverse(&c, ub)?;
        Ok((out, c.n_retained))
    }
}

/// `out = left * x * right` for `ps x ps` column-major blocks.
#[inline]
fn sandwich(left: &CMatrix, x: &[Complex64], right: &CMatrix, ps: usize, tmp: &mut [Complex64], out: &mut [Complex64]) {
    let zero = Complex64::new(0.0, 0.0);
    let l = left.as_slice();
    // tmp = left * x
    for b in 0..ps {
        let col = &mut tmp[b * ps..(b + 1) * ps];
        col.iter_mut().for_each(|v| *v = zero);
        for (i, &xv) in x[b * ps..(b + 1) * ps].iter().enumerate() {
            for (t, &lv) in col.iter_mut().zip(&l[i * ps..(i + 1) * ps]) {
                *t += lv * xv;
            }
        }
    }
    // out = tmp * right
    let r = right.as_slice();
    for b in 0..ps {
        let dst = &mut out[b * ps..(b + 1) * ps];
        dst.iter_mut().for_each(|v| *v = zero);
        for (i, &rv) in r[b * ps..(b + 1) * ps].iter().enumerate() {
            for (d, &t) in dst.iter_mut().zip(&tmp[i * ps..(i + 1) * ps]) {
                *d += t * rv;
            }
        }
    }
}

/// Applies the grouping transform along the last index: with
/// `forward`, `out[:, k'] = sum_k U[k, k'] in[:, k]`, otherwise
/// `out[:, k] = sum_k' U[k, k'] in[:, k']`.
fn group_mix<T: Scalar>(input: &[T], u: &RMatrix, block: usize, k: usize, forward: bool) -> Vec<T> {
    let mut out = vec![T::zero(); block * k];
    for dst_k in 0..k {
        let dst = &mut out[block * dst_k..][..block];
        for src_k in 0..k {
            let w = if forward { u[(src_k, dst_k)] } else { u[(dst_k, src_k)] };
            if w == 0.0 {
                continue;
            }
            for (d, &s) in dst.iter_mut().zip(&input[block * src_k..][..block]) {
                *d += s.scale(w);
            }
        }
    }
    out
}

/// Free-function forms used by the reference tests and the CLI self-test.
pub fn forward(group: &PatchGroup, gb: &GlobalBasis, ub: &GroupBasis) -> Result<CoefficientTensor> {
    SpectralFilter::new(gb)?.forward(group, ub)
}

pub fn inverse(c: &CoefficientTensor, gb: &GlobalBasis, ub: &GroupBasis) -> Result<Vec<f64>> {
    SpectralFilter::new(gb)?.inverse(c, ub)
}

/// Full-spectrum filter built from generic tensor operations: all `N`
/// slices are transformed (upper slices with conjugated bases), thresholded
/// and inverted, and the real part is returned. Slow; serves as the
/// reference for the half-spectrum path.
pub fn full_spectrum_filter(group: &PatchGroup, gb: &GlobalBasis, ub: &GroupBasis, tau: f64) -> Result<(Vec<f64>, usize)> {
    let (ps, n, k) = (group.ps(), group.channels(), group.size());
    let f = DftPair::new(n)?;
    let t = group.to_tensor().to_complex().mode_product(f.unitary(), 3)?;
    let mut coef = CTensor::zeros(&[ps, ps, n, k])?;
    for j in 0..n {
        let (ur, uc) = (gb.u_row_full(j), gb.u_col_full(j));
        for kk in 0..k {
            let x = CMatrix::from_fn(ps, ps, |a, b| t.get(&[a, b, j, kk]));
            let y = ur.adjoint().matmul(&x)?.matmul(&uc)?;
            for b in 0..ps {
                for a in 0..ps {
                    coef.set(&[a, b, j, kk], y[(a, b)]);
                }
            }
        }
    }
    let ug = ub.u_group.to_complex();
    let mut coef = coef.mode_product(&ug.transpose(), 4)?;
    let mut retained = 0;
    for z in coef.as_mut_slice() {
        if z.norm() < tau {
            *z = Complex64::new(0.0, 0.0);
        } else {
            retained += 1;
        }
    }
    let mixed = coef.mode_product(&ug, 4)?;
    let mut spatial = CTensor::zeros(&[ps, ps, n, k])?;
    for j in 0..n {
        let (ur, uc) = (gb.u_row_full(j), gb.u_col_full(j));
        for kk in 0..k {
            let y = CMatrix::from_fn(ps, ps, |a, b| mixed.get(&[a, b, j, kk]));
            let x = ur.matmul(&y)?.matmul(&uc.adjoint())?;
            for b in 0..ps {
                for a in 0..ps {
                    spatial.set(&[a, b, j, kk], x[(a, b)]);
                }
            }
        }
    }
    let back = spatial.mode_product(&f.unitary().adjoint(), 3)?;
    let norm = back.frobenius_norm();
    let worst = back.as_slice().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst > 1e-9 * norm.max(1.0) {
        return Err(Error::Invariant(format!("full-spectrum output has imaginary residue {worst:e}")));
    }
    Ok((back.as_slice().iter().map(|z| z.re).collect(), retained))
}

/// 4D HOSVD filtering of one group with its own factors.
pub fn hosvd_filter(group: &PatchGroup, basis: &HosvdBasis, tau: f64) -> Result<(Vec<f64>, usize)> {
    let t = group.to_tensor();
    let mut core: RTensor = t;
    for (m, f) in basis.factors().iter().enumerate() {
        core = core.mode_product(&f.transpose(), m + 1)?;
    }
    let mut retained = 0;
    for v in core.as_mut_slice() {
        if v.abs() < tau {
            *v = 0.0;
        } else {
            retained += 1;
        }
    }
    for (m, f) in basis.factors().iter().enumerate() {
        core = core.mode_product(f, m + 1)?;
    }
    Ok((core.into_vec(), retained))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch::DistanceMetric;
    use crate::transforms::{hosvd_basis, local_pca, GlobalBasisTrainer};
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn random_group(ps: usize, c: usize, k: usize, seed: u64) -> PatchGroup {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..ps * ps * c * k).map(|_| 128.0 + 60.0 * uniform(&mut rng)).collect();
        PatchGroup::from_parts(ps, c, vec![(0, 0); k], data).unwrap()
    }

    fn trained(ps: usize, c: usize, seed: u64) -> GlobalBasis {
        let g = random_group(ps, c, 20, seed ^ 0xabc);
        let mut t = GlobalBasisTrainer::new(ps, c).unwrap();
        for k in 0..g.size() {
            t.add_patch(g.patch(k)).unwrap();
        }
        t.finish().unwrap()
    }

    #[test]
    fn tau_values() {
        assert!((compute_tau(30.0, 1.0, 8 * 8 * 3 * 30) - 124.84).abs() < 0.01);
        assert!((compute_tau(30.0, 1.2, 5760) - 149.81).abs() < 0.01);
        assert_eq!(compute_tau(0.0, 1.0, 5760), 0.0);
    }

    #[test]
    fn params_validation() {
        let mut p = crate::pipeline::default_params(Method::MstSvd, crate::pipeline::ImageKind::Color, 25.0);
        assert!(p.validate().is_ok());
        assert!((p.tau(3) - compute_tau(25.0, 1.1, 5760)).abs() < 1e-12);
        p.tau_override = Some(3.0);
        assert_eq!(p.tau(3), 3.0);
        p.sigma = -1.0;
        assert!(p.validate().is_err());
        p.sigma = 1.0;
        p.step = 9;
        assert!(p.validate().is_err());
    }

    #[test]
    fn threshold_rule() {
        let mut c = CoefficientTensor {
            ps: 1,
            n_channels: 1,
            k: 3,
            data: vec![Complex64::new(5.0, 0.0), Complex64::new(-2.0, 0.0), Complex64::new(0.5, 0.0)],
            n_retained: 3,
        };
        c = hard_threshold(c, 1.0);
        assert_eq!(c.data, vec![Complex64::new(5.0, 0.0), Complex64::new(-2.0, 0.0), Complex64::new(0.0, 0.0)]);
        assert_eq!(c.n_retained(), 2);
        let again = hard_threshold(c.clone(), 1.0);
        assert_eq!(again, c);
        let z = CoefficientTensor {
            ps: 1,
            n_channels: 3,
            k: 1,
            data: vec![Complex64::new(0.6, 0.9), Complex64::new(0.6, 0.7)],
            n_retained: 0,
        };
        let z = hard_threshold(z, 1.0);
        assert_eq!(z.data[0], Complex64::new(0.6, 0.9));
        assert_eq!(z.data[1], Complex64::new(0.0, 0.0));
        assert_eq!(z.n_retained(), 1);
        // tau = 0 keeps everything, including exact zeros in value
        let w = hard_threshold(z.clone(), 0.0);
        assert_eq!(w.data, z.data);
    }

    #[test]
    fn identity_bases_single_channel() {
        let g = random_group(4, 1, 5, 1);
        let gb = GlobalBasis::identity(4, 1);
        let ub = GroupBasis { u_group: RMatrix::identity(5) };
        let c = forward(&g, &gb, &ub).unwrap();
        for (z, &v) in c.data().iter().zip(g.data()) {
            assert!((z.re - v).abs() < 1e-12 && z.im == 0.0);
        }
    }

    #[test]
    fn parseval_and_roundtrip() {
        for (c, seed) in [(1, 1), (3, 2), (4, 3), (31, 4)] {
            let g = random_group(4, c, 6, seed);
            let gb = trained(4, c, seed);
            let ub = local_pca(&g, DistanceMetric::Full).unwrap();
            let coef = forward(&g, &gb, &ub).unwrap();
            let e = coef.energy();
            let g2: f64 = g.data().iter().map(|v| v * v).sum();
            assert!((e - g2).abs() < 1e-8 * g2, "c={c}");
            let back = inverse(&coef, &gb, &ub).unwrap();
            for (x, y) in back.iter().zip(g.data()) {
                assert!((x - y).abs() < 1e-9, "c={c}");
            }
            assert_eq!(coef.n_retained(), coef.n_total());
        }
    }

    #[test]
    fn zeroed_coefficients_give_zero_group() {
        let g = random_group(4, 3, 4, 9);
        let gb = trained(4, 3, 9);
        let ub = local_pca(&g, DistanceMetric::Full).unwrap();
        let c = hard_threshold(forward(&g, &gb, &ub).unwrap(), f64::INFINITY);
        assert_eq!(c.n_retained(), 0);
        assert!(inverse(&c, &gb, &ub).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_patches_concentrate_in_first_component() {
        let base = random_group(4, 3, 1, 5);
        let k = 6;
        let data = base.data().repeat(k);
        let g = PatchGroup::from_parts(4, 3, vec![(0, 0); k], data).unwrap();
        let gb = trained(4, 3, 5);
        let ub = local_pca(&g, DistanceMetric::Full).unwrap();
        let c = forward(&g, &gb, &ub).unwrap();
        let scale = c.energy().sqrt();
        for kk in 1..k {
            for j in 0..c.slices() {
                assert!(c.block(j, kk).iter().all(|z| z.norm() < 1e-9 * scale));
            }
        }
        // noiseless fixed point under a small threshold
        let sf = SpectralFilter::new(&gb).unwrap();
        let (out, _) = sf.filter(&g, &ub, 1e-6).unwrap();
        for (x, y) in out.iter().zip(g.data()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn half_matches_full_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for (c, seed) in [(3, 1), (4, 2), (31, 3), (1, 4)] {
            let g = random_group(4, c, 5, seed);
            let gb = trained(4, c, seed);
            let ub = local_pca(&g, DistanceMetric::Full).unwrap();
            let tau = 200.0 * (uniform(&mut rng) + 1.0);
            let (half, nh) = SpectralFilter::new(&gb).unwrap().filter(&g, &ub, tau).unwrap();
            let (full, nf) = full_spectrum_filter(&g, &gb, &ub, tau).unwrap();
            assert_eq!(nh, nf, "c={c}");
            for (x, y) in half.iter().zip(&full) {
                assert!((x - y).abs() < 1e-10, "c={c}");
            }
        }
    }

    #[test]
    fn energy_never_increases() {
        let g = random_group(4, 3, 8, 17);
        let gb = trained(4, 3, 17);
        let ub = local_pca(&g, DistanceMetric::Full).unwrap();
        let sf = SpectralFilter::new(&gb).unwrap();
        let before: f64 = g.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        for tau in [0.0, 10.0, 100.0, 1000.0] {
            let (out, _) = sf.filter(&g, &ub, tau).unwrap();
            let after: f64 = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(after <= before * (1.0 + 1e-12));
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let g = random_group(4, 3, 5, 1);
        let gb = trained(4, 2, 1);
        let ub = local_pca(&g, DistanceMetric::Full).unwrap();
        assert!(forward(&g, &gb, &ub).is_err());
        let gb = trained(4, 3, 1);
        let ub = GroupBasis { u_group: RMatrix::identity(4) };
        assert!(forward(&g, &gb, &ub).is_err());
    }

    #[test]
    fn hosvd_filter_roundtrip() {
        let g = random_group(4, 3, 5, 2);
        let b = hosvd_basis(&g).unwrap();
        let (out, n) = hosvd_filter(&g, &b, 0.0).unwrap();
        assert_eq!(n, g.data().len());
        for (x, y) in out.iter().zip(g.data()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
