//! Learned transforms: the global t-SVD patch basis, the per-group PCA along
//! the grouping mode, the per-group 4D HOSVD factors and the fixed opponent
//! color matrix.

use num_complex::Complex64;

use crate::dft::{retained_slices, DftPair};
use crate::eig::{hermitian_eig, symmetric_eig};
use crate::error::{arg_err, Error, Result};
use crate::matrix::{CMatrix, RMatrix};
use crate::patch::{DistanceMetric, PatchGroup};
use crate::tensor::RTensor;

/// Row and column transforms for each retained Fourier slice along the
/// channel mode.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalBasis {
    ps: usize,
    n_channels: usize,
    u_row: Vec<CMatrix>,
    u_col: Vec<CMatrix>,
}

impl GlobalBasis {
    pub fn from_parts(ps: usize, n_channels: usize, u_row: Vec<CMatrix>, u_col: Vec<CMatrix>) -> Result<Self> {
        let s = retained_slices(n_channels);
        if u_row.len() != s || u_col.len() != s {
            return arg_err(format!("expected {s} slice matrices for {n_channels} channels"));
        }
        if u_row.iter().chain(&u_col).any(|m| m.rows() != ps || m.cols() != ps) {
            return arg_err(format!("basis matrices must be {ps}x{ps}"));
        }
        Ok(Self { ps, n_channels, u_row, u_col })
    }

    /// Identity transforms (no spatial decorrelation).
    pub fn identity(ps: usize, n_channels: usize) -> Self {
        let s = retained_slices(n_channels);
        Self {
            ps,
            n_channels,
            u_row: vec![CMatrix::identity(ps); s],
            u_col: vec![CMatrix::identity(ps); s],
        }
    }

    pub fn ps(&self) -> usize {
        self.ps
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn retained_slices(&self) -> usize {
        self.u_row.len()
    }

    pub fn u_row(&self, j: usize) -> &CMatrix {
        &self.u_row[j]
    }

    pub fn u_col(&self, j: usize) -> &CMatrix {
        &self.u_col[j]
    }

    /// Row transform for any slice `0..N`, conjugating the retained one for
    /// the upper half of the spectrum.
    pub fn u_row_full(&self, j: usize) -> CMatrix {
        if j < self.u_row.len() { self.u_row[j].clone() } else { self.u_row[self.n_channels - j].conj() }
    }

    pub fn u_col_full(&self, j: usize) -> CMatrix {
        if j < self.u_col.len() { self.u_col[j].clone() } else { self.u_col[self.n_channels - j].conj() }
    }

    const MAGIC: &'static [u8; 4] = b"GBAS";

    /// Binary cache layout: `GBAS`, then little-endian `u32` ps, channel
    /// count and retained slice count, then for every slice the row and
    /// column matrices as column-major interleaved `(re, im)` `f64` pairs.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.u_row.len() * 2 * self.ps * self.ps * 16);
        out.extend_from_slice(Self::MAGIC);
        for v in [self.ps, self.n_channels, self.u_row.len()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for (r, c) in self.u_row.iter().zip(&self.u_col) {
            for m in [r, c] {
                for z in m.as_slice() {
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |offset: usize, what: &str| Err(Error::Argument(format!("basis cache: {what} at byte {offset}")));
        if bytes.len() < 16 {
            return fail(bytes.len(), "truncated header");
        }
        if &bytes[..4] != Self::MAGIC {
            return fail(0, "bad magic");
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize;
        let (ps, n, s) = (word(0), word(1), word(2));
        if ps == 0 || n == 0 || s != retained_slices(n) {
            return fail(4, "inconsistent dimensions");
        }
        let per = ps * ps * 16;
        let need = 16 + 2 * s * per;
        if bytes.len() != need {
            return fail(bytes.len().min(need), &format!("payload length mismatch (expected {need} bytes)"));
        }
        let mut off = 16;
        let mut read = || {
            let data: Vec<Complex64> = (0..ps * ps)
                .map(|i| {
                    let at = off + 16 * i;
                    let re = f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
                    let im = f64::from_le_bytes(bytes[at + 8..at + 16].try_into().expect("8 bytes"));
                    Complex64::new(re, im)
                })
                .collect();
            off += per;
            CMatrix::from_col_major(ps, ps, data).expect("sized")
        };
        let mut u_row = Vec::with_capacity(s);
        let mut u_col = Vec::with_capacity(s);
        for _ in 0..s {
            u_row.push(read());
            u_col.push(read());
        }
        Self::from_parts(ps, n, u_row, u_col)
    }
}

/// Accumulates per-slice row/column Gram matrices over training patches.
#[derive(Debug, Clone)]
pub struct GlobalBasisTrainer {
    ps: usize,
    n_channels: usize,
    dft: DftPair,
    g_row: Vec<CMatrix>,
    g_col: Vec<CMatrix>,
    count: usize,
    scratch: Vec<Complex64>,
}

impl GlobalBasisTrainer {
    pub fn new(ps: usize, n_channels: usize) -> Result<Self> {
        if ps == 0 {
            return arg_err("patch size must be positive");
        }
        let s = retained_slices(n_channels);
        Ok(Self {
            ps,
            n_channels,
            dft: DftPair::new(n_channels)?,
            g_row: vec![CMatrix::zeros(ps, ps); s],
            g_col: vec![CMatrix::zeros(ps, ps); s],
            count: 0,
            scratch: vec![Complex64::new(0.0, 0.0); ps * ps],
        })
    }

    /// Adds one `ps x ps x N` patch given in column-major, channel-last order.
    pub fn add_patch(&mut self, patch: &[f64]) -> Result<()> {
        let ps = self.ps;
        let plane = ps * ps;
        if patch.len() != plane * self.n_channels {
            return arg_err(format!("training patch has {} samples, expected {}", patch.len(), plane * self.n_channels));
        }
        for j in 0..self.g_row.len() {
            let x = &mut self.scratch;
            x.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for c in 0..self.n_channels {
                let f = self.dft.entry(j, c);
                for (xv, &p) in x.iter_mut().zip(&patch[c * plane..(c + 1) * plane]) {
                    *xv += f * p;
                }
            }
            // G_row += X X^H, G_col += X^H X; X(a, b) at a + ps * b.
            let g_row = self.g_row[j].as_mut_slice();
            for a2 in 0..ps {
                for a1 in 0..ps {
                    let mut s = Complex64::new(0.0, 0.0);
                    for b in 0..ps {
                        s += x[a1 + ps * b] * x[a2 + ps * b].conj();
                    }
                    g_row[a1 + ps * a2] += s;
                }
            }
            let g_col = self.g_col[j].as_mut_slice();
            for b2 in 0..ps {
                for b1 in 0..ps {
                    let mut s = Complex64::new(0.0, 0.0);
                    for a in 0..ps {
                        s += x[a + ps * b1].conj() * x[a + ps * b2];
                    }
                    g_col[b1 + ps * b2] += s;
                }
            }
        }
        self.count += 1;
        Ok(())
    }

    /// Adds another trainer's sums (for per-worker partial accumulation).
    pub fn merge(&mut self, other: &GlobalBasisTrainer) -> Result<()> {
        if (self.ps, self.n_channels) != (other.ps, other.n_channels) {
            return arg_err("cannot merge trainers of different shapes");
        }
        for (a, b) in self.g_row.iter_mut().zip(&other.g_row).chain(self.g_col.iter_mut().zip(&other.g_col)) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += y;
            }
        }
        self.count += other.count;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Eigenvectors (descending eigenvalues) of each slice Gram. Slices that
    /// are their own conjugate are solved in real arithmetic so their bases
    /// are exactly real.
    pub fn finish(&self) -> Result<GlobalBasis> {
        if self.count == 0 {
            return arg_err("global basis needs at least one training patch");
        }
        let solve = |j: usize, g: &CMatrix| -> Result<CMatrix> {
            if j == 0 || 2 * j == self.n_channels {
                let real = RMatrix::from_fn(g.rows(), g.cols(), |r, c| g[(r, c)].re);
                Ok(symmetric_eig(&real)?.vectors.to_complex())
            } else {
                Ok(hermitian_eig(g)?.vectors)
            }
        };
        let u_row = self.g_row.iter().enumerate().map(|(j, g)| solve(j, g)).collect::<Result<_>>()?;
        let u_col = self.g_col.iter().enumerate().map(|(j, g)| solve(j, g)).collect::<Result<_>>()?;
        GlobalBasis::from_parts(self.ps, self.n_channels, u_row, u_col)
    }
}

/// Trains the global basis on a set of `ps x ps x N` patches.
pub fn train_global_basis(ref_patches: &[RTensor]) -> Result<GlobalBasis> {
    let first = ref_patches.first().ok_or_else(|| Error::Argument("no training patches".into()))?;
    let (ps, n) = match *first.shape() {
        [a, b, n] if a == b => (a, n),
        _ => return arg_err(format!("training patches must be ps x ps x N, got {:?}", first.shape())),
    };
    let mut trainer = GlobalBasisTrainer::new(ps, n)?;
    for p in ref_patches {
        if p.shape() != first.shape() {
            return arg_err("training patches must share one shape");
        }
        trainer.add_patch(p.as_slice())?;
    }
    trainer.finish()
}

/// Orthogonal transform along the grouping mode.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupBasis {
    pub u_group: RMatrix,
}

fn gram_of_vectors(vectors: &[&[f64]]) -> RMatrix {
    let k = vectors.len();
    let mut g = RMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = vectors[i].iter().zip(vectors[j]).map(|(a, b)| a * b).sum();
            g[(i, j)] = s;
            g[(j, i)] = s;
        }
    }
    g
}

/// Second-moment PCA along the grouping mode, keeping all `K` components.
///
/// With [`DistanceMetric::Full`] the Gram is taken over whole patches; with
/// [`DistanceMetric::FirstSlice`] only over the first Fourier slice along the
/// channels.
pub fn local_pca(group: &PatchGroup, mode: DistanceMetric) -> Result<GroupBasis> {
    let g = match mode {
        DistanceMetric::Full => {
            let vecs: Vec<&[f64]> = (0..group.size()).map(|k| group.patch(k)).collect();
            gram_of_vectors(&vecs)
        }
        DistanceMetric::FirstSlice => {
            let plane = group.ps() * group.ps();
            let scale = 1.0 / (group.channels() as f64).sqrt();
            let slices: Vec<Vec<f64>> = (0..group.size())
                .map(|k| {
                    let p = group.patch(k);
                    let mut s = vec![0.0; plane];
                    for c in 0..group.channels() {
                        for (d, &v) in s.iter_mut().zip(&p[c * plane..(c + 1) * plane]) {
                            *d += v;
                        }
                    }
                    s.iter_mut().for_each(|v| *v *= scale);
                    s
                })
                .collect();
            let vecs: Vec<&[f64]> = slices.iter().map(Vec::as_slice).collect();
            gram_of_vectors(&vecs)
        }
    };
    Ok(GroupBasis { u_group: symmetric_eig(&g)?.vectors })
}

/// Per-group factors of the 4D HOSVD.
#[derive(Debug, Clone, PartialEq)]
pub struct HosvdBasis {
    pub u_row: RMatrix,
    pub u_col: RMatrix,
    pub u_color: RMatrix,
    pub u_group: RMatrix,
}

impl HosvdBasis {
    pub fn factors(&self) -> [&RMatrix; 4] {
        [&self.u_row, &self.u_col, &self.u_color, &self.u_group]
    }
}

/// Mode-`n` Gram matrix `X_(n) X_(n)^T` of a dense order-4 array, computed
/// without materializing the unfolding.
pub(crate) fn mode_gram(data: &[f64], shape: [usize; 4], mode: usize) -> RMatrix {
    let inner: usize = shape[..mode].iter().product();
    let n = shape[mode];
    let outer: usize = shape[mode + 1..].iter().product();
    let mut g = RMatrix::zeros(n, n);
    for o in 0..outer {
        let block = &data[o * inner * n..(o + 1) * inner * n];
        for i in 0..n {
            let fi = &block[i * inner..(i + 1) * inner];
            for j in 0..=i {
                let fj = &block[j * inner..(j + 1) * inner];
                let s: f64 = fi.iter().zip(fj).map(|(a, b)| a * b).sum();
                g[(i, j)] += s;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            g[(j, i)] = g[(i, j)];
        }
    }
    g
}

/// HOSVD factors of a group: eigenvectors of each mode's Gram.
pub fn hosvd_basis(group: &PatchGroup) -> Result<HosvdBasis> {
    let shape = [group.ps(), group.ps(), group.channels(), group.size()];
    let mut f = (0..4).map(|m| symmetric_eig(&mode_gram(group.data(), shape, m)).map(|e| e.vectors));
    Ok(HosvdBasis {
        u_row: f.next().expect("4 modes")?,
        u_col: f.next().expect("4 modes")?,
        u_color: f.next().expect("4 modes")?,
        u_group: f.next().expect("4 modes")?,
    })
}

/// The fixed opponent color transform (`U_color^T`): luminance, then two
/// chrominance rows.
pub fn opponent_matrix() -> RMatrix {
    RMatrix::from_rows(&[
        vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        vec![0.5, 0.0, -0.5],
        vec![0.25, -0.5, 0.25],
    ])
}
