//! End-to-end denoisers: global training, grouping, collaborative filtering
//! and aggregation.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

#[cfg(not(target_arch = "wasm32"))]
use std::time::Instant;
#[cfg(target_arch = "wasm32")]
use web_time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::eval::MetricBlock;
use crate::filter::{hosvd_filter, FilterParams, SpectralFilter, WeightMode};
use crate::image::Image;
use crate::patch::{reference_grid, Aggregator, DistanceMetric, Matcher, PatchGroup};
use crate::transforms::{hosvd_basis, local_pca, GlobalBasis, GlobalBasisTrainer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Global t-SVD basis with full-patch grouping and PCA.
    #[serde(rename = "mstsvd")]
    MstSvd,
    /// Color variant: grouping and PCA on the first Fourier slice only.
    #[serde(rename = "cmstsvd")]
    CmstSvd,
    /// MSt-SVD on the band-first reshaped cube.
    #[serde(rename = "twist")]
    Twist,
    /// Per-group 4D HOSVD with hard thresholding.
    #[serde(rename = "hosvd4d")]
    Hosvd4d,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::MstSvd, Method::CmstSvd, Method::Twist, Method::Hosvd4d];

    pub fn name(self) -> &'static str {
        match self {
            Method::MstSvd => "mstsvd",
            Method::CmstSvd => "cmstsvd",
            Method::Twist => "twist",
            Method::Hosvd4d => "hosvd4d",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown method `{s}` (expected mstsvd, cmstsvd, twist or hosvd4d)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageKind {
    Color,
    Msi,
}

impl ImageKind {
    pub fn of(img: &Image) -> Self {
        if img.channels() <= 3 { ImageKind::Color } else { ImageKind::Msi }
    }
}

/// Default parameters per method and image kind.
pub fn default_params(method: Method, kind: ImageKind, sigma: f64) -> FilterParams {
    let search_radius = match kind {
        ImageKind::Color => 20,
        ImageKind::Msi => 16,
    };
    let gamma = match (method, kind) {
        (Method::Hosvd4d, ImageKind::Color) => 0.8,
        (Method::Hosvd4d, ImageKind::Msi) => 1.0,
        (_, ImageKind::Color) => {
            if sigma < 30.0 {
                1.1
            } else {
                1.2
            }
        }
        (_, ImageKind::Msi) => 1.0,
    };
    FilterParams {
        ps: 8,
        group_size: 30,
        search_radius,
        step: 4,
        sigma,
        gamma,
        tau_override: None,
        method,
        weight_mode: WeightMode::Uniform,
        training_patches: None,
        seed: 0,
        threads: 1,
    }
}

/// Wall-clock time spent per stage, summed over workers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub training: f64,
    pub grouping: f64,
    pub pca: f64,
    pub filtering: f64,
    pub aggregation: f64,
}

impl StageTimes {
    fn add(&mut self, o: &StageTimes) {
        self.training += o.training;
        self.grouping += o.grouping;
        self.pca += o.pca;
        self.filtering += o.filtering;
        self.aggregation += o.aggregation;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseReport {
    pub method: Method,
    pub params: FilterParams,
    /// Threshold actually applied.
    pub tau: f64,
    pub seconds: f64,
    pub groups: usize,
    /// Mean over groups of nonzero coefficients after thresholding divided
    /// by the coefficient count.
    pub retained_fraction: f64,
    pub stages: StageTimes,
    pub metrics: Option<MetricBlock>,
}

/// Runs the method selected in `params`.
pub fn denoise(img: &Image, params: &FilterParams) -> Result<(Image, DenoiseReport)> {
    denoise_with_basis(img, params, None)
}

/// Like [`denoise`], reusing a global basis trained earlier on
/// [`training_image`] of the same input. Ignored by 4D HOSVD.
pub fn denoise_with_basis(img: &Image, params: &FilterParams, basis: Option<&GlobalBasis>) -> Result<(Image, DenoiseReport)> {
    match params.method {
        Method::MstSvd => run(img, params, Method::MstSvd, Engine::Spectral(DistanceMetric::Full), basis),
        Method::CmstSvd => {
            if img.channels() != 3 {
                return arg_err(format!("CMSt-SVD needs a 3-channel image, got {} channels", img.channels()));
            }
            run(img, params, Method::CmstSvd, Engine::Spectral(DistanceMetric::FirstSlice), basis)
        }
        Method::Twist => {
            check_twist(img, params)?;
            let start = Instant::now();
            let (out, mut report) = run(&img.twist(), params, Method::Twist, Engine::Spectral(DistanceMetric::Full), basis)?;
            report.seconds = start.elapsed().as_secs_f64();
            Ok((out.untwist(), report))
        }
        Method::Hosvd4d => run(img, params, Method::Hosvd4d, Engine::Hosvd, None),
    }
}

fn check_twist(img: &Image, params: &FilterParams) -> Result<()> {
    if img.channels() < params.ps.max(2) {
        return arg_err(format!("twist needs at least {} bands (the patch size), got {}", params.ps.max(2), img.channels()));
    }
    Ok(())
}

pub fn denoise_mstsvd(img: &Image, params: &FilterParams) -> Result<(Image, DenoiseReport)> {
    denoise(img, &FilterParams { method: Method::MstSvd, ..params.clone() })
}

/// Requires exactly three channels.
pub fn denoise_cmstsvd(img: &Image, params: &FilterParams) -> Result<(Image, DenoiseReport)> {
    denoise(img, &FilterParams { method: Method::CmstSvd, ..params.clone() })
}

/// Reshapes `H x W x B` to `B x H x W`, runs MSt-SVD and reshapes back.
/// Needs at least `ps` bands.
pub fn denoise_twist(img: &Image, params: &FilterParams) -> Result<(Image, DenoiseReport)> {
    denoise(img, &FilterParams { method: Method::Twist, ..params.clone() })
}

pub fn denoise_hosvd4d(img: &Image, params: &FilterParams) -> Result<(Image, DenoiseReport)> {
    denoise(img, &FilterParams { method: Method::Hosvd4d, ..params.clone() })
}

/// The image the global basis is trained on for `method`: the band-first
/// reshape for twist, the input itself otherwise. `None` for 4D HOSVD, which
/// has no global basis.
pub fn training_image(img: &Image, method: Method) -> Option<Image> {
    match method {
        Method::MstSvd | Method::CmstSvd => Some(img.clone()),
        Method::Twist => Some(img.twist()),
        Method::Hosvd4d => None,
    }
}

#[derive(Debug, Clone, Copy)]
enum Engine {
    Spectral(DistanceMetric),
    Hosvd,
}

#[derive(Debug)]
struct Partial {
    agg: Aggregator,
    groups: usize,
    retained: f64,
    stages: StageTimes,
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn extract_patch(img: &Image, ps: usize, (r, c): (usize, usize), out: &mut Vec<f64>) {
    out.clear();
    let h = img.height();
    for ch in 0..img.channels() {
        let plane = img.plane(ch);
        for b in 0..ps {
            let start = r + h * (c + b);
            out.extend_from_slice(&plane[start..start + ps]);
        }
    }
}

fn training_positions(all: &[(usize, usize)], budget: Option<usize>, seed: u64) -> Vec<(usize, usize)> {
    match budget {
        Some(m) if m < all.len() => {
            let mut idx: Vec<usize> = (0..all.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in 0..m {
                let j = i + (rng.next_u64() % (all.len() - i) as u64) as usize;
                idx.swap(i, j);
            }
            let mut chosen = idx[..m].to_vec();
            chosen.sort_unstable();
            chosen.into_iter().map(|i| all[i]).collect()
        }
        _ => all.to_vec(),
    }
}

/// Splits `items` into `n` contiguous, nearly equal chunks.
fn chunks<T>(items: &[T], n: usize) -> Vec<&[T]> {
    let n = n.clamp(1, items.len().max(1));
    let base = items.len() / n;
    let extra = items.len() % n;
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let len = base + usize::from(i < extra);
        out.push(&items[start..start + len]);
        start += len;
    }
    out
}

/// Maps `f` over chunks, on `threads` workers when parallelism is enabled.
fn map_chunks<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&[T]) -> Result<R> + Sync) -> Result<Vec<R>> {
    let parts = chunks(items, threads);
    #[cfg(feature = "parallel")]
    if parts.len() > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parts.len())
            .build()
            .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))?;
        return pool.install(|| parts.par_iter().map(|p| f(p)).collect());
    }
    parts.into_iter().map(f).collect()
}

/// Trains the global basis on the reference patches of `img`.
pub fn train_on_image(img: &Image, params: &FilterParams) -> Result<GlobalBasis> {
    let grid = reference_grid(img.height(), img.width(), params.ps, params.step)?;
    let positions = training_positions(&grid.positions(), params.training_patches, params.seed);
    let partials = map_chunks(&positions, params.threads, |part| {
        let mut trainer = GlobalBasisTrainer::new(params.ps, img.channels())?;
        let mut buf = Vec::new();
        for &pos in part {
            extract_patch(img, params.ps, pos, &mut buf);
            trainer.add_patch(&buf)?;
        }
        Ok(trainer)
    })?;
    let mut iter = partials.into_iter();
    let mut total = iter.next().ok_or_else(|| Error::Invariant("no training partitions".into()))?;
    for p in iter {
        total.merge(&p)?;
    }
    total.finish()
}

fn run(
    img: &Image,
    params: &FilterParams,
    method: Method,
    engine: Engine,
    basis: Option<&GlobalBasis>,
) -> Result<(Image, DenoiseReport)> {
    params.validate()?;
    let start = Instant::now();
    let (h, w, channels) = img.dims();
    if params.ps > h || params.ps > w {
        return arg_err(format!("image {h}x{w} is smaller than the patch size {}", params.ps));
    }
    let grid = reference_grid(h, w, params.ps, params.step)?;
    let tau = params.tau(channels);
    let mut stages = StageTimes::default();

    let spectral = match engine {
        Engine::Spectral(metric) => {
            let sf = match basis {
                Some(gb) => {
                    if gb.ps() != params.ps || gb.n_channels() != channels {
                        return arg_err(format!(
                            "cached basis is for ps={} with {} channels, need ps={} with {channels}",
                            gb.ps(),
                            gb.n_channels(),
                            params.ps
                        ));
                    }
                    SpectralFilter::new(gb)?
                }
                None => {
                    let t0 = Instant::now();
                    let gb = train_on_image(img, params)?;
                    stages.training = secs(t0.elapsed());
                    SpectralFilter::new(&gb)?
                }
            };
            Some((sf, metric))
        }
        Engine::Hosvd => None,
    };
    let metric = spectral.as_ref().map_or(DistanceMetric::Full, |s| s.1);
    let matcher = Matcher::new(img, params.ps, params.search_radius, params.group_size, metric)?;

    let positions = grid.positions();
    let partials = map_chunks(&positions, params.threads, |part| {
        let mut p = Partial { agg: Aggregator::for_image(img), groups: 0, retained: 0.0, stages: StageTimes::default() };
        for &pos in part {
            let t0 = Instant::now();
            let group = matcher.match_block(pos)?;
            let t1 = Instant::now();
            let (filtered, n_retained, t2) = match &spectral {
                Some((sf, metric)) => {
                    let ub = local_pca(&group, *metric)?;
                    let t2 = Instant::now();
                    let (out, n) = sf.filter(&group, &ub, tau)?;
                    (out, n, t2)
                }
                None => {
                    let basis = hosvd_basis(&group)?;
                    let t2 = Instant::now();
                    let (out, n) = hosvd_filter(&group, &basis, tau)?;
                    (out, n, t2)
                }
            };
            let t3 = Instant::now();
            let total = group.data().len() as f64;
            let filtered: PatchGroup = group.with_data(filtered)?;
            p.agg.accumulate(&filtered, params.weight_mode.weight(n_retained))?;
            let t4 = Instant::now();
            p.groups += 1;
            p.retained += n_retained as f64 / total;
            p.stages.grouping += secs(t1 - t0);
            p.stages.pca += secs(t2 - t1);
            p.stages.filtering += secs(t3 - t2);
            p.stages.aggregation += secs(t4 - t3);
        }
        Ok(p)
    })?;

    let mut agg = Aggregator::for_image(img);
    let mut groups = 0;
    let mut retained = 0.0;
    for p in &partials {
        agg.merge(&p.agg)?;
        groups += p.groups;
        retained += p.retained;
        stages.add(&p.stages);
    }
    let out = agg.finalize()?;
    let report = DenoiseReport {
        method,
        params: params.clone(),
        tau,
        seconds: secs(start.elapsed()),
        groups,
        retained_fraction: if groups > 0 { retained / groups as f64 } else { 0.0 },
        stages,
        metrics: None,
    };
    Ok((out, report))
}
