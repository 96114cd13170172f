//! Benchmark matrix: every (image, method, sigma) combination, reported as a
//! markdown summary (a Noisy row, then one row per method, metric columns per
//! sigma) plus per-run and per-method rows.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mstsvd::eval::{add_awgn, csv_row, MetricBlock, CSV_HEADER};
use mstsvd::synth::{synthetic_color, synthetic_msi};
use mstsvd::{default_params, denoise, FilterParams, Image, ImageKind, Method, WeightMode};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::io::read_image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Color,
    Msi,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSpec {
    pub name: String,
    pub path: Option<PathBuf>,
    pub synthetic: Option<SyntheticKind>,
    pub size: Option<usize>,
    pub bands: Option<usize>,
    pub seed: Option<u64>,
}

impl ImageSpec {
    fn load(&self, base: &Path) -> CliResult<Image> {
        match (&self.path, self.synthetic) {
            (Some(p), None) => read_image(&base.join(p)),
            (None, Some(kind)) => {
                let size = self.size.unwrap_or(128);
                let seed = self.seed.unwrap_or(0);
                Ok(match kind {
                    SyntheticKind::Color => synthetic_color(size, seed)?,
                    SyntheticKind::Msi => synthetic_msi(size, size, self.bands.unwrap_or(31), seed)?,
                })
            }
            _ => Err(CliError::Argument(format!("image `{}` needs exactly one of `path` or `synthetic`", self.name))),
        }
    }
}

/// Parameter overrides applied on top of the per-method defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub gamma: Option<f64>,
    pub ps: Option<usize>,
    pub k: Option<usize>,
    pub sr: Option<usize>,
    pub step: Option<usize>,
    pub weights: Option<WeightMode>,
    pub training_patches: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, p: &mut FilterParams) {
        if let Some(v) = self.gamma {
            p.gamma = v;
        }
        if let Some(v) = self.ps {
            p.ps = v;
        }
        if let Some(v) = self.k {
            p.group_size = v;
        }
        if let Some(v) = self.sr {
            p.search_radius = v;
        }
        if let Some(v) = self.step {
            p.step = v;
        }
        if let Some(v) = self.weights {
            p.weight_mode = v;
        }
        if self.training_patches.is_some() {
            p.training_patches = self.training_patches;
        }
    }
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub images: Vec<ImageSpec>,
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub sigmas: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub threads: usize,
    /// Wall times are left out of the report when false, making reruns
    /// byte-identical.
    #[serde(default = "yes")]
    pub timings: bool,
    /// Markdown report path; printed to stdout when absent.
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub overrides: Overrides,
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Argument(format!("bench config: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct RunRow {
    pub image: String,
    pub method: String,
    pub sigma: f64,
    /// Metrics and seconds, or the failure message.
    pub outcome: Result<(MetricBlock, f64), String>,
    /// Set when the method does not apply to the image; not a failure.
    pub skipped: Option<String>,
}

/// Why `method` cannot run on `img` with `params`, if it cannot.
pub fn incompatibility(method: Method, img: &Image, params: &FilterParams) -> Option<String> {
    match method {
        Method::CmstSvd if img.channels() != 3 => Some(format!("cmstsvd needs 3 channels, image has {}", img.channels())),
        Method::Twist if img.channels() < params.ps => {
            Some(format!("twist needs at least {} bands, image has {}", params.ps, img.channels()))
        }
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub noisy: Vec<RunRow>,
    pub runs: Vec<RunRow>,
    pub markdown: String,
    pub csv: String,
    pub first_error: Option<(i32, String)>,
}

/// Remembers the first failure and returns its message for the row.
fn fail(code: i32, msg: String, first: &mut Option<(i32, String)>) -> String {
    if first.is_none() {
        *first = Some((code, msg.clone()));
    }
    msg
}

/// Seed of the noise field for image `i` at noise level `j`.
fn noise_seed(seed: u64, i: usize, j: usize) -> u64 {
    seed.wrapping_add(1000 * i as u64 + j as u64)
}

pub fn run_bench(cfg: &BenchConfig, base: &Path) -> CliResult<BenchReport> {
    if cfg.threads == 0 {
        return Err(CliError::Argument("threads must be positive".into()));
    }
    let mut noisy_rows = Vec::new();
    let mut runs = Vec::new();
    let mut first_error: Option<(i32, String)> = None;
    for (i, spec) in cfg.images.iter().enumerate() {
        let clean = spec.load(base);
        for (j, &sigma) in cfg.sigmas.iter().enumerate() {
            let row = |method: &str, outcome| RunRow { image: spec.name.clone(), method: method.to_string(), sigma, outcome, skipped: None };
            let clean = match &clean {
                Ok(c) => c,
                Err(e) => {
                    let msg = fail(e.exit_code(), e.to_string(), &mut first_error);
                    noisy_rows.push(row("noisy", Err(msg.clone())));
                    for m in &cfg.methods {
                        runs.push(row(m.name(), Err(msg.clone())));
                    }
                    continue;
                }
            };
            let noisy = match add_awgn(clean, sigma, noise_seed(cfg.seed, i, j)) {
                Ok(n) => n,
                Err(e) => {
                    let e = CliError::from(e);
                    let msg = fail(e.exit_code(), e.to_string(), &mut first_error);
                    noisy_rows.push(row("noisy", Err(msg.clone())));
                    for m in &cfg.methods {
                        runs.push(row(m.name(), Err(msg.clone())));
                    }
                    continue;
                }
            };
            let noisy_metrics = MetricBlock::compute(clean, &noisy).map(|m| (m, 0.0)).map_err(|e| {
                let e = CliError::from(e);
                fail(e.exit_code(), e.to_string(), &mut first_error)
            });
            noisy_rows.push(row("noisy", noisy_metrics));
            for &method in &cfg.methods {
                let mut params = default_params(method, ImageKind::of(clean), sigma);
                cfg.overrides.apply(&mut params);
                params.threads = cfg.threads;
                params.seed = cfg.seed;
                if let Some(why) = incompatibility(method, clean, &params) {
                    runs.push(RunRow { skipped: Some(why.clone()), ..row(method.name(), Err(why)) });
                    continue;
                }
                let start = Instant::now();
                let outcome = denoise(&noisy, &params)
                    .and_then(|(out, _)| MetricBlock::compute(clean, &out))
                    .map(|m| (m, start.elapsed().as_secs_f64()))
                    .map_err(|e| {
                        let e = CliError::from(e);
                        fail(e.exit_code(), e.to_string(), &mut first_error)
                    });
                runs.push(row(method.name(), outcome));
            }
        }
    }
    let markdown = render_markdown(cfg, &noisy_rows, &runs);
    let csv = render_csv(cfg, &noisy_rows, &runs);
    Ok(BenchReport { noisy: noisy_rows, runs, markdown, csv, first_error })
}

fn mean_block<'a>(rows: impl Iterator<Item = &'a RunRow>) -> Option<(MetricBlock, f64, usize)> {
    let ok: Vec<&(MetricBlock, f64)> = rows.filter_map(|r| r.outcome.as_ref().ok()).collect();
    if ok.is_empty() {
        return None;
    }
    let n = ok.len() as f64;
    let sum = |f: &dyn Fn(&MetricBlock) -> f64| ok.iter().map(|(m, _)| f(m)).sum::<f64>() / n;
    let block = MetricBlock { psnr: sum(&|m| m.psnr), ssim: sum(&|m| m.ssim), ergas: sum(&|m| m.ergas), sam: sum(&|m| m.sam) };
    Some((block, ok.iter().map(|(_, s)| s).sum::<f64>() / n, ok.len()))
}

fn fmt_psnr(v: f64) -> String {
    if v.is_infinite() { "inf".into() } else { format!("{v:.2}") }
}

fn metric_cells(m: &MetricBlock) -> String {
    format!("{} | {:.4} | {:.2} | {:.4}", fmt_psnr(m.psnr), m.ssim, m.ergas, m.sam)
}

fn seconds_cell(cfg: &BenchConfig, s: f64) -> String {
    if cfg.timings { format!("{s:.2}") } else { "-".into() }
}

fn render_markdown(cfg: &BenchConfig, noisy: &[RunRow], runs: &[RunRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Benchmark report\n");
    let _ = writeln!(
        out,
        "Means over {} image(s). Seed {}, {} worker(s).\n",
        cfg.images.len(),
        cfg.seed,
        cfg.threads
    );

    let mut header = String::from("| Method |");
    let mut rule = String::from("|---|");
    for s in &cfg.sigmas {
        for m in ["PSNR", "SSIM", "ERGAS", "SAM"] {
            let _ = write!(header, " σ={s} {m} |");
            rule.push_str("---:|");
        }
    }
    let _ = writeln!(out, "{header}\n{rule}");
    if !cfg.images.is_empty() {
        let mut labels = vec![("Noisy".to_string(), "noisy".to_string(), noisy)];
        for m in &cfg.methods {
            labels.push((m.name().to_string(), m.name().to_string(), runs));
        }
        for (label, key, rows) in labels {
            let mut line = format!("| {label} |");
            for &s in &cfg.sigmas {
                match mean_block(rows.iter().filter(|r| r.method == key && r.sigma == s)) {
                    Some((m, _, _)) => {
                        let _ = write!(line, " {} |", metric_cells(&m));
                    }
                    None => line.push_str(" - | - | - | - |"),
                }
            }
            let _ = writeln!(out, "{line}");
        }
    }

    let _ = writeln!(out, "\n## Runs\n");
    let _ = writeln!(out, "| Image | Method | σ | PSNR | SSIM | ERGAS | SAM | Seconds | Status |");
    let _ = writeln!(out, "|---|---|---:|---:|---:|---:|---:|---:|---|");
    for r in runs {
        if let Some(why) = &r.skipped {
            let _ = writeln!(out, "| {} | {} | {} | - | - | - | - | - | skipped: {} |", r.image, r.method, r.sigma, why);
            continue;
        }
        match &r.outcome {
            Ok((m, s)) => {
                let _ = writeln!(out, "| {} | {} | {} | {} | {} | ok |", r.image, r.method, r.sigma, metric_cells(m), seconds_cell(cfg, *s));
            }
            Err(e) => {
                let _ = writeln!(out, "| {} | {} | {} | - | - | - | - | - | failed: {} |", r.image, r.method, r.sigma, e.replace('|', "/"));
            }
        }
    }

    let _ = writeln!(out, "\n## Aggregate\n");
    let _ = writeln!(out, "| Method | Runs | PSNR | SSIM | ERGAS | SAM | Seconds |");
    let _ = writeln!(out, "|---|---:|---:|---:|---:|---:|---:|");
    if !cfg.images.is_empty() && !cfg.sigmas.is_empty() {
        for m in &cfg.methods {
            match mean_block(runs.iter().filter(|r| r.method == m.name())) {
                Some((b, s, n)) => {
                    let _ = writeln!(out, "| {} | {n} | {} | {} |", m.name(), metric_cells(&b), seconds_cell(cfg, s));
                }
                None => {
                    let _ = writeln!(out, "| {} | 0 | - | - | - | - | - |", m.name());
                }
            }
        }
    }
    out
}

fn render_csv(cfg: &BenchConfig, noisy: &[RunRow], runs: &[RunRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in noisy.iter().chain(runs) {
        if let Ok((m, s)) = &r.outcome {
            let secs = if cfg.timings { *s } else { 0.0 };
            let _ = writeln!(out, "{}", csv_row(&r.method, r.sigma, m, secs));
        }
    }
    out
}
