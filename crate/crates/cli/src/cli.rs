use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use mstsvd::eval::{add_awgn, add_awgn_band_ramp, add_stripes, csv_row, MetricBlock, CSV_HEADER};
use mstsvd::pipeline::training_image;
use mstsvd::theorems::run_oracles;
use mstsvd::{default_params, denoise_with_basis, FilterParams, ImageKind, Method, WeightMode};

use crate::bench::{run_bench, BenchConfig};
use crate::cache::load_or_train;
use crate::error::{CliError, CliResult};
use crate::io::{read_image, write_image};

#[derive(Debug, Parser)]
#[command(name = "mstsvd", version, about = "Color and multispectral image denoising with t-SVD bases and local PCA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Weights {
    Uniform,
    Sparsity,
}

impl From<Weights> for WeightMode {
    fn from(w: Weights) -> Self {
        match w {
            Weights::Uniform => WeightMode::Uniform,
            Weights::Sparsity => WeightMode::Sparsity,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Denoise an image (.png, .msi or a band directory).
    Denoise {
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        ps: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        sr: Option<usize>,
        #[arg(long)]
        step: Option<usize>,
        #[arg(long, value_enum)]
        weights: Option<Weights>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Train the global basis on this many randomly chosen reference patches.
        #[arg(long)]
        training_patches: Option<usize>,
        /// Directory for cached global bases.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Clean reference; prints the metric CSV row when given.
        #[arg(long)]
        clean: Option<PathBuf>,
        /// Write the run report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Add synthetic noise.
    AddNoise {
        #[arg(long)]
        sigma: Option<f64>,
        /// Per-band noise level ramp `LO:HI`.
        #[arg(long)]
        ramp: Option<String>,
        /// Vertical stripes `BANDS:AMP`, bands comma separated.
        #[arg(long)]
        stripes: Option<String>,
        #[arg(long)]
        seed: u64,
        input: PathBuf,
        output: PathBuf,
    },
    /// Print `method,sigma,psnr,ssim,ergas,sam,seconds` for a test image.
    Metrics {
        clean: PathBuf,
        test: PathBuf,
        #[arg(long, default_value = "none")]
        method: String,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.0)]
        seconds: f64,
        /// Print the CSV header first.
        #[arg(long)]
        header: bool,
    },
    /// Run a (method x sigma) benchmark matrix from a TOML file.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check the block circulant identities on random instances.
    SelfTest {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

fn parse_pair(s: &str, what: &str) -> CliResult<(String, String)> {
    let (a, b) = s
        .rsplit_once(':')
        .ok_or_else(|| CliError::Argument(format!("--{what} expects `A:B`, got `{s}`")))?;
    Ok((a.trim().to_string(), b.trim().to_string()))
}

fn parse_f64(s: &str, what: &str) -> CliResult<f64> {
    s.parse().map_err(|_| CliError::Argument(format!("--{what}: `{s}` is not a number")))
}

fn parse_ramp(s: &str) -> CliResult<(f64, f64)> {
    let (lo, hi) = parse_pair(s, "ramp")?;
    Ok((parse_f64(&lo, "ramp")?, parse_f64(&hi, "ramp")?))
}

fn parse_stripes(s: &str) -> CliResult<(Vec<usize>, f64)> {
    let (bands, amp) = parse_pair(s, "stripes")?;
    let bands = bands
        .split(',')
        .map(|b| b.trim().parse().map_err(|_| CliError::Argument(format!("--stripes: bad band index `{b}`"))))
        .collect::<CliResult<Vec<usize>>>()?;
    Ok((bands, parse_f64(&amp, "stripes")?))
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mstsvd: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Denoise {
            method,
            sigma,
            gamma,
            ps,
            k,
            sr,
            step,
            weights,
            threads,
            seed,
            training_patches,
            cache,
            clean,
            report,
            input,
            output,
        } => {
            let img = read_image(&input)?;
            let mut params = default_params(method, ImageKind::of(&img), sigma);
            if let Some(v) = gamma {
                params.gamma = v;
            }
            if let Some(v) = ps {
                params.ps = v;
            }
            if let Some(v) = k {
                params.group_size = v;
            }
            if let Some(v) = sr {
                params.search_radius = v;
            }
            if let Some(v) = step {
                params.step = v;
            }
            if let Some(w) = weights {
                params.weight_mode = w.into();
            }
            params.threads = threads;
            params.seed = seed;
            params.training_patches = training_patches;
            params.validate()?;
            run_denoise(&img, &params, cache.as_deref(), clean.as_deref(), report.as_deref(), &output)
        }
        Command::AddNoise { sigma, ramp, stripes, seed, input, output } => {
            let img = read_image(&input)?;
            let mut noisy = match (sigma, ramp) {
                (Some(s), None) => add_awgn(&img, s, seed)?,
                (None, Some(r)) => {
                    let (lo, hi) = parse_ramp(&r)?;
                    add_awgn_band_ramp(&img, lo, hi, seed)?
                }
                (None, None) if stripes.is_some() => img,
                (None, None) => return Err(CliError::Argument("add-noise needs --sigma, --ramp or --stripes".into())),
                (Some(_), Some(_)) => return Err(CliError::Argument("--sigma and --ramp are mutually exclusive".into())),
            };
            if let Some(s) = stripes {
                let (bands, amp) = parse_stripes(&s)?;
                noisy = add_stripes(&noisy, &bands, amp, seed)?;
            }
            write_image(&output, &noisy)
        }
        Command::Metrics { clean, test, method, sigma, seconds, header } => {
            let (a, b) = (read_image(&clean)?, read_image(&test)?);
            let m = MetricBlock::compute(&a, &b)?;
            if header {
                println!("{CSV_HEADER}");
            }
            println!("{}", csv_row(&method, sigma, &m, seconds));
            Ok(())
        }
        Command::Bench { config } => {
            let text = fs::read_to_string(&config).map_err(|e| CliError::io(config.display(), e))?;
            let cfg = BenchConfig::from_toml(&text)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let report = run_bench(&cfg, base)?;
            match &cfg.output {
                Some(p) => {
                    let p = base.join(p);
                    fs::write(&p, &report.markdown).map_err(|e| CliError::io(p.display(), e))?;
                }
                None => print!("{}", report.markdown),
            }
            if let Some(p) = &cfg.csv {
                let p = base.join(p);
                fs::write(&p, &report.csv).map_err(|e| CliError::io(p.display(), e))?;
            }
            match report.first_error {
                Some((2, msg)) => Err(CliError::Argument(format!("some runs failed; first: {msg}"))),
                Some((3, msg)) => Err(CliError::Io(format!("some runs failed; first: {msg}"))),
                Some((_, msg)) => Err(CliError::Invariant(format!("some runs failed; first: {msg}"))),
                None => Ok(()),
            }
        }
        Command::SelfTest { instances, seed } => {
            if instances == 0 {
                return Err(CliError::Argument("--instances must be positive".into()));
            }
            let reports = run_oracles(instances, seed)?;
            let mut failed = 0;
            for r in &reports {
                println!(
                    "{} {} (max relative error {:.3e}, tolerance {:.0e}, {} instances)",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.max_rel_error,
                    r.tolerance,
                    r.instances
                );
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                return Err(CliError::Invariant(format!("{failed} oracle(s) failed")));
            }
            Ok(())
        }
    }
}

fn run_denoise(
    img: &mstsvd::Image,
    params: &FilterParams,
    cache: Option<&Path>,
    clean: Option<&Path>,
    report_path: Option<&Path>,
    output: &Path,
) -> CliResult<()> {
    let basis = match (cache, training_image(img, params.method)) {
        (Some(dir), Some(training)) => {
            let (gb, _hit) = load_or_train(dir, &training, params)?;
            Some(gb)
        }
        _ => None,
    };
    let (out, mut report) = denoise_with_basis(img, params, basis.as_ref())?;
    write_image(output, &out)?;
    if let Some(path) = clean {
        let reference = read_image(path)?;
        let m = MetricBlock::compute(&reference, &out)?;
        println!("{}", csv_row(params.method.name(), params.sigma, &m, report.seconds));
        report.metrics = Some(m);
    }
    if let Some(path) = report_path {
        let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Invariant(e.to_string()))?;
        fs::write(path, json).map_err(|e| CliError::io(path.display(), e))?;
    }
    eprintln!(
        "{}: {}x{}x{} in {:.2} s, {} groups, tau {:.2}",
        params.method,
        img.height(),
        img.width(),
        img.channels(),
        report.seconds,
        report.groups,
        report.tau
    );
    Ok(())
}
