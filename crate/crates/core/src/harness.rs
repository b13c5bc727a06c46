//! Experiment driver behind the `supoly` binary.
//!
//! Every subcommand writes `<stem>.csv` (or `<stem>.txt` for `sample`) and
//! `<stem>.json`. Files are written as `*.partial` and renamed once complete,
//! so a failed run never clobbers an earlier good result. CSV files open with
//! `#` metadata lines that reproduce them exactly; thread count and wall-clock
//! live only in the JSON summary.

use crate::ensemble::{fmt17, ComplexPoint, EnsembleSpec, Sampler};
use crate::hole::{
    deviation_experiment, fit_decay_exponent, hole_probability_mc, omega_lower_bound, DecayFit, DecayPoint,
};
use crate::mobius::{evaluate_shifted_normalized, norm_n, transform_coefficients, BasisTransform, MobiusParameter};
use crate::rng::{Domain, StreamKey, GENERATOR_ID};
use crate::roots::roots_m1;
use crate::zeros::{counting_exact_m1_with_retry, counting_jensen, expected_counting, jensen_constant, sphere_log_average};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Default directory for output files when `--out` is not given.
pub const OUTPUT_DIR_ENV: &str = "SUPOLY_OUTPUT_DIR";

/// Stream domain for the evaluation points of `invariance-check`.
const INVARIANCE_POINTS: Domain = Domain::Custom(0x4956);

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(crate::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Numeric(_) => EXIT_NUMERIC,
            _ => EXIT_CONFIG,
        }
    }
}

impl From<crate::Error> for HarnessError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::Domain(msg) => HarnessError::Config(msg),
            other => HarnessError::Numeric(other),
        }
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, HarnessError> {
    Err(HarnessError::Config(msg.into()))
}

/// Degrees given as `5`, `4,8,12` or `a:b:step`; always strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeList(pub Vec<u32>);

impl std::str::FromStr for DegreeList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = |_| format!("invalid degree list `{s}`");
        let parts: Vec<&str> = s.split(':').collect();
        let values: Vec<u32> = match parts.len() {
            1 => s.split(',').map(|x| x.trim().parse::<u32>().map_err(bad)).collect::<Result<_, _>>()?,
            3 => {
                let a: u32 = parts[0].trim().parse().map_err(bad)?;
                let b: u32 = parts[1].trim().parse().map_err(bad)?;
                let step: u32 = parts[2].trim().parse().map_err(bad)?;
                if step == 0 || a > b {
                    return Err(format!("range `{s}` needs a <= b and step > 0"));
                }
                (a..=b).step_by(step as usize).collect()
            }
            _ => return Err(format!("invalid degree list `{s}`; use N, N1,N2,... or a:b:step")),
        };
        if values.is_empty() {
            return Err("empty degree list".into());
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("degree list `{s}` must be strictly increasing"));
        }
        Ok(DegreeList(values))
    }
}

impl fmt::Display for DegreeList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(u32::to_string).collect();
        f.write_str(&s.join(","))
    }
}

/// Radii given as `r` or `r1,r2,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusList(pub Vec<f64>);

impl std::str::FromStr for RadiusList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let values: Vec<f64> = s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| format!("invalid radius `{x}`")))
            .collect::<Result<_, _>>()?;
        if values.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err("radii must be positive and finite".into());
        }
        Ok(RadiusList(values))
    }
}

impl fmt::Display for RadiusList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(f64::to_string).collect();
        f.write_str(&s.join(","))
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "supoly", version, about = "Gaussian random SU(m+1) polynomial experiments")]
pub struct ExperimentConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads [default: available cores]
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output path stem; extensions are appended [default: $SUPOLY_OUTPUT_DIR/<subcommand>]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Dump the coefficients of one sampled polynomial
    Sample(SampleArgs),
    /// Roots of sampled one-variable polynomials
    Roots(RootsArgs),
    /// Exact and sphere-average counts of zeros in a ball
    Counting(CountingArgs),
    /// Sphere averages of log|psi|
    SphereAvg(SphereAvgArgs),
    /// Monte Carlo hole probability (one variable)
    HoleMc(HoleMcArgs),
    /// Exact coefficient-box lower bound on the hole probability
    OmegaBound(OmegaArgs),
    /// Fit log(-log p) against log N from a CSV of (N, p) rows
    FitExponent(FitArgs),
    /// Frequency of large deviations of the zero count from its mean
    Deviation(DeviationArgs),
    /// Unitarity and pointwise agreement of the shifted basis expansion
    InvarianceCheck(InvarianceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long = "N")]
    pub degree: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
}

#[derive(Debug, Clone, Args)]
pub struct RootsArgs {
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long = "N")]
    pub degree: u32,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CountingArgs {
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long = "N")]
    pub degree: u32,
    #[arg(long)]
    pub r: f64,
    #[arg(long, default_value_t = 1.05)]
    pub kappa: f64,
    /// Sphere samples per average
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SphereAvgArgs {
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long = "N")]
    pub degree: u32,
    #[arg(long)]
    pub r: f64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct HoleMcArgs {
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Degree, list or range a:b:step
    #[arg(long = "N", visible_alias = "N-list")]
    pub degrees: DegreeList,
    /// Radius or comma-separated radii
    #[arg(long, visible_alias = "r-list")]
    pub r: RadiusList,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fit the decay exponent per radius
    #[arg(long)]
    pub fit: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OmegaArgs {
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long = "N", visible_alias = "N-list")]
    pub degrees: DegreeList,
    #[arg(long, visible_alias = "r-list")]
    pub r: RadiusList,
    #[arg(long)]
    pub fit: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV with an `N` column and one of `log_prob`, `p_hat` or `p`
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DeviationArgs {
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long = "N", visible_alias = "N-list")]
    pub degrees: DegreeList,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long = "Delta", default_value_t = 0.2)]
    pub delta: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct InvarianceArgs {
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long = "N")]
    pub degree: u32,
    #[arg(long = "zeta-re", default_value_t = 0.0, allow_hyphen_values = true)]
    pub zeta_re: f64,
    #[arg(long = "zeta-im", default_value_t = 0.0, allow_hyphen_values = true)]
    pub zeta_im: f64,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Roots(_) => "roots",
            Command::Counting(_) => "counting",
            Command::SphereAvg(_) => "sphere-avg",
            Command::HoleMc(_) => "hole-mc",
            Command::OmegaBound(_) => "omega-bound",
            Command::FitExponent(_) => "fit-exponent",
            Command::Deviation(_) => "deviation",
            Command::InvarianceCheck(_) => "invariance-check",
        }
    }

    /// Command line reproducing this run, without `--threads` and `--out`.
    pub fn canonical(&self) -> String {
        let rest = match self {
            Command::Sample(a) => format!("--m {} --N {} --seed {} --trial {}", a.m, a.degree, a.seed, a.trial),
            Command::Roots(a) => format!("--m {} --N {} --trials {} --seed {}", a.m, a.degree, a.trials, a.seed),
            Command::Counting(a) => format!(
                "--m {} --N {} --r {} --kappa {} --samples {} --trials {} --seed {}",
                a.m, a.degree, a.r, a.kappa, a.samples, a.trials, a.seed
            ),
            Command::SphereAvg(a) => format!(
                "--m {} --N {} --r {} --samples {} --trials {} --seed {}",
                a.m, a.degree, a.r, a.samples, a.trials, a.seed
            ),
            Command::HoleMc(a) => format!(
                "--m {} --N {} --r {} --trials {} --seed {}{}",
                a.m,
                a.degrees,
                a.r,
                a.trials,
                a.seed,
                if a.fit { " --fit" } else { "" }
            ),
            Command::OmegaBound(a) => {
                format!("--m {} --N {} --r {}{}", a.m, a.degrees, a.r, if a.fit { " --fit" } else { "" })
            }
            Command::FitExponent(a) => format!("--input {}", a.input.display()),
            Command::Deviation(a) => format!(
                "--m {} --N {} --r {} --Delta {} --trials {} --seed {}",
                a.m, a.degrees, a.r, a.delta, a.trials, a.seed
            ),
            Command::InvarianceCheck(a) => format!(
                "--m {} --N {} --zeta-re {} --zeta-im {} --points {} --seed {}",
                a.m, a.degree, a.zeta_re, a.zeta_im, a.points, a.seed
            ),
        };
        format!("supoly {} {rest}", self.name())
    }
}

/// An `f64` serialized with 17 significant digits; non-finite values become `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F17(pub f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let raw = RawValue::from_string(fmt17(self.0)).map_err(serde::ser::Error::custom)?;
            raw.serialize(s)
        } else {
            s.serialize_none()
        }
    }
}

#[derive(Serialize)]
struct Summary<'a, T> {
    tool: &'static str,
    version: &'static str,
    generator: &'static str,
    command: String,
    threads: usize,
    wall_clock_seconds: F17,
    results: &'a T,
}

fn with_extension(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// An output file written under `*.partial` and renamed on [`Artifact::finish`].
struct Artifact {
    path: PathBuf,
    partial: PathBuf,
    w: BufWriter<File>,
}

impl Artifact {
    fn create(path: PathBuf) -> Result<Self, HarnessError> {
        let io_err = |source| HarnessError::Io { path: path.clone(), source };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err)?;
        }
        let partial = with_extension(&path, "partial");
        let f = File::create(&partial).map_err(|source| HarnessError::Io { path: partial.clone(), source })?;
        Ok(Artifact { path, partial, w: BufWriter::new(f) })
    }

    fn csv(path: PathBuf, command: &Command, header: &str) -> Result<Self, HarnessError> {
        let mut a = Artifact::create(path)?;
        a.line(&format!("# supoly {}", env!("CARGO_PKG_VERSION")))?;
        a.line(&format!("# generator {GENERATOR_ID}"))?;
        a.line(&format!("# command {}", command.canonical()))?;
        a.line(header)?;
        Ok(a)
    }

    fn line(&mut self, s: &str) -> Result<(), HarnessError> {
        writeln!(self.w, "{s}").map_err(|source| HarnessError::Io { path: self.partial.clone(), source })
    }

    fn finish(self) -> Result<PathBuf, HarnessError> {
        let Artifact { path, partial, w } = self;
        let io_err = |source| HarnessError::Io { path: partial.clone(), source };
        let f = w.into_inner().map_err(|e| io_err(e.into_error()))?;
        f.sync_all().map_err(io_err)?;
        drop(f);
        fs::rename(&partial, &path).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
        Ok(path)
    }
}

struct Context<'a> {
    command: &'a Command,
    stem: PathBuf,
    threads: usize,
    pool: rayon::ThreadPool,
    started: Instant,
}

impl Context<'_> {
    /// Runs `f` on the configured worker pool.
    fn par<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    fn csv(&self, header: &str) -> Result<Artifact, HarnessError> {
        Artifact::csv(with_extension(&self.stem, "csv"), self.command, header)
    }

    fn summary<T: Serialize>(&self, results: &T) -> Result<String, HarnessError> {
        let ser = |e: serde_json::Error| HarnessError::Config(format!("serializing summary: {e}"));
        let summary = Summary {
            tool: "supoly",
            version: env!("CARGO_PKG_VERSION"),
            generator: GENERATOR_ID,
            command: self.command.canonical(),
            threads: self.threads,
            wall_clock_seconds: F17(self.started.elapsed().as_secs_f64()),
            results,
        };
        let text = serde_json::to_string_pretty(&summary).map_err(ser)?;
        let mut a = Artifact::create(with_extension(&self.stem, "json"))?;
        a.line(&text)?;
        a.finish()?;
        Ok(text)
    }
}

fn spec(m: usize, degree: u32, seed: u64) -> Result<EnsembleSpec, HarnessError> {
    Ok(EnsembleSpec::new(m, degree, seed)?)
}

fn check_radius(r: f64) -> Result<(), HarnessError> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        config_err("--r must be positive and finite")
    }
}

fn check_trials(t: u64) -> Result<(), HarnessError> {
    if t == 0 {
        config_err("--trials must be at least 1")
    } else {
        Ok(())
    }
}

fn require_m1(m: usize, what: &str) -> Result<(), HarnessError> {
    if m == 1 {
        Ok(())
    } else {
        config_err(format!(
            "{what} needs m = 1 (exact roots); for m >= 2 use omega-bound for the certified lower bound \
             or counting for the heuristic sphere-average indicator"
        ))
    }
}

/// Writes per-trial rows in trial order; the first failing trial aborts with the file left partial.
fn write_rows<T>(
    out: &mut Artifact,
    rows: Vec<Result<T, crate::Error>>,
    mut fmt_row: impl FnMut(&T) -> Vec<String>,
) -> Result<Vec<T>, HarnessError> {
    let mut done = Vec::with_capacity(rows.len());
    for row in rows {
        let row = row?;
        for line in fmt_row(&row) {
            out.line(&line)?;
        }
        done.push(row);
    }
    Ok(done)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

#[derive(Serialize)]
struct FitSummary {
    radius: Option<F17>,
    beta: F17,
    log_c: F17,
    residual_rms: F17,
    reference_exponent: Option<usize>,
    points_used: usize,
}

impl FitSummary {
    fn new(fit: &DecayFit, radius: Option<f64>, m: Option<usize>) -> Self {
        FitSummary {
            radius: radius.map(F17),
            beta: F17(fit.beta),
            log_c: F17(fit.log_c),
            residual_rms: F17(fit.residual_rms),
            reference_exponent: m.map(|m| m + 1),
            points_used: fit.points.len(),
        }
    }
}

/// Fits per radius over the fittable points; cells with `p` of 0 or 1 are skipped with a warning.
fn fits_per_radius(
    m: usize,
    radii: &[f64],
    points: &[(f64, DecayPoint)],
    warn: &mut dyn Write,
) -> Result<Vec<FitSummary>, HarnessError> {
    let mut fits = Vec::new();
    for &r in radii {
        let mut usable = Vec::new();
        for (pr, p) in points.iter().filter(|(pr, _)| *pr == r) {
            if p.is_fittable() {
                usable.push(*p);
            } else {
                let _ = writeln!(warn, "warning: r = {pr}, N = {} has p outside (0, 1); excluded from fit", p.degree);
            }
        }
        if usable.len() < 3 {
            let _ = writeln!(warn, "warning: r = {r}: fewer than three fittable points, no fit");
            continue;
        }
        fits.push(FitSummary::new(&fit_decay_exponent(&usable)?, Some(r), Some(m)));
    }
    Ok(fits)
}

fn run_sample(ctx: &Context, a: &SampleArgs, stdout: &mut dyn Write) -> Result<(), HarnessError> {
    let s = spec(a.m, a.degree, a.seed)?;
    let psi = Sampler::new(s).sample(a.trial);
    let dump = psi.to_dump();
    let mut out = Artifact::create(with_extension(&ctx.stem, "txt"))?;
    for line in dump.lines() {
        out.line(line)?;
    }
    out.finish()?;
    #[derive(Serialize)]
    struct R {
        m: usize,
        degree: u32,
        seed: u64,
        trial: u64,
        coefficient_count: usize,
        l2_norm: F17,
    }
    ctx.summary(&R {
        m: a.m,
        degree: a.degree,
        seed: a.seed,
        trial: a.trial,
        coefficient_count: psi.alpha().len(),
        l2_norm: F17(norm_n(&psi)),
    })?;
    let _ = stdout.write_all(dump.as_bytes());
    Ok(())
}

fn run_roots(ctx: &Context, a: &RootsArgs, stdout: &mut dyn Write) -> Result<(), HarnessError> {
    require_m1(a.m, "roots")?;
    check_trials(a.trials)?;
    let sampler = Sampler::new(spec(a.m, a.degree, a.seed)?);
    let mut out = ctx.csv("trial,index,re,im,modulus,residual")?;
    let rows: Vec<_> = ctx.par(|| {
        (0..a.trials)
            .into_par_iter()
            .map(|t| roots_m1(&sampler.sample(t)).map(|rs| (t, rs)))
            .collect()
    });
    let sets = write_rows(&mut out, rows, |(t, rs)| {
        rs.roots
            .iter()
            .zip(&rs.residuals)
            .enumerate()
            .map(|(i, (z, res))| format!("{t},{i},{},{},{},{}", fmt17(z.re), fmt17(z.im), fmt17(z.norm()), fmt17(*res)))
            .collect()
    })?;
    out.finish()?;
    #[derive(Serialize)]
    struct R {
        trials: u64,
        roots_found: usize,
        degree_deficit: usize,
        max_residual: F17,
    }
    let text = ctx.summary(&R {
        trials: a.trials,
        roots_found: sets.iter().map(|(_, s)| s.len()).sum(),
        degree_deficit: sets.iter().map(|(_, s)| s.degree_deficit).sum(),
        max_residual: F17(sets.iter().flat_map(|(_, s)| s.residuals.iter().copied()).fold(0.0, f64::max)),
    })?;
    let _ = writeln!(stdout, "{text}");
    Ok(())
}

fn run_counting(ctx: &Context, a: &CountingArgs, stdout: &mut dyn Write) -> Result<(), HarnessError> {
    check_radius(a.r)?;
    check_trials(a.trials)?;
    if !(a.kappa > 1.0 && a.kappa.is_finite()) {
        return config_err("--kappa must exceed 1");
    }
    if a.samples < 2 {
        return config_err("--samples must be at least 2");
    }
    let s = spec(a.m, a.degree, a.seed)?;
    let sampler = Sampler::new(s);
    let exact = a.m == 1;
    let mut out = ctx.csv("m,N,r,trial,n_exact,n_jensen,stat_error,kappa")?;
    let rows: Vec<_> = ctx.par(|| {
        (0..a.trials)
            .into_par_iter()
            .map(|t| {
                let psi = sampler.sample(t);
                let n_exact = if exact {
                    Some(counting_exact_m1_with_retry(&psi, a.r)?.0)
                } else {
                    None
                };
                let mut stream = StreamKey::new(a.seed, Domain::Sphere, t).stream();
                let est = counting_jensen(&psi, a.r, a.kappa, a.samples, &mut stream)?;
                Ok((t, n_exact, est))
            })
            .collect()
    });
    let done = write_rows(&mut out, rows, |(t, n, est)| {
        vec![format!(
            "{},{},{},{t},{},{},{},{}",
            a.m,
            a.degree,
            fmt17(a.r),
            n.map(|n| n.to_string()).unwrap_or_default(),
            fmt17(est.value),
            fmt17(est.stat_error),
            fmt17(a.kappa)
        )]
    })?;
    out.finish()?;
    #[derive(Serialize)]
    struct R {
        m: usize,
        degree: u32,
        radius: F17,
        trials: u64,
        kappa: F17,
        jensen_constant: F17,
        mean_n_exact: Option<F17>,
        mean_n_jensen: F17,
        expected_mean_one_variable: Option<F17>,
        /// For m >= 2 the sphere-average count is the only estimate; read it as a heuristic hole indicator.
        exact_counts: bool,
    }
    let text = ctx.summary(&R {
        m: a.m,
        degree: a.degree,
        radius: F17(a.r),
        trials: a.trials,
        kappa: F17(a.kappa),
        jensen_constant: F17(jensen_constant()),
        mean_n_exact: exact.then(|| F17(mean(done.iter().filter_map(|r| r.1).map(|n| n as f64)))),
        mean_n_jensen: F17(mean(done.iter().map(|r| r.2.value))),
        expected_mean_one_variable: exact.then(|| F17(expected_counting(a.degree, a.r))),
        exact_counts: exact,
    })?;
    let _ = writeln!(stdout, "{text}");
    Ok(())
}

fn run_sphere_avg(ctx: &Context, a: &SphereAvgArgs, stdout: &mut dyn Write) -> Result<(), HarnessError> {
    check_radius(a.r)?;
    check_trials(a.trials)?;
    if a.samples < 2 {
        return config_err("--samples must be at least 2");
    }
    let sampler = Sampler::new(spec(a.m, a.degree, a.seed)?);
    let mut out = ctx.csv("m,N,r,trial,samples,mean_log_abs,stderr")?;
    let rows: Vec<_> = ctx.par(|| {
        (0..a.trials)
            .into_par_iter()
            .map(|t| {
                let mut stream = StreamKey::new(a.seed, Domain::Sphere, t).stream();
                sphere_log_average(&sampler.sample(t), a.r, a.samples, &mut stream).map(|s| (t, s))
            })
            .collect()
    });
    let done = write_rows(&mut out, rows, |(t, s)| {
        vec![format!(
            "{},{},{},{t},{},{},{}",
            a.m,
            a.degree,
            fmt17(a.r),
            s.samples,
            fmt17(s.mean_log_abs),
            fmt17(s.stderr)
        )]
    })?;
    out.finish()?;
    #[derive(Serialize)]
    struct R {
        trials: u64,
        samples: usize,
        mean_log_abs: F17,
    }
    let text = ctx.summary(&R {
        trials: a.trials,
        samples: a.samples,
        mean_log_abs: F17(mean(done.iter().map(|(_, s)| s.mean_log_abs))),
    })?;
    let _ = writeln!(stdout, "{text}");
    Ok(())
}

fn run_hole_mc(ctx: &Context, a: &HoleMcArgs, stdout: &mut dyn Write, warn: &mut dyn Write) -> Result<(), HarnessError> {
    require_m1(a.m, "hole-mc")?;
    check_trials(a.trials)?;
    for &n in &a.degrees.0 {
        spec(a.m, n, a.seed)?;
    }
    let mut out = ctx.csv("m,N,r,trials,hits,p_hat,stderr")?;
    #[derive(Serialize)]
    struct Row {
        m: usize,
        degree: u32,
        radius: F17,
        trials: u64,
        hits: u64,
        p_hat: F17,
        stderr: F17,
    }
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &r in &a.r.0 {
        for &n in &a.degrees.0 {
            let s = spec(a.m, n, a.seed)?;
            let est = ctx.par(|| hole_probability_mc(s, r, a.trials))?;
            out.line(&format!(
                "{},{n},{},{},{},{},{}",
                a.m,
                fmt17(r),
                est.trials,
                est.hits,
                fmt17(est.p_hat),
                fmt17(est.stderr)
            ))?;
            points.push((r, DecayPoint::from_probability(n as f64, est.p_hat)));
            rows.push(Row {
                m: a.m,
                degree: n,
                radius: F17(r),
                trials: est.trials,
                hits: est.hits,
                p_hat: F17(est.p_hat),
                stderr: F17(est.stderr),
            });
        }
    }
    out.finish()?;
    let fits = if a.fit {
        Some(fits_per_radius(a.m, &a.r.0, &points, warn)?)
    } else {
        None
    };
    #[derive(Serialize)]
    struct R {
        rows: Vec<Row>,
        fits: Option<Vec<FitSummary>>,
    }
    let text = ctx.summary(&R { rows, fits })?;
    let _ = writeln!(stdout, "{text}");
    Ok(())
}

fn run_omega(ctx: &Context, a: &OmegaArgs, stdout: &mut dyn Write, warn: &mut dyn Write) -> Result<(), HarnessError> {
    if a.degrees.0.contains(&0) {
        return config_err("omega-bound needs N >= 1");
    }
    let mut out = ctx.csv("m,N,r,log_prob")?;
    #[derive(Serialize)]
    struct Row {
        m: usize,
        degree: u32,
        radius: F17,
        log_prob: F17,
        term_count: u64,
        certificate: String,
    }
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &r in &a.r.0 {
        for &n in &a.degrees.0 {
            let b = omega_lower_bound(spec(a.m, n, 0)?, r)?;
            out.line(&format!("{},{n},{},{}", a.m, fmt17(r), fmt17(b.log_prob)))?;
            points.push((r, DecayPoint::from_log_probability(n as f64, b.log_prob)));
            rows.push(Row {
                m: a.m,
                degree: n,
                radius: F17(r),
                log_prob: F17(b.log_prob),
                term_count: b.term_count,
                certificate: b.certificate(),
            });
        }
    }
    out.finish()?;
    let fits = if a.fit {
        Some(fits_per_radius(a.m, &a.r.0, &points, warn)?)
    } else {
        None
    };
    #[derive(Serialize)]
    struct R<'a> {
        rows: &'a [Row],
        fits: Option<Vec<FitSummary>>,
    }
    ctx.summary(&R { rows: &rows, fits })?;
    for row in &rows {
        let _ = writeln!(stdout, "{}", row.certificate);
    }
    Ok(())
}

fn run_deviation(ctx: &Context, a: &DeviationArgs, stdout: &mut dyn Write) -> Result<(), HarnessError> {
    require_m1(a.m, "deviation")?;
    check_radius(a.r)?;
    check_trials(a.trials)?;
    if !(a.delta > 0.0 && a.delta < 1.0) {
        return config_err("--Delta must lie in (0, 1)");
    }
    let mut out = ctx.csv("m,N,r,Delta,trials,violations,frequency")?;
    #[derive(Serialize)]
    struct Row {
        degree: u32,
        violations: u64,
        frequency: F17,
    }
    let mut rows = Vec::new();
    for &n in &a.degrees.0 {
        let s = spec(a.m, n, a.seed)?;
        let d = ctx.par(|| deviation_experiment(s, a.r, a.delta, a.trials))?;
        out.line(&format!(
            "{},{n},{},{},{},{},{}",
            a.m,
            fmt17(a.r),
            fmt17(a.delta),
            d.trials,
            d.violations,
            fmt17(d.frequency)
        ))?;
        rows.push(Row { degree: n, violations: d.violations, frequency: F17(d.frequency) });
    }
    out.finish()?;
    #[derive(Serialize)]
    struct R {
        radius: F17,
        delta: F17,
        trials: u64,
        rows: Vec<Row>,
    }
    let text = ctx.summary(&R { radius: F17(a.r), delta: F17(a.delta), trials: a.trials, rows })?;
    let _ = writeln!(stdout, "{text}");
    Ok(())
}

fn run_invariance(ctx: &Context, a: &InvarianceArgs, stdout: &mut dyn Write) -> Result<(), HarnessError> {
    if a.points == 0 {
        return config_err("--points must be at least 1");
    }
    let s = spec(a.m, a.degree, a.seed)?;
    let zeta = MobiusParameter::new(Complex64::new(a.zeta_re, a.zeta_im))?;
    let transform = BasisTransform::new(s, zeta)?;
    let sampler = Sampler::new(s);
    let alpha_prime = sampler.sample(0).alpha().to_vec();
    let psi = crate::SUPolynomial::with_basis(s, sampler.basis().clone(), transform_coefficients(&alpha_prime, &transform)?)?;
    let mut stream = StreamKey::new(a.seed, INVARIANCE_POINTS, 0).stream();
    let mut out = ctx.csv("point,direct_re,direct_im,shifted_re,shifted_im,relative_error")?;
    let mut worst: f64 = 0.0;
    for k in 0..a.points {
        let z = ComplexPoint::new((0..a.m).map(|_| stream.complex_gaussian()).collect());
        let lhs = psi.evaluate_normalized(&z);
        let rhs = evaluate_shifted_normalized(sampler.basis(), zeta, &alpha_prime, &z)?;
        let scale = lhs.norm().max(rhs.norm());
        let rel = if scale > 0.0 { (lhs - rhs).norm() / scale } else { 0.0 };
        worst = worst.max(rel);
        out.line(&format!(
            "{k},{},{},{},{},{}",
            fmt17(lhs.re),
            fmt17(lhs.im),
            fmt17(rhs.re),
            fmt17(rhs.im),
            fmt17(rel)
        ))?;
    }
    out.finish()?;
    #[derive(Serialize)]
    struct R {
        side: usize,
        unitarity_defect: F17,
        max_relative_error: F17,
        points: usize,
    }
    let text = ctx.summary(&R {
        side: transform.side(),
        unitarity_defect: F17(transform.unitarity_defect()),
        max_relative_error: F17(worst),
        points: a.points,
    })?;
    let _ = writeln!(stdout, "{text}");
    Ok(())
}

/// A row of a points file that was left out of the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRow {
    pub line: usize,
    pub degree: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub fit: DecayFit,
    pub skipped: Vec<SkippedRow>,
    /// `m + 1` when the file carries a constant `m` column.
    pub reference_exponent: Option<usize>,
    pub radius: Option<f64>,
}

/// Reads `(N, p)` points from a CSV and fits the decay exponent.
///
/// `#` lines are metadata. The header must name `N` and one of `log_prob`,
/// `p_hat` or `p`. Rows with `p` equal to 0 or 1 are skipped; anything
/// unparseable is a configuration error.
pub fn fit_report(path: &Path) -> Result<FitReport, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let Some((_, header)) = lines.next() else {
        return config_err(format!("{}: no header row", path.display()));
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name);
    let Some(n_col) = find("N") else {
        return config_err(format!("{}: no `N` column", path.display()));
    };
    let (p_col, is_log) = match (find("log_prob"), find("p_hat"), find("p")) {
        (Some(c), _, _) => (c, true),
        (None, Some(c), _) | (None, None, Some(c)) => (c, false),
        _ => return config_err(format!("{}: need a `log_prob`, `p_hat` or `p` column", path.display())),
    };
    let (m_col, r_col) = (find("m"), find("r"));

    let mut points = Vec::new();
    let mut skipped = Vec::new();
    let mut ms = Vec::new();
    let mut rs: Vec<f64> = Vec::new();
    for (line, row) in lines {
        let f: Vec<&str> = row.split(',').map(str::trim).collect();
        if f.len() != cols.len() {
            return config_err(format!("{}:{line}: expected {} fields", path.display(), cols.len()));
        }
        let bad = |what: &str| HarnessError::Config(format!("{}:{line}: bad {what} `{row}`", path.display()));
        let degree: f64 = f[n_col].parse().map_err(|_| bad("N"))?;
        if !(degree >= 1.0 && degree.fract() == 0.0) {
            return Err(bad("N"));
        }
        let value: f64 = f[p_col].parse().map_err(|_| bad("probability"))?;
        let point = if is_log {
            if value.is_nan() || value > 0.0 {
                return Err(bad("log probability"));
            }
            DecayPoint::from_log_probability(degree, value)
        } else {
            if !(0.0..=1.0).contains(&value) {
                return Err(bad("probability"));
            }
            DecayPoint::from_probability(degree, value)
        };
        if let Some(c) = m_col {
            ms.push(f[c].parse::<usize>().map_err(|_| bad("m"))?);
        }
        if let Some(c) = r_col {
            let r: f64 = f[c].parse().map_err(|_| bad("r"))?;
            if !rs.contains(&r) {
                rs.push(r);
            }
        }
        if let Some(last) = points.last().map(|p: &DecayPoint| p.degree).or(skipped.last().map(|s: &SkippedRow| s.degree)) {
            if degree <= last {
                return config_err(format!("{}:{line}: N must be strictly increasing", path.display()));
            }
        }
        if point.is_fittable() {
            points.push(point);
        } else {
            skipped.push(SkippedRow { line, degree, reason: "p is 0 or 1".into() });
        }
    }
    if rs.len() > 1 {
        return config_err(format!("{}: rows mix several radii; split the file per r", path.display()));
    }
    if points.len() < 3 {
        return config_err(format!(
            "{}: need at least three rows with p strictly inside (0, 1), found {}",
            path.display(),
            points.len()
        ));
    }
    let reference_exponent = match ms.first() {
        Some(&m) if ms.iter().all(|&x| x == m) => Some(m + 1),
        _ => None,
    };
    Ok(FitReport {
        fit: fit_decay_exponent(&points)?,
        skipped,
        reference_exponent,
        radius: rs.first().copied(),
    })
}

fn run_fit(ctx: &Context, a: &FitArgs, stdout: &mut dyn Write, warn: &mut dyn Write) -> Result<(), HarnessError> {
    let report = fit_report(&a.input)?;
    for s in &report.skipped {
        let _ = writeln!(warn, "warning: line {} (N = {}) skipped: {}", s.line, s.degree, s.reason);
    }
    let mut out = ctx.csv("N,log_minus_log_p")?;
    for (n, y) in &report.fit.points {
        out.line(&format!("{n},{}", fmt17(*y)))?;
    }
    out.finish()?;
    #[derive(Serialize)]
    struct R {
        fit: FitSummary,
        skipped_rows: Vec<usize>,
    }
    let mut fit = FitSummary::new(&report.fit, report.radius, None);
    fit.reference_exponent = report.reference_exponent;
    ctx.summary(&R { fit, skipped_rows: report.skipped.iter().map(|s| s.line).collect() })?;
    let _ = writeln!(stdout, "beta = {}", fmt17(report.fit.beta));
    let _ = writeln!(stdout, "log_c = {}", fmt17(report.fit.log_c));
    let _ = writeln!(stdout, "residual_rms = {}", fmt17(report.fit.residual_rms));
    match report.reference_exponent {
        Some(e) => {
            let _ = writeln!(stdout, "reference exponent m+1 = {e}");
        }
        None => {
            let _ = writeln!(stdout, "reference exponent m+1 = unknown (no m column)");
        }
    }
    Ok(())
}

/// Runs a parsed configuration, writing human output to `stdout` and warnings to `warn`.
pub fn execute(config: &ExperimentConfig, stdout: &mut dyn Write, warn: &mut dyn Write) -> Result<(), HarnessError> {
    let threads = match config.threads {
        Some(0) => return config_err("--threads must be at least 1"),
        Some(t) => t,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let stem = match &config.out {
        Some(p) => p.clone(),
        None => {
            let dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
            dir.join(config.command.name())
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let ctx = Context { command: &config.command, stem, threads, pool, started: Instant::now() };
    match &config.command {
        Command::Sample(a) => run_sample(&ctx, a, stdout),
        Command::Roots(a) => run_roots(&ctx, a, stdout),
        Command::Counting(a) => run_counting(&ctx, a, stdout),
        Command::SphereAvg(a) => run_sphere_avg(&ctx, a, stdout),
        Command::HoleMc(a) => run_hole_mc(&ctx, a, stdout, warn),
        Command::OmegaBound(a) => run_omega(&ctx, a, stdout, warn),
        Command::FitExponent(a) => run_fit(&ctx, a, stdout, warn),
        Command::Deviation(a) => run_deviation(&ctx, a, stdout),
        Command::InvarianceCheck(a) => run_invariance(&ctx, a, stdout),
    }
}

/// Runs a configuration against the process streams and returns the exit status.
pub fn run(config: &ExperimentConfig) -> i32 {
    match execute(config, &mut io::stdout().lock(), &mut io::stderr().lock()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("supoly: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs them.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match ExperimentConfig::try_parse_from(args) {
        Ok(config) => run(&config),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_OK
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_lists_parse() {
        assert_eq!("5".parse::<DegreeList>().unwrap().0, vec![5]);
        assert_eq!("4,8,12".parse::<DegreeList>().unwrap().0, vec![4, 8, 12]);
        assert_eq!("20:200:20".parse::<DegreeList>().unwrap().0.len(), 10);
        assert_eq!("20:200:20".parse::<DegreeList>().unwrap().to_string(), "20,40,60,80,100,120,140,160,180,200");
        assert!("8,4".parse::<DegreeList>().is_err());
        assert!("4,4".parse::<DegreeList>().is_err());
        assert!("1:5:0".parse::<DegreeList>().is_err());
        assert!("5:1:1".parse::<DegreeList>().is_err());
        assert!("a".parse::<DegreeList>().is_err());
    }

    #[test]
    fn radius_lists_parse() {
        assert_eq!("0.5,1,2".parse::<RadiusList>().unwrap().0, vec![0.5, 1.0, 2.0]);
        assert!("-1".parse::<RadiusList>().is_err());
        assert!("0".parse::<RadiusList>().is_err());
    }

    #[test]
    fn f17_serializes_seventeen_digits() {
        let s = serde_json::to_string(&F17(0.1)).unwrap();
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(serde_json::from_str::<f64>(&s).unwrap(), 0.1);
        assert_eq!(serde_json::to_string(&F17(f64::NAN)).unwrap(), "null");
    }

    #[test]
    fn canonical_command_reparses_to_itself() {
        let c = ExperimentConfig::try_parse_from(
            "supoly hole-mc --N 4:12:4 --r 0.3,0.5 --trials 50 --seed 3 --threads 2".split(' '),
        )
        .unwrap();
        let again = ExperimentConfig::try_parse_from(c.command.canonical().split(' ')).unwrap();
        assert_eq!(again.command.canonical(), c.command.canonical());
        assert!(again.threads.is_none());
    }

    #[test]
    fn library_errors_map_to_exit_codes() {
        assert_eq!(HarnessError::from(crate::Error::Domain("x".into())).exit_code(), EXIT_CONFIG);
        assert_eq!(
            HarnessError::from(crate::Error::DegeneratePolynomial { threshold: 1e-300 }).exit_code(),
            EXIT_NUMERIC
        );
    }
}
