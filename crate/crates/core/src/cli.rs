//! Command-line front end: `estimate`, `test`, `table` and `simulate`.
//!
//! Output files are delimited text preceded by a run manifest in `# `
//! comment lines (TOML), so every file records how it was produced.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::hash::{DefaultHasher, Hasher};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ecf::{test_statistic, Hypothesis, TestOutcome};
use crate::error::{Error, Result};
use crate::estimators::{
    eise_fit, eise_fit_fixed_alpha, eise_matrices, fisher_info, fisher_location_scale, mle_fit, mle_fit_fixed_alpha, FitOptions, FitReport,
    WeightSpec,
};
use crate::inversion::{quantile_dk_bounded, InversionConfig, SeriesValue};
use crate::kernels::{KernelKind, KernelSpec};
use crate::montecarlo::{power_study, simulate_critical, Alternative, CriticalCurve, CriticalValue, EstimatorKind, ExperimentConfig, H1Method};
use crate::montecarlo::{h1_threshold, LEVELS};
use crate::spectral::{compute_spectrum, Spectrum, DEFAULT_NODES};

/// Environment variable naming the spectrum cache directory.
pub const CACHE_ENV: &str = "STABLE_GOF_CACHE";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "stable-gof", version, about = "Goodness-of-fit tests for symmetric stable laws")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit (μ, σ, α) to a column of data.
    Estimate(EstimateArgs),
    /// Compute D_{n,κ} and compare with asymptotic critical values.
    Test(TestArgs),
    /// Tabulate asymptotic critical values over an (α, κ) grid.
    Table(TableArgs),
    /// Run Monte Carlo experiments described in a config file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Text,
    Toml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorArg {
    Mle,
    Eise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightArg {
    /// e^{−ν|t|}
    ExpAbs,
    /// e^{−ν|t|^ᾱ}
    ExpPower,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WeightArgs {
    /// EISE weight family.
    #[arg(long, value_enum, default_value = "exp-abs")]
    pub weight: WeightArg,
    /// Weight constant ν.
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    /// Weight index ᾱ of the power weight.
    #[arg(long)]
    pub bar_alpha: Option<f64>,
}

impl WeightArgs {
    pub fn spec(&self) -> Result<WeightSpec> {
        match self.weight {
            WeightArg::ExpAbs => WeightSpec::exp_abs(self.nu),
            WeightArg::ExpPower => {
                let a = self
                    .bar_alpha
                    .ok_or_else(|| Error::InvalidParameter("--weight exp-power needs --bar-alpha".into()))?;
                WeightSpec::exp_power(self.nu, a)
            }
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    /// One numeric value per line; an optional header line is skipped.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "mle")]
    pub estimator: EstimatorArg,
    /// Hold α fixed at this value.
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[command(flatten)]
    pub weight: WeightArgs,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    /// Critical value at the estimated α.
    Plugin,
    /// Largest critical value over the table.
    SupAll,
    /// Largest critical value over --alpha-range.
    SupRange,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestArgs {
    pub input: PathBuf,
    /// Weight constants κ, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub kappa: Vec<f64>,
    #[arg(long, default_value = "H1")]
    pub hypothesis: Hypothesis,
    /// Hypothesized α (required under H2).
    #[arg(long)]
    pub alpha0: Option<f64>,
    /// How H1 critical values are chosen from the table.
    #[arg(long, value_enum, default_value = "plugin")]
    pub method: MethodArg,
    /// α interval for --method sup-range, as `a,b`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub alpha_range: Option<Vec<f64>>,
    /// Critical-value table written by `table`; computed on the fly when
    /// absent and a single α is needed.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Quadrature nodes for spectra computed on the fly.
    #[arg(long, default_value_t = DEFAULT_NODES)]
    pub nodes: usize,
    #[arg(long)]
    pub no_cache: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TableArgs {
    #[arg(long, default_value = "H1")]
    pub hypothesis: Hypothesis,
    /// α grid, comma separated. Defaults to 0.5, 0.6, …, 1.9 (H1) or 2.0 (H2).
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', default_value = "1,2.5,5,10")]
    pub kappas: Vec<f64>,
    /// Kernel; defaults to the MLE kernel of the hypothesis.
    #[arg(long)]
    pub kernel: Option<KernelKind>,
    #[command(flatten)]
    pub weight: WeightArgs,
    #[arg(long, default_value_t = DEFAULT_NODES)]
    pub nodes: usize,
    /// Series terms (default by κ, limited by the spectrum).
    #[arg(long)]
    pub l: Option<usize>,
    /// Eigenvalues in the products (default by κ, limited by the spectrum).
    #[arg(long)]
    pub m: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub no_cache: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// TOML file with one `[experiment.<name>]` section per experiment.
    pub config: PathBuf,
    /// Base seed; overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Record of how an output was produced. No wall-clock time is stored, so
/// reruns produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub parameters: toml::Table,
    #[serde(default)]
    pub spectra: Vec<CacheRecord>,
    /// Cells or experiments that failed; nonempty marks a partial file.
    #[serde(default)]
    pub failed: Vec<String>,
}

impl RunManifest {
    fn new<T: Serialize>(subcommand: &str, params: &T, seed: Option<u64>) -> Result<Self> {
        let parameters = toml::Table::try_from(params).map_err(|e| Error::Parse(format!("cannot record parameters: {e}")))?;
        Ok(Self {
            subcommand: subcommand.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            parameters,
            spectra: Vec::new(),
            failed: Vec::new(),
        })
    }

    fn to_comment(&self) -> Result<String> {
        let text = toml::to_string(self).map_err(|e| Error::Parse(format!("cannot write manifest: {e}")))?;
        Ok(text.lines().map(|l| if l.is_empty() { "#\n".to_string() } else { format!("# {l}\n") }).collect())
    }

    fn from_comment(lines: &[&str]) -> Result<Self> {
        let text: String = lines
            .iter()
            .map(|l| l.strip_prefix("# ").or_else(|| l.strip_prefix('#')).unwrap_or(l))
            .collect::<Vec<_>>()
            .join("\n");
        toml::from_str(&text).map_err(|e| Error::Parse(format!("bad manifest: {e}")))
    }
}

/// A spectrum read from or written to the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub file: String,
    /// Hash of the stored spectrum.
    pub version: String,
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) => EXIT_USAGE,
        Error::Parse(_) | Error::Io(_) | Error::DegenerateSample(_) | Error::MissingTable(_) => EXIT_INPUT,
        Error::Quadrature { .. }
        | Error::NonConvergence { .. }
        | Error::Eigen(_)
        | Error::Inversion(_)
        | Error::Bracket(_)
        | Error::Experiment(_) => EXIT_NUMERICAL,
    }
}

/// Parses `args`, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command, writing reports to `out`. Returns the exit code
/// for partial results (some cells failed) and `Err` for outright failure.
pub fn run<W: Write>(cli: Cli, out: &mut W) -> Result<i32> {
    match cli.command {
        Command::Estimate(a) => cmd_estimate(&a, out).map(|_| EXIT_OK),
        Command::Test(a) => cmd_test(&a, out).map(|_| EXIT_OK),
        Command::Table(a) => cmd_table(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
    }
}

/// Reads one numeric column. Blank lines and `#` comments are skipped, as is
/// a non-numeric first line (header); the first field of each line is used.
pub fn read_data(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut data = Vec::new();
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split([',', '\t', ';', ' ']).next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => data.push(v),
            Ok(_) => return Err(Error::Parse(format!("{} line {}: non-finite value {field:?}", path.display(), i + 1))),
            Err(_) if first => {}
            Err(_) => return Err(Error::Parse(format!("{} line {}: not a number: {field:?}", path.display(), i + 1))),
        }
        first = false;
    }
    if data.is_empty() {
        return Err(Error::Parse(format!("{}: no data", path.display())));
    }
    Ok(data)
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub estimator: EstimatorArg,
    pub n: usize,
    pub mu: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub se_mu: f64,
    pub se_sigma: f64,
    /// NaN when α is fixed or on the boundary α = 2.
    pub se_alpha: f64,
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub boundary: bool,
    pub alpha_fixed: bool,
}

/// Asymptotic standard errors of `(μ̂, σ̂, α̂)` from the inverse Fisher
/// information (MLE) or `J = A⁻¹HA⁻¹` (EISE), divided by `n`.
fn standard_errors(fit: &FitReport, n: usize, estimator: EstimatorArg, weight: Option<WeightSpec>) -> Result<[f64; 3]> {
    let p = fit.params;
    let n = n as f64;
    let var: [f64; 3] = match estimator {
        EstimatorArg::Mle if fit.alpha_fixed || p.alpha >= 2.0 => {
            let (i11, i22) = fisher_location_scale(p.alpha)?;
            [1.0 / i11, 1.0 / i22, f64::NAN]
        }
        EstimatorArg::Mle => {
            let inv = fisher_info(p.alpha)?.inverse()?;
            [inv.i11, inv.i22, inv.i33]
        }
        EstimatorArg::Eise => {
            let m = eise_matrices(p.alpha, weight.expect("EISE fit has a weight"))?;
            if fit.alpha_fixed {
                [m.h[0][0] / (m.a[0][0] * m.a[0][0]), m.h[1][1] / (m.a[1][1] * m.a[1][1]), f64::NAN]
            } else {
                [m.j[0][0], m.j[1][1], m.j[2][2]]
            }
        }
    };
    Ok([p.sigma * (var[0] / n).sqrt(), p.sigma * (var[1] / n).sqrt(), (var[2] / n).sqrt()])
}

pub fn cmd_estimate<W: Write>(args: &EstimateArgs, out: &mut W) -> Result<EstimateReport> {
    let data = read_data(&args.input)?;
    let opts = FitOptions::default();
    let weight = match args.estimator {
        EstimatorArg::Mle => None,
        EstimatorArg::Eise => Some(args.weight.spec()?),
    };
    let fit = match (args.estimator, args.alpha0, weight) {
        (EstimatorArg::Mle, None, _) => mle_fit(&data, &opts)?,
        (EstimatorArg::Mle, Some(a), _) => mle_fit_fixed_alpha(&data, a, &opts)?,
        (EstimatorArg::Eise, None, Some(w)) => eise_fit(&data, w, &opts)?,
        (EstimatorArg::Eise, Some(a), Some(w)) => eise_fit_fixed_alpha(&data, a, w, &opts)?,
        (EstimatorArg::Eise, _, None) => unreachable!(),
    };
    let se = standard_errors(&fit, data.len(), args.estimator, weight)?;
    let r = EstimateReport {
        estimator: args.estimator,
        n: data.len(),
        mu: fit.params.mu,
        sigma: fit.params.sigma,
        alpha: fit.params.alpha,
        se_mu: se[0],
        se_sigma: se[1],
        se_alpha: se[2],
        objective: fit.objective,
        gradient_norm: fit.gradient_norm,
        iterations: fit.iterations,
        boundary: fit.boundary,
        alpha_fixed: fit.alpha_fixed,
    };
    match args.format {
        Format::Toml => write_toml(out, &r)?,
        Format::Text => {
            let est = match r.estimator {
                EstimatorArg::Mle => "mle",
                EstimatorArg::Eise => "eise",
            };
            writeln!(out, "estimator      {est}")?;
            writeln!(out, "n              {}", r.n)?;
            writeln!(out, "mu             {}  (se {})", r.mu, r.se_mu)?;
            writeln!(out, "sigma          {}  (se {})", r.sigma, r.se_sigma)?;
            if r.alpha_fixed {
                writeln!(out, "alpha          {}  (fixed)", r.alpha)?;
            } else {
                writeln!(out, "alpha          {}  (se {})", r.alpha, r.se_alpha)?;
            }
            writeln!(out, "objective      {}", r.objective)?;
            writeln!(out, "gradient_norm  {:e}", r.gradient_norm)?;
            writeln!(out, "iterations     {}", r.iterations)?;
            if r.boundary {
                writeln!(out, "note           alpha on the boundary of the search range")?;
            }
        }
    }
    Ok(r)
}

fn write_toml<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Parse(format!("cannot format output: {e}")))?;
    out.write_all(text.as_bytes())?;
    Ok(())
}

/// Spectra on disk, keyed by kernel kind, α, κ, weight and node count.
#[derive(Debug, Clone)]
pub struct SpectrumCache {
    dir: Option<PathBuf>,
}

impl SpectrumCache {
    /// The directory from [`CACHE_ENV`], else the user cache directory.
    pub fn from_env() -> Self {
        let dir = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .or_else(|| std::env::var_os("XDG_CACHE_HOME").map(|d| PathBuf::from(d).join("stable-gof")))
            .or_else(|| std::env::var_os("HOME").map(|d| PathBuf::from(d).join(".cache").join("stable-gof")));
        Self { dir }
    }

    pub fn at(dir: PathBuf) -> Self {
        Self { dir: Some(dir) }
    }

    pub fn disabled() -> Self {
        Self { dir: None }
    }

    pub fn file_name(spec: &KernelSpec, nodes: usize) -> String {
        let mut name = format!("{}_a{}_k{}_n{nodes}", spec.kind, spec.alpha, spec.kappa);
        if let Some(w) = spec.weight {
            name.push_str(&format!("_w{}{}", w.index(), w.kappa_or_nu));
        }
        name + ".toml"
    }

    /// Loads the spectrum if cached with the same kernel, else computes and
    /// stores it.
    pub fn spectrum(&self, spec: KernelSpec, nodes: usize) -> Result<(Spectrum, Option<CacheRecord>)> {
        let Some(dir) = &self.dir else {
            return Ok((compute_spectrum(spec, nodes)?, None));
        };
        let name = Self::file_name(&spec, nodes);
        let path = dir.join(&name);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(s) = toml::from_str::<Spectrum>(&text) {
                if s.kernel == spec && s.n == nodes {
                    return Ok((s, Some(CacheRecord { file: name, version: content_hash(&text) })));
                }
            }
        }
        let s = compute_spectrum(spec, nodes)?;
        s.save(&path)?;
        let version = content_hash(&std::fs::read_to_string(&path)?);
        Ok((s, Some(CacheRecord { file: name, version })))
    }
}

fn content_hash(text: &str) -> String {
    let mut h = DefaultHasher::new();
    h.write(text.as_bytes());
    format!("{:016x}", h.finish())
}

/// One row of a critical-value table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub alpha: f64,
    pub kappa: f64,
    pub xi: f64,
    pub critical_value: f64,
    pub series_bound: f64,
}

fn default_alphas(h: Hypothesis) -> Vec<f64> {
    let top = match h {
        Hypothesis::H1 => 19,
        Hypothesis::H2 => 20,
    };
    (5..=top).map(|k| k as f64 / 10.0).collect()
}

fn critical_values(spectrum: &Spectrum, l: Option<usize>, m: Option<usize>) -> Result<Vec<(f64, SeriesValue)>> {
    let mut cfg = InversionConfig::for_spectrum(spectrum);
    if let Some(m) = m {
        cfg.m = m;
    }
    if let Some(l) = l {
        cfg.l = l;
    }
    LEVELS.iter().map(|&xi| Ok((xi, quantile_dk_bounded(xi, spectrum, &cfg)?))).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

pub fn cmd_table<W: Write>(args: &TableArgs, out: &mut W) -> Result<i32> {
    if args.kappas.is_empty() || args.kappas.iter().any(|&k| !(k >= 1.0 && k.is_finite())) {
        return Err(Error::InvalidParameter("table needs κ ≥ 1".into()));
    }
    let alphas = args.alphas.clone().unwrap_or_else(|| default_alphas(args.hypothesis));
    let kind = args.kernel.unwrap_or(match args.hypothesis {
        Hypothesis::H1 => KernelKind::MleH1,
        Hypothesis::H2 => KernelKind::MleH2,
    });
    let weight = match kind {
        KernelKind::EiseH1 | KernelKind::EiseFixed => Some(args.weight.spec()?),
        _ => None,
    };
    let cache = if args.no_cache { SpectrumCache::disabled() } else { SpectrumCache::from_env() };
    let cells: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| args.kappas.iter().map(move |&k| (a, k))).collect();
    // check the grid before spending time on any cell
    for &(a, k) in &cells {
        KernelSpec::new(kind, a, k, weight).map(|_| ()).or_else(|e| match e {
            Error::InvalidParameter(_) => Err(e),
            _ => Ok(()),
        })?;
    }
    let results: Vec<Result<(Vec<TableRow>, Option<CacheRecord>)>> = cells
        .par_iter()
        .map(|&(alpha, kappa)| {
            let spec = KernelSpec::new(kind, alpha, kappa, weight)?;
            let (s, rec) = cache.spectrum(spec, args.nodes)?;
            let rows = critical_values(&s, args.l, args.m)?
                .into_iter()
                .map(|(xi, v)| TableRow {
                    alpha,
                    kappa,
                    xi,
                    critical_value: v.value,
                    series_bound: v.bound,
                })
                .collect();
            Ok((rows, rec))
        })
        .collect();
    let mut manifest = RunManifest::new("table", args, None)?;
    let mut rows = Vec::new();
    for ((a, k), r) in cells.iter().zip(results) {
        match r {
            Ok((rs, rec)) => {
                rows.extend(rs);
                manifest.spectra.extend(rec);
            }
            Err(e) => {
                eprintln!("cell alpha={a} kappa={k} failed: {e}");
                manifest.failed.push(format!("alpha={a} kappa={k}: {e}"));
            }
        }
    }
    write_output(args.output.as_deref(), out, &manifest, &rows)?;
    Ok(if manifest.failed.is_empty() { EXIT_OK } else { EXIT_NUMERICAL })
}

fn write_output<W: Write, R: Serialize>(path: Option<&Path>, out: &mut W, manifest: &RunManifest, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(format!("cannot write row: {e}")))?;
    }
    let body = w.into_inner().map_err(|e| Error::Parse(format!("cannot write rows: {e}")))?;
    let mut text = manifest.to_comment()?.into_bytes();
    text.extend(body);
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => out.write_all(&text)?,
    }
    Ok(())
}

/// Reads a file written by `table` or `simulate`: the manifest (if any) and
/// the rows.
pub fn read_delimited<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<(Option<RunManifest>, Vec<R>)> {
    let text = std::fs::read_to_string(path)?;
    let comments: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    let manifest = if comments.is_empty() { None } else { Some(RunManifest::from_comment(&comments)?) };
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<R>, _>>()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    Ok((manifest, rows))
}

pub fn read_table(path: &Path) -> Result<(Option<RunManifest>, Vec<TableRow>)> {
    read_delimited(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalReport {
    pub xi: f64,
    pub critical_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub outcome: TestOutcome,
    pub critical: Vec<CriticalReport>,
}

fn h1_method(args: &TestArgs) -> Result<H1Method> {
    Ok(match args.method {
        MethodArg::Plugin => H1Method::Plugin,
        MethodArg::SupAll => H1Method::SupAll,
        MethodArg::SupRange => match args.alpha_range.as_deref() {
            Some(&[a, b]) => H1Method::SupRange { a, b },
            _ => return Err(Error::InvalidParameter("--method sup-range needs --alpha-range a,b".into())),
        },
    })
}

/// Critical values at each level for `(κ, α̂ or α₀)`.
fn lookup_critical(args: &TestArgs, kappa: f64, alpha: f64, table: Option<&[TableRow]>, cache: &SpectrumCache) -> Result<Vec<(f64, f64)>> {
    let method = match args.hypothesis {
        Hypothesis::H1 => h1_method(args)?,
        Hypothesis::H2 => H1Method::Plugin,
    };
    match table {
        Some(rows) => LEVELS
            .iter()
            .map(|&xi| {
                let mut pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| close(r.kappa, kappa) && close(r.xi, xi))
                    .map(|r| (r.alpha, r.critical_value))
                    .collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                pts.dedup_by(|a, b| close(a.0, b.0));
                if pts.is_empty() {
                    return Err(Error::MissingTable(format!("no entries for κ={kappa}, ξ={xi}; run `stable-gof table` with this κ")));
                }
                let curve = CriticalCurve::new(pts.iter().map(|p| p.0).collect(), pts.iter().map(|p| p.1).collect())?;
                let c = match args.hypothesis {
                    // H2 needs the exact α₀, not an interpolation
                    Hypothesis::H2 => pts
                        .iter()
                        .find(|p| close(p.0, alpha))
                        .map(|p| p.1)
                        .ok_or_else(|| Error::MissingTable(format!("no entry for α₀={alpha}, κ={kappa}; run `stable-gof table --hypothesis H2 --alphas {alpha}`")))?,
                    Hypothesis::H1 => h1_threshold(alpha, method, &curve).map_err(|e| match e {
                        Error::MissingTable(m) => Error::MissingTable(format!("{m}; extend the table with `stable-gof table`")),
                        e => e,
                    })?,
                };
                Ok((xi, c))
            })
            .collect(),
        None => {
            if method != H1Method::Plugin {
                return Err(Error::MissingTable("supremum methods need a table; run `stable-gof table` and pass --table".into()));
            }
            let spec = match args.hypothesis {
                Hypothesis::H1 => KernelSpec::mle_h1(alpha, kappa)?,
                Hypothesis::H2 => KernelSpec::mle_h2(alpha, kappa)?,
            };
            let (s, _) = cache.spectrum(spec, args.nodes)?;
            Ok(critical_values(&s, None, None)?.into_iter().map(|(xi, v)| (xi, v.value)).collect())
        }
    }
}

pub fn cmd_test<W: Write>(args: &TestArgs, out: &mut W) -> Result<Vec<TestReport>> {
    if args.hypothesis == Hypothesis::H2 && args.alpha0.is_none() {
        return Err(Error::InvalidParameter("H2 requires --alpha0".into()));
    }
    if args.hypothesis == Hypothesis::H1 && args.alpha0.is_some() {
        return Err(Error::InvalidParameter("--alpha0 only applies to H2".into()));
    }
    let data = read_data(&args.input)?;
    let table = match &args.table {
        Some(p) => {
            let (manifest, rows) = read_table(p)?;
            if let Some(h) = manifest.as_ref().and_then(|m| m.parameters.get("hypothesis")).and_then(|v| v.as_str()) {
                if h != args.hypothesis.to_string() {
                    return Err(Error::MissingTable(format!("{} was built for {h}, not {}", p.display(), args.hypothesis)));
                }
            }
            Some(rows)
        }
        None => None,
    };
    let opts = FitOptions::default();
    let fit = match args.alpha0 {
        Some(a) => mle_fit_fixed_alpha(&data, a, &opts)?,
        None => mle_fit(&data, &opts)?,
    };
    let cache = if args.no_cache { SpectrumCache::disabled() } else { SpectrumCache::from_env() };
    let mut reports = Vec::new();
    for &kappa in &args.kappa {
        let outcome = test_statistic(&data, &fit.params, kappa, args.hypothesis)?;
        let crit = lookup_critical(args, kappa, fit.params.alpha, table.as_deref(), &cache)?;
        reports.push(TestReport {
            outcome,
            critical: crit
                .into_iter()
                .map(|(xi, c)| CriticalReport {
                    xi,
                    critical_value: c,
                    reject: outcome.statistic >= c,
                })
                .collect(),
        });
    }
    match args.format {
        Format::Toml => {
            #[derive(Serialize)]
            struct Wrapper<'a> {
                test: &'a [TestReport],
            }
            write_toml(out, &Wrapper { test: &reports })?
        }
        Format::Text => {
            let p = fit.params;
            writeln!(out, "hypothesis  {}", args.hypothesis)?;
            writeln!(out, "n           {}", data.len())?;
            writeln!(out, "fitted      mu={} sigma={} alpha={}", p.mu, p.sigma, p.alpha)?;
            for r in &reports {
                writeln!(out, "kappa={}  D={}", r.outcome.kappa, r.outcome.statistic)?;
                for c in &r.critical {
                    let verdict = if c.reject { "reject" } else { "accept" };
                    writeln!(out, "  xi={}  critical={}  {verdict}", c.xi, c.critical_value)?;
                }
            }
        }
    }
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Critical,
    Power,
}

fn default_replications() -> usize {
    2000
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::Mle
}

/// One `[experiment.<name>]` section of a simulate config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub mode: Mode,
    pub n: usize,
    pub alpha: f64,
    pub kappas: Vec<f64>,
    pub hypothesis: Hypothesis,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub alternative: Option<Alternative>,
    #[serde(default)]
    pub weight: Option<WeightSpec>,
    #[serde(default)]
    pub critical_values: Vec<CriticalValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub experiment: BTreeMap<String, ExperimentSection>,
}

pub const DEFAULT_SEED: u64 = 1;

impl ExperimentSection {
    pub fn to_config(&self, base_seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            n: self.n,
            alpha: self.alpha,
            kappas: self.kappas.clone(),
            hypothesis: self.hypothesis,
            estimator: self.estimator,
            replications: self.replications,
            seed: self.seed.unwrap_or(base_seed),
            alternative: self.alternative,
            weight: self.weight,
            fit: FitOptions::default(),
        }
    }
}

/// One output row of `simulate`: a critical value or a power with its
/// standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub experiment: String,
    pub mode: Mode,
    pub n: usize,
    pub alpha: f64,
    pub hypothesis: Hypothesis,
    pub alternative: String,
    pub replications: usize,
    pub seed: u64,
    pub kappa: f64,
    pub xi: f64,
    /// Critical value (mode critical) or power (mode power).
    pub value: f64,
    pub se: f64,
    /// Critical value the power refers to; NaN in mode critical.
    pub critical_value: f64,
}

fn run_experiment(name: &str, sec: &ExperimentSection, base_seed: u64) -> Result<Vec<SimulationRow>> {
    let cfg = sec.to_config(base_seed);
    let row = |kappa, xi, value, se, critical_value| SimulationRow {
        experiment: name.to_string(),
        mode: sec.mode,
        n: cfg.n,
        alpha: cfg.alpha,
        hypothesis: cfg.hypothesis,
        alternative: cfg.alternative.map(|a| a.label()).unwrap_or_else(|| "null".into()),
        replications: cfg.replications,
        seed: cfg.seed,
        kappa,
        xi,
        value,
        se,
        critical_value,
    };
    match sec.mode {
        Mode::Critical => Ok(simulate_critical(&cfg)?
            .quantiles
            .iter()
            .map(|q| row(q.kappa, q.xi, q.value, q.se, f64::NAN))
            .collect()),
        Mode::Power => {
            if sec.critical_values.is_empty() {
                return Err(Error::InvalidParameter(format!("experiment {name}: power mode needs critical_values")));
            }
            Ok(power_study(&cfg, &sec.critical_values)?
                .iter()
                .map(|p| row(p.kappa, p.xi, p.power, p.se, p.critical_value))
                .collect())
        }
    }
}

pub fn parse_simulate_config(text: &str) -> Result<SimulateConfig> {
    let cfg: SimulateConfig = toml::from_str(text).map_err(|e| Error::Parse(format!("simulate config: {e}")))?;
    if cfg.experiment.is_empty() {
        return Err(Error::Parse("simulate config has no [experiment.<name>] sections".into()));
    }
    Ok(cfg)
}

pub fn cmd_simulate<W: Write>(args: &SimulateArgs, out: &mut W) -> Result<i32> {
    let cfg = parse_simulate_config(&std::fs::read_to_string(&args.config)?)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    // invalid sections are usage errors for the whole run
    for (name, sec) in &cfg.experiment {
        sec.to_config(seed)
            .validate()
            .map_err(|e| Error::InvalidParameter(format!("experiment {name}: {e}")))?;
    }
    #[derive(Serialize)]
    struct Params<'a> {
        config: &'a Path,
        experiment: &'a BTreeMap<String, ExperimentSection>,
    }
    let mut manifest = RunManifest::new(
        "simulate",
        &Params {
            config: &args.config,
            experiment: &cfg.experiment,
        },
        Some(seed),
    )?;
    let mut rows = Vec::new();
    for (name, sec) in &cfg.experiment {
        match run_experiment(name, sec, seed) {
            Ok(r) => rows.extend(r),
            Err(e) => {
                eprintln!("experiment {name} failed: {e}");
                manifest.failed.push(format!("{name}: {e}"));
            }
        }
    }
    write_output(args.output.as_deref(), out, &manifest, &rows)?;
    Ok(if manifest.failed.is_empty() { EXIT_OK } else { EXIT_NUMERICAL })
}
