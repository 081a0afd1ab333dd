//! Command-line front end: argument parsing, experiment configuration and
//! the CSV/JSON artifacts written by each subcommand.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analytic::AnalyticFn;
use crate::approx::jackson_decay_check;
use crate::asymptotics::{default_section, expansion_scan};
use crate::error::{Error, Result};
use crate::factor::{canonical_wh, FactorResiduals, Normalization};
use crate::fit::{fit_decay, relative_floors, NGrid};
use crate::linalg::{CMat, C64};
use crate::symbol::format::{read_symbol, to_json_string, write_symbol, SymbolFile};
use crate::symbol::{zygmund_test_symbol, LaurentMatrixSeries};
use crate::toeplitz::{log_det_scan, trace_f_direct};
use crate::traces::{
    build_contour, estimate_spectrum, fit_trace_rows, widom_scan, DEFAULT_CONTOUR_NODES, DEFAULT_HANKEL_SECTION,
};

#[derive(Debug, Parser)]
#[command(name = "toeplitz-asym", version, about = "Block Toeplitz determinant and trace asymptotics")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a test symbol in the JSON symbol format.
    GenSymbol(GenSymbolArgs),
    /// Canonical Wiener-Hopf factors and their residual report.
    Factor(FactorArgs),
    /// `log det T_n(a)` over a linear range of n.
    LogdetScan(RangeArgs),
    /// `tr f(T_n(a))` over a linear range of n.
    TraceScan(TraceScanArgs),
    /// Expansion reports of `log det T_n(a)` at order p.
    Expand(ExpandArgs),
    /// Direct against asymptotic `tr f(T_n(a))` with a decay fit.
    WidomTrace(WidomTraceArgs),
    /// Decay fit of the `residual_abs` column of an expand or widom-trace CSV.
    DecayFit(DecayFitArgs),
    /// Near-best approximation errors against the fitted Jackson bound.
    ApproxScan(SmoothnessArgs),
    /// Smoothness report as JSON.
    Smoothness(SmoothnessArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    /// `1.25 − 0.5t − 0.5t⁻¹`
    Scalar,
    /// `1.25·I − 0.5R·t − 0.5Rᵀ·t⁻¹`, `R = [[1, 0.2], [0, 1]]`
    Block,
}

#[derive(Debug, Args)]
pub struct GenSymbolArgs {
    /// Smoothness γ of a lacunary test symbol.
    #[arg(long, conflicts_with = "fixture")]
    pub zygmund: Option<f64>,
    #[arg(long, default_value_t = 8)]
    pub levels: u32,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub fixture: Option<Fixture>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FactorArgs {
    #[arg(long)]
    pub symbol: PathBuf,
    /// Write the left factors `v₊, v₋` instead of the right ones.
    #[arg(long)]
    pub left: bool,
    #[arg(long, default_value_t = 256)]
    pub m: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Residual report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RangeArgs {
    #[arg(long)]
    pub symbol: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub n_min: usize,
    #[arg(long)]
    pub n_max: usize,
    #[arg(long, default_value_t = 1)]
    pub step: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceScanArgs {
    #[command(flatten)]
    pub range: RangeArgs,
    /// `square`, `exp`, `log`, `poly:c0,c1,...` or `rational:num;den`.
    #[arg(long)]
    pub f: String,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[arg(long)]
    pub symbol: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// `min:max:linear|geometric[:step]`
    #[arg(long)]
    pub n_grid: String,
    /// Factorization section (default: from the bandwidth).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WidomTraceArgs {
    #[arg(long)]
    pub symbol: PathBuf,
    #[arg(long)]
    pub f: String,
    #[arg(long)]
    pub n_grid: String,
    #[arg(long, default_value_t = 0.5)]
    pub margin: f64,
    #[arg(long, default_value_t = DEFAULT_CONTOUR_NODES)]
    pub nodes: usize,
    /// Section order for the spectrum estimate.
    #[arg(long, default_value_t = 128)]
    pub spectrum_m: usize,
    #[arg(long, default_value_t = DEFAULT_HANKEL_SECTION)]
    pub hankel_m: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// DecayFit JSON. Without it the fit goes to stdout when the CSV is
    /// written to a file.
    #[arg(long)]
    pub fit: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecayFitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// With `--gamma`, `target_met` records `slope ≤ −(2γp − 1) + 0.3`.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SmoothnessArgs {
    #[arg(long)]
    pub symbol: PathBuf,
    /// Defaults to the symbol's recorded smoothness.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value = "4:256:geometric")]
    pub n_grid: String,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    GenSymbol,
    Factor,
    LogdetScan,
    TraceScan,
    Expand,
    WidomTrace,
    DecayFit,
    ApproxScan,
    Smoothness,
}

/// Everything one run needs, validated before any work starts.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub operation: Operation,
    /// Symbol JSON, or the CSV read by `decay-fit`.
    pub input: Option<PathBuf>,
    pub n_grid: Option<NGrid>,
    pub p: usize,
    pub f: Option<AnalyticFn>,
    pub margin: f64,
    pub m: Option<usize>,
    pub hankel_m: usize,
    pub spectrum_m: usize,
    pub nodes: usize,
    pub gamma: Option<f64>,
    pub levels: u32,
    pub seed: Option<u64>,
    pub fixture: Option<Fixture>,
    pub left: bool,
    /// Main artifact; stdout when absent.
    pub output: Option<PathBuf>,
    /// Secondary artifact (factor report, widom-trace fit).
    pub report: Option<PathBuf>,
}

impl ExperimentConfig {
    fn new(operation: Operation) -> Self {
        ExperimentConfig {
            operation,
            input: None,
            n_grid: None,
            p: 1,
            f: None,
            margin: 0.5,
            m: None,
            hankel_m: DEFAULT_HANKEL_SECTION,
            spectrum_m: 128,
            nodes: DEFAULT_CONTOUR_NODES,
            gamma: None,
            levels: 8,
            seed: None,
            fixture: None,
            left: false,
            output: None,
            report: None,
        }
    }

    pub fn from_command(command: Command) -> Result<Self> {
        let cfg = match command {
            Command::GenSymbol(a) => ExperimentConfig {
                gamma: a.zygmund,
                levels: a.levels,
                seed: a.seed,
                fixture: a.fixture,
                output: a.output,
                ..Self::new(Operation::GenSymbol)
            },
            Command::Factor(a) => ExperimentConfig {
                input: Some(a.symbol),
                left: a.left,
                m: Some(a.m),
                output: a.output,
                report: a.report,
                ..Self::new(Operation::Factor)
            },
            Command::LogdetScan(r) => range_config(Operation::LogdetScan, r)?,
            Command::TraceScan(a) => ExperimentConfig {
                f: Some(a.f.parse()?),
                ..range_config(Operation::TraceScan, a.range)?
            },
            Command::Expand(a) => ExperimentConfig {
                input: Some(a.symbol),
                p: a.p,
                n_grid: Some(a.n_grid.parse()?),
                m: a.m,
                output: a.output,
                ..Self::new(Operation::Expand)
            },
            Command::WidomTrace(a) => ExperimentConfig {
                input: Some(a.symbol),
                f: Some(a.f.parse()?),
                n_grid: Some(a.n_grid.parse()?),
                margin: a.margin,
                nodes: a.nodes,
                spectrum_m: a.spectrum_m,
                hankel_m: a.hankel_m,
                output: a.output,
                report: a.fit,
                ..Self::new(Operation::WidomTrace)
            },
            Command::DecayFit(a) => ExperimentConfig {
                input: Some(a.input),
                gamma: a.gamma,
                p: a.p,
                output: a.output,
                ..Self::new(Operation::DecayFit)
            },
            Command::ApproxScan(a) => smoothness_config(Operation::ApproxScan, a)?,
            Command::Smoothness(a) => smoothness_config(Operation::Smoothness, a)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if let Some(g) = &self.n_grid {
            if g.values().is_empty() {
                return bad("empty n grid".into());
            }
        }
        let paths: Vec<&PathBuf> = [&self.input, &self.output, &self.report].into_iter().flatten().collect();
        for (i, p) in paths.iter().enumerate() {
            if paths[..i].contains(p) {
                return bad(format!("path {} is used twice", p.display()));
            }
        }
        if self.p < 1 {
            return bad("p must be at least 1".into());
        }
        if !(self.margin > 0.0) || !self.margin.is_finite() {
            return bad(format!("margin {} must be positive", self.margin));
        }
        if !self.nodes.is_power_of_two() || self.nodes < 64 {
            return bad(format!("node count {} must be a power of two >= 64", self.nodes));
        }
        if self.spectrum_m < 64 {
            return bad("spectrum section must be at least 64".into());
        }
        if matches!(self.m, Some(0)) || self.hankel_m == 0 {
            return bad("sections must be positive".into());
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return bad(format!("gamma {g} must be positive"));
            }
        }
        match self.operation {
            Operation::GenSymbol => {
                if self.gamma.is_none() == self.fixture.is_none() {
                    return bad("gen-symbol needs exactly one of --zygmund and --fixture".into());
                }
            }
            Operation::Expand | Operation::WidomTrace | Operation::LogdetScan | Operation::TraceScan => {
                if self.n_grid.is_none() {
                    return bad("an n grid is required".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}

fn range_config(op: Operation, r: RangeArgs) -> Result<ExperimentConfig> {
    if r.step < 1 || r.n_min > r.n_max {
        return Err(Error::ConfigInvalid(format!("bad range {}..{} step {}", r.n_min, r.n_max, r.step)));
    }
    Ok(ExperimentConfig {
        input: Some(r.symbol),
        n_grid: Some(NGrid::linear(r.n_min, r.n_max, r.step)),
        output: r.output,
        ..ExperimentConfig::new(op)
    })
}

fn smoothness_config(op: Operation, a: SmoothnessArgs) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        input: Some(a.symbol),
        gamma: a.gamma,
        n_grid: Some(a.n_grid.parse()?),
        output: a.output,
        ..ExperimentConfig::new(op)
    })
}

pub fn scalar_fixture() -> LaurentMatrixSeries {
    LaurentMatrixSeries::scalar_real(&[(-1, -0.5), (0, 1.25), (1, -0.5)])
}

pub fn block_fixture() -> LaurentMatrixSeries {
    let c = |x: f64| C64::new(x, 0.0);
    let r = CMat::from_row_slice(2, 2, &[c(1.0), c(0.2), c(0.0), c(1.0)]);
    let blocks = [
        (-1, r.transpose() * c(-0.5)),
        (0, CMat::identity(2, 2) * c(1.25)),
        (1, r * c(-0.5)),
    ];
    LaurentMatrixSeries::from_blocks(2, blocks).expect("2x2 blocks")
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of ascii fields"))
}

#[derive(Serialize)]
struct FactorFile {
    side: &'static str,
    normalization: Normalization,
    minus: SymbolFile,
    plus: SymbolFile,
}

#[derive(Serialize)]
struct FactorReport {
    section: usize,
    normalization: Normalization,
    residuals: FactorResiduals,
}

pub const EXPAND_HEADER: [&str; 15] = [
    "n",
    "p",
    "log_g_term_re",
    "log_g_term_im",
    "correction_sum_re",
    "correction_sum_im",
    "log_e_constant_re",
    "log_e_constant_im",
    "predicted_re",
    "predicted_im",
    "direct_re",
    "direct_im",
    "residual_re",
    "residual_im",
    "residual_abs",
];

pub const WIDOM_HEADER: [&str; 6] = ["n", "direct_re", "direct_im", "asymptotic_re", "asymptotic_im", "residual_abs"];

fn symbol_input(cfg: &ExperimentConfig) -> Result<LaurentMatrixSeries> {
    let path = cfg.input.as_ref().ok_or_else(|| Error::ConfigInvalid("--symbol is required".into()))?;
    read_symbol(path)
}

fn grid(cfg: &ExperimentConfig) -> Vec<usize> {
    cfg.n_grid.as_ref().map(NGrid::values).unwrap_or_default()
}

/// Executes one validated configuration, writing its artifacts.
pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    let out = cfg.output.as_deref();
    match cfg.operation {
        Operation::GenSymbol => {
            let a = match (cfg.gamma, cfg.fixture) {
                (Some(g), _) => zygmund_test_symbol(g, cfg.levels, cfg.seed)?,
                (None, Some(Fixture::Scalar)) => scalar_fixture(),
                (None, Some(Fixture::Block)) => block_fixture(),
                (None, None) => unreachable!("validated"),
            };
            match out {
                Some(p) => write_symbol(p, &a),
                None => emit(None, &to_json_string(&SymbolFile::from_series(&a))?),
            }
        }
        Operation::Factor => {
            let a = symbol_input(cfg)?;
            let w = canonical_wh(&a, cfg.m.unwrap_or(256))?;
            let (side, minus, plus) = if cfg.left {
                ("left", &w.v_minus, &w.v_plus)
            } else {
                ("right", &w.u_minus, &w.u_plus)
            };
            let file = FactorFile {
                side,
                normalization: w.normalization,
                minus: SymbolFile::from_series(minus),
                plus: SymbolFile::from_series(plus),
            };
            emit(out, &to_json_string(&file)?)?;
            if let Some(r) = &cfg.report {
                let report = FactorReport { section: w.section, normalization: w.normalization, residuals: w.residuals };
                emit(Some(r), &to_json_string(&report)?)?;
            }
            Ok(())
        }
        Operation::LogdetScan => {
            let a = symbol_input(cfg)?;
            let rows = log_det_scan(&a, &grid(cfg))?;
            let text = csv_text(
                &["n", "re_logdet", "im_logdet"],
                rows.iter().map(|(n, z)| vec![n.to_string(), num(z.re), num(z.im)]),
            )?;
            emit(out, &text)
        }
        Operation::TraceScan => {
            let a = symbol_input(cfg)?;
            let f = cfg.f.as_ref().expect("parsed");
            let ns = grid(cfg);
            let values: Vec<C64> = {
                use rayon::prelude::*;
                ns.par_iter().map(|&n| trace_f_direct(&a, n, f)).collect::<Result<_>>()?
            };
            let text = csv_text(
                &["n", "re", "im"],
                ns.iter().zip(&values).map(|(n, z)| vec![n.to_string(), num(z.re), num(z.im)]),
            )?;
            emit(out, &text)
        }
        Operation::Expand => {
            let a = symbol_input(cfg)?;
            let w = canonical_wh(&a, cfg.m.unwrap_or_else(|| default_section(&a)))?;
            let reports = expansion_scan(&a, &grid(cfg), cfg.p, &w)?;
            let text = csv_text(
                &EXPAND_HEADER,
                reports.iter().map(|r| {
                    let mut row = vec![r.n.to_string(), r.p.to_string()];
                    for z in [r.log_g_term, r.correction_sum, r.log_e_constant, r.predicted, r.direct, r.residual] {
                        row.push(num(z.re));
                        row.push(num(z.im));
                    }
                    row.push(num(r.residual.norm()));
                    row
                }),
            )?;
            emit(out, &text)
        }
        Operation::WidomTrace => {
            let a = symbol_input(cfg)?;
            let f = cfg.f.as_ref().expect("parsed");
            let spectrum = estimate_spectrum(&a, cfg.spectrum_m)?;
            let contour = build_contour(&spectrum, cfg.margin, cfg.nodes)?;
            let (_, rows) = widom_scan(&a, f, &grid(cfg), &contour, cfg.hankel_m)?;
            let text = csv_text(
                &WIDOM_HEADER,
                rows.iter().map(|r| {
                    vec![
                        r.n.to_string(),
                        num(r.direct.re),
                        num(r.direct.im),
                        num(r.asymptotic.re),
                        num(r.asymptotic.im),
                        num(r.residual_abs),
                    ]
                }),
            )?;
            emit(out, &text)?;
            let fit = fit_trace_rows(&rows, a.smoothness())?;
            match (&cfg.report, out) {
                (Some(p), _) => emit(Some(p), &to_json_string(&fit)?),
                (None, Some(_)) => emit(None, &to_json_string(&fit)?),
                (None, None) => Ok(()),
            }
        }
        Operation::DecayFit => {
            let path = cfg.input.as_ref().ok_or_else(|| Error::ConfigInvalid("--input is required".into()))?;
            let (points, refs) = read_residual_csv(path)?;
            let mut fit = fit_decay(&points, &relative_floors(&refs), 0, 4)?;
            if let Some(g) = cfg.gamma {
                fit.target_met = Some(fit.slope <= -(2.0 * g * cfg.p as f64 - 1.0) + 0.3);
            }
            emit(out, &to_json_string(&fit)?)
        }
        Operation::ApproxScan | Operation::Smoothness => {
            let a = symbol_input(cfg)?;
            let gamma = cfg
                .gamma
                .or(a.smoothness())
                .ok_or_else(|| Error::ConfigInvalid("no gamma given and none recorded in the symbol".into()))?;
            let report = jackson_decay_check(&a, gamma, &grid(cfg))?;
            if cfg.operation == Operation::Smoothness {
                return emit(out, &to_json_string(&report)?);
            }
            let text = csv_text(
                &["n", "error", "bound"],
                report.per_n_errors.iter().map(|&(n, e)| {
                    vec![n.to_string(), num(e), num(report.jackson_constant * (n as f64).powf(-gamma))]
                }),
            )?;
            emit(out, &text)
        }
    }
}

// (n, residual_abs) points and |direct| references from an expand or
// widom-trace CSV.
fn read_residual_csv(path: &Path) -> Result<(Vec<(f64, f64)>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (n_col, res_col) = match (col("n"), col("residual_abs")) {
        (Some(n), Some(res)) => (n, res),
        _ => return Err(Error::ConfigInvalid("CSV needs n and residual_abs columns".into())),
    };
    let direct = col("direct_re").zip(col("direct_im"));
    let parse = |s: &str| -> Result<f64> {
        s.trim().parse().map_err(|_| Error::ConfigInvalid(format!("not a number: '{s}'")))
    };
    let mut points = Vec::new();
    let mut refs = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        points.push((parse(field(n_col))?, parse(field(res_col))?));
        refs.push(match direct {
            Some((re, im)) => C64::new(parse(field(re))?, parse(field(im))?).norm(),
            None => 0.0,
        });
    }
    Ok((points, refs))
}

/// Parses arguments, runs, and returns the process exit code. Failures
/// print the error name and message on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let err = Error::ConfigInvalid(e.to_string().trim_end().to_string());
            eprintln!("{}: {}", err.name(), err);
            return err.exit_code();
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 || rayon::ThreadPoolBuilder::new().num_threads(t).build_global().is_err() {
            let err = Error::ConfigInvalid(format!("cannot start {t} worker threads"));
            eprintln!("{}: {}", err.name(), err);
            return err.exit_code();
        }
    }
    match ExperimentConfig::from_command(cli.command).and_then(|cfg| run(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}: {}", e.name(), e);
            e.exit_code()
        }
    }
}
