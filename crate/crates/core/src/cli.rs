//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid configuration (nothing is written),
//! 3 too many inconclusive negativity checks, 4 witness hypotheses not met,
//! 1 any other failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::dynamics::Amplitudes;
use crate::entanglement::{self, EchoRecord, EntanglementError, ScanSummary};
use crate::linalg::C64;
use crate::model::json::{ModelFile, ModelFileError};
use crate::model::{thermal_state, EnvDensity, PropagatorPair, PureDephasingModel};
use crate::scenarios::{self, Scenario, ScenarioError, ScenarioParams, TauGrid, SCENARIO_NAMES};
use crate::spectral::{self, AnalyticPsd, BiasedForm, BohrSpectrum, EnvironmentOperators, SpectralError, QUAD_TOL};

/// Largest tolerated fraction of inconclusive negativity checks in a scan.
pub const MAX_INCONCLUSIVE_FRACTION: f64 = 0.01;

pub const SCAN_COLUMNS: [&str; 12] = [
    "tau",
    "W_pre_re",
    "W_pre_im",
    "W_echo_re",
    "W_echo_im",
    "comm_pre",
    "comm_echo",
    "neg_pre",
    "neg_echo",
    "E_pre",
    "E_echo",
    "flag_echo_induced",
];

pub const SPECTRAL_COLUMNS: [&str; 5] = ["tau", "chi", "phi", "W2_re", "W2_im"];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Hypothesis(String),
    #[error("{0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Hypothesis(_) => 4,
            CliError::Runtime(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<EntanglementError> for CliError {
    fn from(e: EntanglementError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Hypothesis(m) => CliError::Hypothesis(m),
            SpectralError::InvalidParameter(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(name = "echo-qee", version, about = "Qubit-environment entanglement under spin echo")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pre-pulse and echoed separability, negativity and entropy over a tau grid.
    Scan(RunArgs),
    /// Second-order attenuation and phase of the echo signal.
    Spectral(SpectralArgs),
    /// Echo phase-shift entanglement witness.
    Witness(RunArgs),
    /// Regenerate the built-in reference data sets.
    #[command(subcommand)]
    Reproduce(Reproduce),
}

#[derive(Debug, Subcommand)]
pub enum Reproduce {
    /// Periodic two-level environment over one period.
    Fig1 {
        #[arg(long, default_value_t = 1.0)]
        tau0: f64,
        #[arg(long, default_value_t = scenarios::FIG1_POINTS)]
        points: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Fixed-time snapshot for several environment populations.
    Sec4b {
        /// Populations to evaluate; defaults to 0, 0.25, 0.5, 0.7, 1.
        #[arg(long, value_delimiter = ',')]
        c0: Vec<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// JSON model file.
    #[arg(long, conflicts_with = "scenario")]
    pub model: Option<PathBuf>,
    /// Built-in scenario: sec4b, fig1, commuting, random, zx.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Ground population of the snapshot environment.
    #[arg(long)]
    pub c0: Option<f64>,
    /// Inverse temperature; replaces R0 of a model file by a thermal state.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Environment dimension of generated scenarios.
    #[arg(long)]
    pub env_dim: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub tau0: Option<f64>,
    /// Generate the commuting scenario with noncommuting V0, V1.
    #[arg(long)]
    pub noncommuting_v: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub tau_start: Option<f64>,
    #[arg(long)]
    pub tau_stop: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Qubit amplitude of |0> as `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Qubit amplitude of |1> as `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    /// Separability tolerance on the commutator norm.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SpectralArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Noise spectrum file instead of a model: `{"peaks": [[w, s], ...]}` or
    /// an analytic family such as `{"family": "ohmic", "alpha": .., "cutoff": ..}`.
    #[arg(long, conflicts_with_all = ["model", "scenario"])]
    pub psd: Option<PathBuf>,
    /// Add the column `W2_gauss_abs = exp(-lambda^2 chi)`.
    #[arg(long)]
    pub gaussian: bool,
}

/// Entry point used by the binary; returns the process exit code.
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
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Scan(args) => run_scan(args),
        Command::Spectral(args) => run_spectral(args),
        Command::Witness(args) => run_witness(args),
        Command::Reproduce(Reproduce::Fig1 { tau0, points, out }) => reproduce_fig1(*tau0, *points, out),
        Command::Reproduce(Reproduce::Sec4b { c0, out }) => reproduce_sec4b(c0, out),
    }
}

/// Everything a subcommand needs, validated before any output is written.
struct Resolved {
    label: String,
    pair: PropagatorPair,
    r0: EnvDensity,
    model: Option<PureDephasingModel>,
    amplitudes: Amplitudes,
    grid: Vec<f64>,
}

fn parse_complex(s: &str) -> Result<C64> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|_| CliError::Config(format!("cannot parse {s:?} as re,im")));
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(CliError::Config(format!("cannot parse {s:?} as re,im"))),
    }
}

fn scenario_params(s: &SourceArgs) -> ScenarioParams {
    let d = ScenarioParams::default();
    ScenarioParams {
        c0: s.c0.unwrap_or(d.c0),
        tau0: s.tau0.unwrap_or(d.tau0),
        env_dim: s.env_dim.unwrap_or(d.env_dim),
        seed: s.seed.unwrap_or(d.seed),
        lambda: s.lambda.unwrap_or(d.lambda),
        eta: s.eta.unwrap_or(d.eta),
        beta: s.beta.unwrap_or(d.beta),
        with_v_commuting: !s.noncommuting_v,
    }
}

fn resolve(args: &RunArgs) -> Result<Resolved> {
    let (label, pair, r0, model, amplitudes, default_grid, fixed_grid) = match (&args.source.model, &args.source.scenario) {
        (Some(path), _) => {
            let file = ModelFile::load(path)?;
            let (model, mut r0) = file.build()?;
            if let Some(beta) = args.source.beta {
                r0 = thermal_state(model.h_e(), beta).map_err(|e| CliError::Config(e.to_string()))?;
            }
            let pair = PropagatorPair::generated(model.clone()).map_err(|e| CliError::Config(e.to_string()))?;
            let grid = TauGrid::new(0.0, 4.0, scenarios::FIG1_POINTS)?.values();
            (path.display().to_string(), pair, r0, Some(model), Amplitudes::equal(), grid, false)
        }
        (None, Some(name)) => {
            let Scenario { name, pair, r0, amplitudes, grid, .. } = scenarios::by_name(name, &scenario_params(&args.source))?;
            let model = pair.model().cloned();
            let fixed = matches!(pair, PropagatorPair::Fixed { .. });
            (name, pair, r0, model, amplitudes, grid, fixed)
        }
        (None, None) => {
            return Err(CliError::Config(format!(
                "either --model or --scenario ({}) is required",
                SCENARIO_NAMES.join(", ")
            )))
        }
    };
    let amplitudes = match (&args.a, &args.b) {
        (None, None) => amplitudes,
        (Some(a), Some(b)) => Amplitudes::new(parse_complex(a)?, parse_complex(b)?).map_err(|e| CliError::Config(e.to_string()))?,
        _ => return Err(CliError::Config("--a and --b must be given together".into())),
    };
    let g = &args.grid;
    let grid = if g.tau_start.is_none() && g.tau_stop.is_none() && g.points.is_none() {
        default_grid
    } else if fixed_grid {
        return Err(CliError::Config(format!("scenario {label} is a single-time snapshot; grid flags do not apply")));
    } else {
        let start = g.tau_start.unwrap_or(0.0);
        let stop = g.tau_stop.unwrap_or(*default_grid.last().unwrap_or(&4.0));
        TauGrid::new(start, stop, g.points.unwrap_or(scenarios::FIG1_POINTS))?.values()
    };
    if let Some(tol) = args.tol {
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(CliError::Config(format!("--tol must be positive, got {tol}")));
        }
    }
    Ok(Resolved { label, pair, r0, model, amplitudes, grid })
}

/// Fixed scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn write_scan_csv<W: Write>(records: &[EchoRecord], w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(SCAN_COLUMNS)?;
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    for r in records {
        out.write_record([
            fmt_f64(r.tau),
            fmt_f64(r.w_pre.re),
            fmt_f64(r.w_pre.im),
            fmt_f64(r.w_echo.re),
            fmt_f64(r.w_echo.im),
            fmt_f64(r.verdict_pre.commutator_norm),
            fmt_f64(r.verdict_echo.commutator_norm),
            fmt_f64(r.negativity_pre),
            fmt_f64(r.negativity_echo),
            opt(r.entropy_pre),
            opt(r.entropy_echo),
            u8::from(r.echo_induced()).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", dir.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn check_inconclusive(summary: &ScanSummary) -> Result<()> {
    let frac = summary.inconclusive_fraction();
    if frac > MAX_INCONCLUSIVE_FRACTION {
        return Err(CliError::Numeric(format!(
            "{} of {} negativity checks fell in the inconclusive band ({:.2}% > {:.0}%)",
            summary.inconclusive,
            2 * summary.points,
            100.0 * frac,
            100.0 * MAX_INCONCLUSIVE_FRACTION
        )));
    }
    Ok(())
}

fn scan_to(res: &Resolved, tol: Option<f64>, out: &Path, stem: &str, extra: serde_json::Value) -> Result<ScanSummary> {
    let report = entanglement::classify_scan(&res.pair, res.amplitudes, &res.r0, &res.grid, tol)?;
    create_out(out)?;
    write_scan_csv(&report.records, fs::File::create(out.join(format!("{stem}.csv")))?)?;
    let summary = json!({
        "source": res.label,
        "points": report.summary.points,
        "amplitudes": {"a": [res.amplitudes.a().re, res.amplitudes.a().im], "b": [res.amplitudes.b().re, res.amplitudes.b().im]},
        "tolerance": tol,
        "pure_environment": res.r0.is_pure(),
        "summary": report.summary,
        "extra": extra,
    });
    write_json(&out.join(format!("{stem}_summary.json")), &summary)?;
    eprintln!(
        "{}: {} points, {} echo-induced, {} inconclusive, {} disagreements",
        res.label,
        report.summary.points,
        report.summary.echo_induced_indices.len(),
        report.summary.inconclusive,
        report.summary.disagreements
    );
    Ok(report.summary)
}

pub fn run_scan(args: &RunArgs) -> Result<()> {
    let res = resolve(args)?;
    let summary = scan_to(&res, args.tol, &args.out, "scan", serde_json::Value::Null)?;
    check_inconclusive(&summary)
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PsdFile {
    Peaks {
        peaks: Vec<[f64; 2]>,
    },
    Analytic(AnalyticPsd),
}

enum SpectralSource {
    Bohr(BohrSpectrum),
    Analytic(AnalyticPsd),
    TimeDomain(Box<EnvironmentOperators>),
}

pub fn run_spectral(args: &SpectralArgs) -> Result<()> {
    let (label, source, eta, lambda, beta, grid) = if let Some(path) = &args.psd {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: PsdFile = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("malformed spectrum JSON: {e}")))?;
        let source = match file {
            PsdFile::Peaks { peaks } => {
                let pairs: Vec<(f64, f64)> = peaks.iter().map(|p| (p[0], p[1])).collect();
                SpectralSource::Bohr(BohrSpectrum::from_peaks(&pairs)?)
            }
            PsdFile::Analytic(a) => {
                a.validate()?;
                SpectralSource::Analytic(a)
            }
        };
        let g = &args.run.grid;
        let grid = TauGrid::new(g.tau_start.unwrap_or(0.0), g.tau_stop.unwrap_or(4.0), g.points.unwrap_or(scenarios::FIG1_POINTS))?;
        let beta = args.run.source.beta.unwrap_or(0.0);
        (
            path.display().to_string(),
            source,
            args.run.source.eta.unwrap_or(0.0),
            args.run.source.lambda.unwrap_or(1.0),
            Some(beta),
            grid.values(),
        )
    } else {
        let res = resolve(&args.run)?;
        let model = res.model.as_ref().ok_or_else(|| {
            CliError::Config(format!("{} has no Hamiltonian model; the spectral description needs H_E, V0, V1", res.label))
        })?;
        let form = BiasedForm::from_model(model)?;
        let ops = EnvironmentOperators::new(model.h_e(), &form.v, &res.r0)?;
        let source = if ops.is_stationary() {
            SpectralSource::Bohr(ops.bohr_spectrum()?)
        } else {
            SpectralSource::TimeDomain(Box::new(ops))
        };
        (res.label, source, form.eta, 1.0, None, res.grid)
    };
    if beta.is_some_and(|b| b.is_nan() || b < 0.0) {
        return Err(CliError::Config("--beta must be nonnegative".into()));
    }

    let rows = grid
        .iter()
        .map(|&tau| {
            let (chi, phi) = match &source {
                SpectralSource::Bohr(s) => match beta {
                    Some(b) => (s.chi_echo(tau), s.phi_echo(tau, b)?),
                    None => (s.chi_echo(tau), s.phi_echo_stationary(tau)),
                },
                SpectralSource::Analytic(_) if tau == 0.0 => (0.0, 0.0),
                SpectralSource::Analytic(a) => (a.chi_echo(tau, QUAD_TOL)?, a.phi_echo(tau, beta.unwrap_or(0.0), QUAD_TOL)?),
                SpectralSource::TimeDomain(ops) => (ops.chi_time_domain(tau), ops.phi_time_domain(tau)),
            };
            Ok((tau, spectral::second_order_w(lambda, eta, chi.max(0.0), phi)?))
        })
        .collect::<Result<Vec<_>>>()?;

    create_out(&args.run.out)?;
    let mut out = csv_writer(fs::File::create(args.run.out.join("spectral.csv"))?);
    let mut header: Vec<&str> = SPECTRAL_COLUMNS.to_vec();
    if args.gaussian {
        header.push("W2_gauss_abs");
    }
    out.write_record(&header)?;
    for (tau, r) in &rows {
        let mut rec = vec![fmt_f64(*tau), fmt_f64(r.chi), fmt_f64(r.phi), fmt_f64(r.w_approx.re), fmt_f64(r.w_approx.im)];
        if args.gaussian {
            rec.push(fmt_f64(r.gaussian_magnitude()));
        }
        out.write_record(&rec)?;
    }
    out.flush()?;

    let sidecar = match &source {
        SpectralSource::Bohr(s) => json!({"method": "bohr", "peaks": s.peaks}),
        SpectralSource::Analytic(a) => json!({"method": "analytic", "psd": a, "quadrature_tol": QUAD_TOL}),
        SpectralSource::TimeDomain(_) => json!({"method": "time-domain", "peaks": null}),
    };
    let meta = json!({"source": label, "eta": eta, "lambda": lambda, "beta": beta, "spectrum": sidecar});
    write_json(&args.run.out.join("spectral_psd.json"), &meta)
}

pub fn run_witness(args: &RunArgs) -> Result<()> {
    let res = resolve(args)?;
    let model = res
        .model
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("{} has no Hamiltonian model; the witness needs H_E and V1", res.label)))?;
    let grid: Vec<f64> = res.grid.iter().copied().filter(|&t| t > 0.0).collect();
    let report = spectral::witness(model, &res.r0, &grid, None)?;
    create_out(&args.out)?;
    write_json(&args.out.join("witness.json"), &json!({"source": res.label, "witness": report}))?;
    eprintln!("{}: {:?}, max |phi| = {:.3e}", res.label, report.verdict, report.max_abs_phi);
    Ok(())
}

pub fn reproduce_fig1(tau0: f64, points: usize, out: &Path) -> Result<()> {
    let sc = scenarios::fig1_with(tau0, Amplitudes::equal(), points)?;
    let refinement = entanglement::isolation_refinement(&sc.pair, &sc.r0, (0.0, 4.0 * tau0), points, 2, None)?;
    let res = Resolved {
        label: sc.name,
        pair: sc.pair,
        r0: sc.r0,
        model: None,
        amplitudes: sc.amplitudes,
        grid: sc.grid,
    };
    let summary = scan_to(&res, None, out, "fig1", json!({"tau0": tau0, "refinement": refinement}))?;
    check_inconclusive(&summary)
}

pub fn reproduce_sec4b(c0: &[f64], out: &Path) -> Result<()> {
    let values = if c0.is_empty() { vec![0.0, 0.25, 0.5, 0.7, 1.0] } else { c0.to_vec() };
    let mut rows = Vec::with_capacity(values.len());
    for &c in &values {
        let sc = scenarios::sec4b_snapshot(c)?;
        rows.push((c, entanglement::echo_record(&sc.pair, sc.amplitudes, &sc.r0, scenarios::SNAPSHOT_TAU, None)?));
    }
    create_out(out)?;
    let mut w = csv_writer(fs::File::create(out.join("sec4b.csv"))?);
    w.write_record([
        "c0",
        "W_pre_re",
        "W_pre_im",
        "W_echo_re",
        "W_echo_im",
        "comm_pre",
        "comm_echo",
        "neg_pre",
        "neg_echo",
        "separable_pre",
        "separable_echo",
    ])?;
    for (c, r) in &rows {
        w.write_record([
            fmt_f64(*c),
            fmt_f64(r.w_pre.re),
            fmt_f64(r.w_pre.im),
            fmt_f64(r.w_echo.re),
            fmt_f64(r.w_echo.im),
            fmt_f64(r.verdict_pre.commutator_norm),
            fmt_f64(r.verdict_echo.commutator_norm),
            fmt_f64(r.negativity_pre),
            fmt_f64(r.negativity_echo),
            u8::from(r.verdict_pre.separable).to_string(),
            u8::from(r.verdict_echo.separable).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
