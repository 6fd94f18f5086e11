//! Command-line front end: `test`, `estimate` and `simulate`.
//!
//! Exit codes: 0 no rejection, 3 rejection, 2 usage or parameter errors,
//! 1 data and estimation errors.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bandwidths::BandwidthSet;
use crate::bootstrap::{run_test, BootstrapConfig, TestKind, TestReport, DEFAULT_GRID_M};
use crate::curve::{equispaced, Curve};
use crate::error::Error;
use crate::kernels::{KernelKind, KernelSpec};
use crate::quantile_scale::{estimate_quantile_curve, estimate_scale_curve};
use crate::rearrangement::constrained_quantile_curve;
use crate::residual_process::{compute_residuals, cvm_statistic, independence_process, ks_statistic};
use crate::sample::Sample;
use crate::simulation::{run_study, Model, ModelParams, StudyConfig, StudyResult};

pub const EXIT_ACCEPT: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_REJECT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qlscale", version, about = "Quantile location-scale estimation and bootstrap tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bootstrap test of the model on a CSV sample; prints a JSON report.
    Test(TestArgs),
    /// Writes the estimated curves, residuals and process field as CSV.
    Estimate(EstimateArgs),
    /// Monte-Carlo rejection rates on a simulated model.
    Simulate(SimulateArgs),
}

/// Statistic that decides the exit code of `test`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatChoice {
    Ks,
    Cvm,
    /// Reject if either statistic rejects.
    Any,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV with header `x,y`, covariates in [0, 1].
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long = "model-kind", default_value = "location_scale")]
    pub model_kind: TestKind,
}

#[derive(Debug, Clone, Default, Args)]
pub struct BandwidthArgs {
    /// Covariate bandwidth; `d` defaults to `2h` when only `h` is given.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    /// Response smoothing bandwidth.
    #[arg(long)]
    pub b: Option<f64>,
    /// Bootstrap noise scale.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "kernel-K")]
    pub kernel: Option<KernelKind>,
    /// Trimming unit `m`; residuals are trimmed to `(2m, 1-2m]`, bootstrap ones to `(4m, 1-4m]`.
    #[arg(long)]
    pub trim: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub bandwidths: BandwidthArgs,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    #[arg(long = "B", default_value_t = 200)]
    pub replications: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long = "grid-m", default_value_t = DEFAULT_GRID_M)]
    pub grid_m: usize,
    #[arg(long, value_enum, default_value_t = StatChoice::Cvm)]
    pub stat: StatChoice,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub bandwidths: BandwidthArgs,
    #[arg(long = "grid-m", default_value_t = DEFAULT_GRID_M)]
    pub grid_m: usize,
    /// Output directory, created if missing.
    #[arg(long)]
    pub output: PathBuf,
    /// Also write a gnuplot script.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Model id: m1, m2a, m2b, m3, m1h, m2ah, m2bh, m3h, m4, m5.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub runs: usize,
    #[arg(long = "B", default_value_t = 200)]
    pub replications: usize,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    /// Defaults by model: monotone for m4/m5, location-scale for `*h`, location otherwise.
    #[arg(long = "model-kind")]
    pub model_kind: Option<TestKind>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long = "grid-m", default_value_t = DEFAULT_GRID_M)]
    pub grid_m: usize,
    #[arg(long)]
    pub trim: Option<f64>,
    /// CSV path for the result row; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        CliError { code: EXIT_DATA, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::data(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::data(format!("csv error: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_ACCEPT };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<i32> {
    match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Estimate(a) => cmd_estimate(a).map(|_| EXIT_ACCEPT),
        Command::Simulate(a) => cmd_simulate(a).map(|_| EXIT_ACCEPT),
    }
}

#[derive(Deserialize)]
struct Row {
    x: f64,
    y: f64,
}

/// Reads a `x,y` CSV; rows are numbered from 1 after the header.
pub fn read_sample(path: &Path) -> CliResult<Sample> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    if !(headers.iter().any(|h| h == "x") && headers.iter().any(|h| h == "y")) {
        return Err(CliError::data(format!("{}: header must contain columns x,y", path.display())));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| CliError::data(format!("{}: malformed row {}: {e}", path.display(), i + 1)))?;
        x.push(row.x);
        y.push(row.y);
    }
    Ok(Sample::new(x, y)?)
}

fn check_unit(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CliError::usage(format!("{name} = {v} must lie in (0, 1)")))
    }
}

/// Data-driven bandwidths with the command-line overrides applied.
pub fn resolve_bandwidths(sample: &Sample, o: &BandwidthArgs) -> CliResult<BandwidthSet> {
    let mut bw = BandwidthSet::from_sample(sample)?;
    if let Some(h) = o.h {
        bw.h = h;
        bw.d = 2.0 * h;
    }
    if let Some(d) = o.d {
        bw.d = d;
    }
    if let Some(b) = o.b {
        bw.b = b;
    }
    if let Some(k) = o.kernel {
        bw.kernel = KernelSpec::new(k);
    }
    if let Some(m) = o.trim {
        bw.trim_unit = m;
    }
    if let Some(a) = o.alpha {
        bw.alpha = a;
    }
    bw.validate()?;
    for w in bw.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(bw)
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn cmd_test(a: &TestArgs) -> CliResult<i32> {
    check_unit("tau", a.data.tau)?;
    check_unit("level", a.level)?;
    if a.replications == 0 {
        return Err(CliError::usage("B must be ≥ 1"));
    }
    let sample = read_sample(&a.data.input)?;
    let bw = resolve_bandwidths(&sample, &a.bandwidths)?;
    let cfg = BootstrapConfig {
        replications: a.replications,
        level: a.level,
        seed: a.seed,
        workers: a.workers,
        grid_m: a.grid_m,
        alpha: a.bandwidths.alpha,
    };
    let report = run_test(&sample, a.data.tau, &bw, &cfg, a.data.model_kind)?.report;
    let mut out = open_output(a.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report).map_err(|e| CliError::data(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(if rejects(&report, a.stat) { EXIT_REJECT } else { EXIT_ACCEPT })
}

pub fn rejects(report: &TestReport, stat: StatChoice) -> bool {
    match stat {
        StatChoice::Ks => report.reject_ks,
        StatChoice::Cvm => report.reject_cvm,
        StatChoice::Any => report.reject_ks || report.reject_cvm,
    }
}

/// Summary printed by `estimate`.
#[derive(Debug, Serialize)]
pub struct EstimateSummary {
    pub model_kind: TestKind,
    pub n: usize,
    pub tau: f64,
    pub grid_m: usize,
    pub bandwidths: BandwidthSet,
    pub n_trim: usize,
    pub statistic_ks: f64,
    pub statistic_cvm: f64,
    pub files: Vec<String>,
}

pub const QHAT_FILE: &str = "qhat.csv";
pub const REARRANGED_FILE: &str = "q_rearranged.csv";
pub const SHAT_FILE: &str = "shat.csv";
pub const RESIDUALS_FILE: &str = "residuals.csv";
pub const PROCESS_FILE: &str = "process.csv";
pub const PLOT_FILE: &str = "plot.gp";

/// Curves are tabulated on `grid_m` equispaced nodes; residuals interpolate them.
pub fn cmd_estimate(a: &EstimateArgs) -> CliResult<EstimateSummary> {
    check_unit("tau", a.data.tau)?;
    if a.grid_m < 2 {
        return Err(CliError::usage("grid-m must be ≥ 2"));
    }
    let sample = read_sample(&a.data.input)?;
    let bw = resolve_bandwidths(&sample, &a.bandwidths)?;
    let kind = a.data.model_kind;
    let (lo, hi) = bw.estimation_domain();
    let trim = bw.data_trim();

    let qhat = estimate_quantile_curve(&sample, a.data.tau, &bw, &equispaced(lo, hi, a.grid_m))?;
    let q_rearranged = constrained_quantile_curve(&qhat, lo, hi, a.grid_m)?;
    let shat = match kind {
        TestKind::Location => None,
        _ => Some(estimate_scale_curve(&sample, &qhat, &bw, &equispaced(trim.0, trim.1, a.grid_m))?),
    };
    let res = compute_residuals(&sample, &qhat, shat.as_ref(), trim)?;
    let res_i = match kind {
        TestKind::Monotone => Some(compute_residuals(&sample, &q_rearranged, shat.as_ref(), trim)?),
        _ => None,
    };
    let field = independence_process(res_i.as_ref().unwrap_or(&res), &res, sample.len())?;

    fs::create_dir_all(&a.output)?;
    let mut files = Vec::new();
    let mut save_curve = |curve: &Curve, file: &str, column: &str| -> CliResult<()> {
        curve.write_csv(BufWriter::new(File::create(a.output.join(file))?), column)?;
        files.push(file.to_string());
        Ok(())
    };
    save_curve(&qhat, QHAT_FILE, "qhat")?;
    save_curve(&q_rearranged, REARRANGED_FILE, "q_rearranged")?;
    if let Some(s) = &shat {
        save_curve(s, SHAT_FILE, "shat")?;
    }

    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(a.output.join(RESIDUALS_FILE))?));
    match &res_i {
        Some(ri) => {
            w.write_record(["index", "x", "y", "eps", "eps_constrained"])?;
            for k in 0..res.n_trim() {
                let i = res.indices[k];
                w.serialize((i, res.x[k], sample.y()[i], res.eps[k], ri.eps[k]))?;
            }
        }
        None => {
            w.write_record(["index", "x", "y", "eps"])?;
            for k in 0..res.n_trim() {
                let i = res.indices[k];
                w.serialize((i, res.x[k], sample.y()[i], res.eps[k]))?;
            }
        }
    }
    w.flush()?;
    files.push(RESIDUALS_FILE.to_string());

    field.write_csv(BufWriter::new(File::create(a.output.join(PROCESS_FILE))?))?;
    files.push(PROCESS_FILE.to_string());

    if a.plot {
        fs::write(a.output.join(PLOT_FILE), gnuplot_script(shat.is_some()))?;
        files.push(PLOT_FILE.to_string());
    }

    let summary = EstimateSummary {
        model_kind: kind,
        n: sample.len(),
        tau: a.data.tau,
        grid_m: a.grid_m,
        bandwidths: bw,
        n_trim: res.n_trim(),
        statistic_ks: ks_statistic(&field),
        statistic_cvm: cvm_statistic(&field, sample.x(), &res),
        files,
    };
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &summary).map_err(|e| CliError::data(e.to_string()))?;
    writeln!(out)?;
    Ok(summary)
}

fn gnuplot_script(with_scale: bool) -> String {
    let mut s = String::from(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set multiplot layout 2,2\n\
         set title 'quantile curve'\n\
         plot 'residuals.csv' using 2:3 with points pt 7 ps 0.4 title 'data', \\\n\
         \x20    'qhat.csv' using 1:2 with lines lw 2, \\\n\
         \x20    'q_rearranged.csv' using 1:2 with lines lw 2 dt 2\n",
    );
    if with_scale {
        s.push_str("set title 'scale'\nplot 'shat.csv' using 1:2 with lines lw 2\n");
    }
    s.push_str(
        "set title 'residuals'\n\
         plot 'residuals.csv' using 2:4 with points pt 7 ps 0.4\n\
         set title 'independence process'\n\
         set view map\n\
         splot 'process.csv' using 1:2:3 with points pt 5 ps 0.3 palette\n\
         unset multiplot\n",
    );
    s
}

fn default_kind(model: &Model) -> TestKind {
    match model {
        Model::M4 { .. } | Model::M5 => TestKind::Monotone,
        Model::M1h | Model::M2ah { .. } | Model::M2bh { .. } | Model::M3h { .. } => TestKind::LocationScale,
        _ => TestKind::Location,
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<StudyResult> {
    check_unit("tau", a.tau)?;
    check_unit("level", a.level)?;
    if a.runs == 0 {
        return Err(CliError::usage("runs must be ≥ 1"));
    }
    if a.replications == 0 {
        return Err(CliError::usage("B must be ≥ 1"));
    }
    let params = ModelParams { a: a.a, b: a.b, c: a.c, beta: a.beta };
    let model = Model::from_id(&a.model, params)?;
    let mut cfg = StudyConfig::new(model, a.n, a.runs, a.model_kind.unwrap_or_else(|| default_kind(&model)));
    cfg.replications = a.replications;
    cfg.tau = a.tau;
    cfg.level = a.level;
    cfg.seed = a.seed;
    cfg.workers = a.workers;
    cfg.grid_m = a.grid_m;
    cfg.trim_unit = a.trim;
    let result = run_study(&cfg)?;
    let rows = std::slice::from_ref(&result);
    StudyResult::write_csv(rows, open_output(a.output.as_deref())?)?;
    eprint!("{}", StudyResult::table(rows));
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("qlscale").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_parse() {
        let cli = parse(&[
            "test", "--input", "d.csv", "--tau", "0.25", "--B", "50", "--model-kind", "location-scale", "--h", "0.1",
            "--kernel-K", "epanechnikov", "--stat", "ks",
        ]);
        let Command::Test(t) = cli.command else { panic!() };
        assert_eq!(t.replications, 50);
        assert_eq!(t.data.model_kind, TestKind::LocationScale);
        assert_eq!(t.bandwidths.h, Some(0.1));
        assert_eq!(t.bandwidths.kernel, Some(KernelKind::Epanechnikov));
        assert_eq!(t.stat, StatChoice::Ks);
        assert_eq!(t.grid_m, DEFAULT_GRID_M);
    }

    #[test]
    fn simulate_b_is_a_model_parameter() {
        let cli = parse(&["simulate", "--model", "m3", "--b", "5", "--runs", "3"]);
        let Command::Simulate(s) = cli.command else { panic!() };
        assert_eq!(s.b, Some(5.0));
        assert_eq!(s.runs, 3);
    }

    #[test]
    fn bad_kind_is_usage_error() {
        assert!(Cli::try_parse_from(["qlscale", "test", "--input", "d", "--model-kind", "quadratic"]).is_err());
        assert_eq!(main_with_args(["qlscale", "simulate", "--model", "m5", "--runs", "0"]), EXIT_USAGE);
        assert_eq!(main_with_args(["qlscale", "simulate", "--model", "m3"]), EXIT_USAGE);
        assert_eq!(main_with_args(["qlscale", "test", "--input", "d.csv", "--tau", "1.5"]), EXIT_USAGE);
    }

    #[test]
    fn overrides_apply() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 + 0.5) / 50.0).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + 0.1 * ((i * 7 % 11) as f64 / 11.0)).collect();
        let s = Sample::new(x, y).unwrap();
        let o = BandwidthArgs { h: Some(0.04), b: Some(0.2), trim: Some(0.1), ..Default::default() };
        let bw = resolve_bandwidths(&s, &o).unwrap();
        assert_eq!((bw.h, bw.d, bw.b, bw.trim_unit), (0.04, 0.08, 0.2, 0.1));
        let o = BandwidthArgs { h: Some(0.03), ..Default::default() };
        assert_eq!(resolve_bandwidths(&s, &o).unwrap().trim_unit, 0.0);
        let o = BandwidthArgs { trim: Some(0.2), ..Default::default() };
        assert_eq!(resolve_bandwidths(&s, &o).unwrap_err().code, EXIT_USAGE);
    }
}
