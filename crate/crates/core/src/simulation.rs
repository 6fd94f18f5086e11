//! Data-generating models and the Monte-Carlo rejection-rate driver.

use std::fmt;
use std::io;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use crate::bandwidths::BandwidthSet;
use crate::bootstrap::{run_test_in_pool, BootstrapConfig, TestKind, DEFAULT_GRID_M};
use crate::error::{Error, Result};
use crate::kernels::standard_normal;
use crate::rng::{derive_seed, stream, ROLE_DATA, ROLE_RUN_BOOT};
use crate::sample::Sample;

/// Regression models; `*h` variants multiply the error by `(2 + x)/10`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "lowercase")]
pub enum Model {
    M1 { a: f64 },
    M2a { c: f64 },
    M2b { c: f64 },
    M3 { b: f64 },
    M1h,
    M2ah { c: f64 },
    M2bh { c: f64 },
    M3h { b: f64 },
    M4 { beta: f64 },
    M5,
}

/// Named model parameters as given on the command line.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModelParams {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub beta: Option<f64>,
}

fn base(x: f64) -> f64 {
    x - 0.5 * x * x
}

fn hetero(x: f64) -> f64 {
    (2.0 + x) / 10.0
}

impl Model {
    pub fn id(&self) -> &'static str {
        match self {
            Model::M1 { .. } => "m1",
            Model::M2a { .. } => "m2a",
            Model::M2b { .. } => "m2b",
            Model::M3 { .. } => "m3",
            Model::M1h => "m1h",
            Model::M2ah { .. } => "m2ah",
            Model::M2bh { .. } => "m2bh",
            Model::M3h { .. } => "m3h",
            Model::M4 { .. } => "m4",
            Model::M5 => "m5",
        }
    }

    /// `(name, value)` of the model parameter, if any.
    pub fn param(&self) -> Option<(&'static str, f64)> {
        match *self {
            Model::M1 { a } => Some(("a", a)),
            Model::M2a { c } | Model::M2b { c } | Model::M2ah { c } | Model::M2bh { c } => Some(("c", c)),
            Model::M3 { b } | Model::M3h { b } => Some(("b", b)),
            Model::M4 { beta } => Some(("beta", beta)),
            Model::M1h | Model::M5 => None,
        }
    }

    /// Builds a model from its id; a missing parameter is an error.
    pub fn from_id(id: &str, p: ModelParams) -> Result<Self> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidParameter(format!("model {id} needs --{name}")))
        };
        let m = match id.to_ascii_lowercase().as_str() {
            "m1" => Model::M1 { a: need(p.a, "a")? },
            "m2a" => Model::M2a { c: need(p.c, "c")? },
            "m2b" => Model::M2b { c: need(p.c, "c")? },
            "m3" => Model::M3 { b: need(p.b, "b")? },
            "m1h" => Model::M1h,
            "m2ah" => Model::M2ah { c: need(p.c, "c")? },
            "m2bh" => Model::M2bh { c: need(p.c, "c")? },
            "m3h" => Model::M3h { b: need(p.b, "b")? },
            "m4" => Model::M4 { beta: need(p.beta, "beta")? },
            "m5" => Model::M5,
            other => return Err(Error::InvalidParameter(format!("unknown model `{other}`"))),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            Model::M1 { a } if !(a >= 0.0) => bad(format!("m1 needs a ≥ 0 (got {a})")),
            Model::M2a { c } | Model::M2ah { c } if !(c >= 0.5) => bad(format!("t degrees of freedom c = {c} must be ≥ 1/2")),
            Model::M2b { c } | Model::M2bh { c } if !(0.0..=1.0).contains(&c) => bad(format!("c = {c} must lie in [0, 1]")),
            _ => Ok(()),
        }
        .and_then(|_| match self.param() {
            Some((name, v)) if !v.is_finite() => bad(format!("parameter {name} must be finite")),
            _ => Ok(()),
        })
    }

    /// One response at covariate `x`.
    fn draw_response(&self, x: f64, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Model::M1 { a } => base(x) + (1.0 + a * x).sqrt() / 10.0 * normal(rng),
            Model::M2a { c } => base(x) + 0.1 * (1.0 - 1.0 / (2.0 * c)).sqrt() * student(c, rng),
            Model::M2b { c } => base(x) + 0.1 * t_mixture(c * x, rng),
            Model::M3 { b } => base(x) + (fgm_u(x, b, rng) - 0.5 - b / 6.0 * (2.0 * x - 1.0)),
            Model::M1h => base(x) + hetero(x) * normal(rng),
            Model::M2ah { c } => base(x) + hetero(x) * (1.0 - 1.0 / (2.0 * c)).sqrt() * student(c, rng),
            Model::M2bh { c } => base(x) + hetero(x) * t_mixture(c * x, rng),
            Model::M3h { b } => base(x) + hetero(x) * (fgm_u(x, b, rng) - 0.5 - b * (2.0 * x - 1.0)),
            Model::M4 { beta } => m4_curve(x, beta) + 0.2 * normal(rng),
            Model::M5 => x / 2.0 + 2.0 * (0.1 - (x - 0.5).powi(2)) * normal(rng),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.param() {
            Some((name, v)) => write!(f, "{} {name}={v}", self.id()),
            None => f.write_str(self.id()),
        }
    }
}

fn m4_curve(x: f64, beta: f64) -> f64 {
    1.0 + x - beta * (-50.0 * (x - 0.5).powi(2)).exp()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn student(nu: f64, rng: &mut ChaCha8Rng) -> f64 {
    StudentT::new(nu).expect("validated degrees of freedom").sample(rng)
}

/// `(1 - r^{1/4})^{1/2} t_{2/r^{1/4}}` with `r = cx`; normal at `r = 0`.
fn t_mixture(r: f64, rng: &mut ChaCha8Rng) -> f64 {
    let q = r.powf(0.25);
    if q == 0.0 {
        return normal(rng);
    }
    let nu = 2.0 / q;
    assert!(nu >= 2.0, "degrees of freedom {nu} below 2");
    (1.0 - q).sqrt() * student(nu, rng)
}

/// Copula construction with `X` given: `U = min(V, W/(b(1-2X)))` for `X ≤ 1/2`,
/// `U = max(V, 1 + W/(b(1-2X)))` otherwise, and `U = V` when `b(1-2X) = 0`.
pub fn fgm_u(x: f64, b: f64, rng: &mut ChaCha8Rng) -> f64 {
    let v: f64 = rng.random();
    let w: f64 = rng.random();
    let div = b * (1.0 - 2.0 * x);
    if div == 0.0 {
        v
    } else if x <= 0.5 {
        v.min(w / div)
    } else {
        v.max(1.0 + w / div)
    }
}

/// `n` pairs with `X ~ U[0, 1]`; each observation draws `X` first, then its noise.
pub fn generate(model: &Model, n: usize, rng: &mut ChaCha8Rng) -> Result<Sample> {
    model.validate()?;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: f64 = rng.random();
        y.push(model.draw_response(xi, rng));
        x.push(xi);
    }
    Sample::new(x, y)
}

/// True conditional `τ`-quantile for the monotonicity models.
pub fn true_quantile(model: &Model, tau: f64, x: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} not in (0, 1)")));
    }
    let z = standard_normal().inverse_cdf(tau);
    match *model {
        Model::M4 { beta } => Ok(m4_curve(x, beta) + 0.2 * z),
        // the scale factor changes sign near the ends; the quantile uses its modulus
        Model::M5 => Ok(x / 2.0 + (2.0 * (0.1 - (x - 0.5).powi(2))).abs() * z),
        other => Err(Error::InvalidParameter(format!("no closed-form quantile for {}", other.id()))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub model: Model,
    pub n: usize,
    pub runs: usize,
    pub replications: usize,
    pub tau: f64,
    pub level: f64,
    pub kind: TestKind,
    pub seed: u64,
    pub workers: usize,
    pub grid_m: usize,
    /// Overrides the default trimming unit.
    pub trim_unit: Option<f64>,
}

impl StudyConfig {
    pub fn new(model: Model, n: usize, runs: usize, kind: TestKind) -> Self {
        StudyConfig {
            model,
            n,
            runs,
            replications: 200,
            tau: 0.5,
            level: 0.05,
            kind,
            seed: 0,
            workers: 1,
            grid_m: DEFAULT_GRID_M,
            trim_unit: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidParameter("runs must be ≥ 1".into()));
        }
        if self.n < 10 {
            return Err(Error::InvalidParameter("n must be ≥ 10".into()));
        }
        self.model.validate()
    }

    fn bootstrap(&self, seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            replications: self.replications,
            level: self.level,
            seed,
            workers: 1,
            grid_m: self.grid_m,
            alpha: None,
        }
    }

    /// Sample of run `index`.
    pub fn sample(&self, index: usize) -> Result<Sample> {
        generate(&self.model, self.n, &mut stream(self.seed, ROLE_DATA, index as u64))
    }

    /// Root bootstrap seed of run `index`.
    pub fn run_seed(&self, index: usize) -> u64 {
        derive_seed(self.seed, ROLE_RUN_BOOT, index as u64)
    }
}

/// Decisions of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub reject_ks: bool,
    pub reject_cvm: bool,
}

/// Flat record written as one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub model: String,
    pub param: Option<String>,
    pub kind: TestKind,
    pub n: usize,
    pub runs: usize,
    #[serde(rename = "B")]
    pub replications: usize,
    pub tau: f64,
    pub level: f64,
    pub reject_rate_ks: f64,
    pub reject_rate_cvm: f64,
    pub completed: usize,
    pub failures: usize,
    pub seed: u64,
}

impl StudyResult {
    pub fn write_csv<W: io::Write>(results: &[StudyResult], writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in results {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Plain-text table: one row per result with KS and CvM columns.
    pub fn table(results: &[StudyResult]) -> String {
        let mut out = format!(
            "{:<8} {:<10} {:<15} {:>5} {:>5} {:>6} {:>7} {:>7} {:>5}\n",
            "model", "param", "test", "n", "tau", "runs", "KS", "CvM", "fail"
        );
        for r in results {
            out.push_str(&format!(
                "{:<8} {:<10} {:<15} {:>5} {:>5} {:>6} {:>7.3} {:>7.3} {:>5}\n",
                r.model,
                r.param.as_deref().unwrap_or("-"),
                r.kind.to_string(),
                r.n,
                r.tau,
                r.runs,
                r.reject_rate_ks,
                r.reject_rate_cvm,
                r.failures
            ));
        }
        out
    }
}

/// Full study: generate, choose bandwidths, bootstrap test, per run.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    run_study_with(cfg, |sample, seed| {
        let mut bw = BandwidthSet::from_sample(sample)?;
        if let Some(m) = cfg.trim_unit {
            bw = bw.with_trim_unit(m);
        }
        let out = run_test_in_pool(sample, cfg.tau, &bw, &cfg.bootstrap(seed), cfg.kind)?;
        Ok(RunOutcome { reject_ks: out.report.reject_ks, reject_cvm: out.report.reject_cvm })
    })
}

/// Study with a caller-supplied per-run decision; runs that return an error
/// are counted as failures and excluded from the rates.
pub fn run_study_with<F>(cfg: &StudyConfig, decide: F) -> Result<StudyResult>
where
    F: Fn(&Sample, u64) -> Result<RunOutcome> + Sync,
{
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let outcomes: Vec<Option<RunOutcome>> = pool.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|r| cfg.sample(r).and_then(|s| decide(&s, cfg.run_seed(r))).ok())
            .collect()
    });
    let done: Vec<RunOutcome> = outcomes.into_iter().flatten().collect();
    let completed = done.len();
    let rate = |count: usize| if completed == 0 { 0.0 } else { count as f64 / completed as f64 };
    Ok(StudyResult {
        model: cfg.model.id().to_string(),
        param: cfg.model.param().map(|(name, v)| format!("{name}={v}")),
        kind: cfg.kind,
        n: cfg.n,
        runs: cfg.runs,
        replications: cfg.replications,
        tau: cfg.tau,
        level: cfg.level,
        reject_rate_ks: rate(done.iter().filter(|o| o.reject_ks).count()),
        reject_rate_cvm: rate(done.iter().filter(|o| o.reject_cvm).count()),
        completed,
        failures: cfg.runs - completed,
        seed: cfg.seed,
    })
}
