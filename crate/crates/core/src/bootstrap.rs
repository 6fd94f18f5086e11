//! Smooth residual bootstrap for the independence tests.
//!
//! Bootstrap responses are `Y*_i = q(X_i) + s(X_i) ε*_i` with `ε*` drawn from
//! the trimmed data residuals plus `α Z`. Every replication re-estimates the
//! curves with the data bandwidths and recomputes the statistics on the
//! narrower bootstrap trimming.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use crate::bandwidths::{bootstrap_alpha, in_trim, BandwidthSet};
use crate::curve::{equispaced, Curve};
use crate::error::{Error, Result};
use crate::kernels::standard_normal;
use crate::quantile_scale::{QuantileEstimator, ScaleEstimator};
use crate::rearrangement::constrained_quantile_curve;
use crate::residual_process::{
    cvm_statistic, independence_process, ks_statistic, residuals_with, ProcessField, ResidualSet,
};
use crate::rng::{stream, ROLE_REPLICATION};
use crate::sample::Sample;

/// Default grid for the monotone test.
pub const DEFAULT_GRID_M: usize = 201;

/// Largest tolerated share of failed replications.
pub const MAX_FAILED_SHARE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// `Y = q(X) + ε`: scale fixed at one.
    Location,
    /// `Y = q(X) + s(X) ε`.
    LocationScale,
    /// Location-scale model with a nondecreasing quantile curve.
    Monotone,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::Location => "location",
            TestKind::LocationScale => "location_scale",
            TestKind::Monotone => "monotone",
        })
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "location" => Ok(TestKind::Location),
            "location_scale" => Ok(TestKind::LocationScale),
            "monotone" => Ok(TestKind::Monotone),
            other => Err(Error::InvalidParameter(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Curve on which bootstrap responses are centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Center {
    UnconstrainedQ,
    RearrangedQ,
}

impl TestKind {
    pub fn center(self) -> Center {
        match self {
            TestKind::Monotone => Center::RearrangedQ,
            _ => Center::UnconstrainedQ,
        }
    }

    fn uses_scale(self) -> bool {
        !matches!(self, TestKind::Location)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    #[serde(rename = "B")]
    pub replications: usize,
    pub level: f64,
    pub seed: u64,
    /// Thread count; results do not depend on it.
    #[serde(skip)]
    pub workers: usize,
    /// Grid size for estimation and rearrangement in the monotone test.
    pub grid_m: usize,
    /// Replaces the residual-based smoothing level when set.
    pub alpha: Option<f64>,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { replications: 200, level: 0.05, seed: 0, workers: 1, grid_m: DEFAULT_GRID_M, alpha: None }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidParameter("B must be ≥ 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidParameter(format!("level {} not in (0, 1)", self.level)));
        }
        if self.grid_m < 3 {
            return Err(Error::InvalidParameter("grid_m must be ≥ 3".into()));
        }
        Ok(())
    }
}

/// Smoothed residual distribution `F̃(y) = mean_i Φ((y - ε̂_i)/α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothErrorCdf {
    pub residuals: Vec<f64>,
    pub alpha: f64,
}

impl SmoothErrorCdf {
    pub fn new(residuals: Vec<f64>, alpha: f64) -> Result<Self> {
        if residuals.is_empty() {
            return Err(Error::DegenerateSample("no residuals to resample".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} must be ≥ 0")));
        }
        Ok(SmoothErrorCdf { residuals, alpha })
    }

    /// With `alpha = 0` this is the residual EDF.
    pub fn eval(&self, y: f64) -> f64 {
        let phi = standard_normal();
        let s: f64 = if self.alpha > 0.0 {
            self.residuals.iter().map(|&e| phi.cdf((y - e) / self.alpha)).sum()
        } else {
            self.residuals.iter().filter(|&&e| e <= y).count() as f64
        };
        s / self.residuals.len() as f64
    }

    /// `ε*_i = ε̂_{J_i} + α Z_i` with `J_i` uniform; index then normal per draw.
    pub fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let k = self.residuals.len();
        (0..n)
            .map(|_| {
                let j = rng.random_range(0..k);
                let z: f64 = rng.sample(StandardNormal);
                self.residuals[j] + self.alpha * z
            })
            .collect()
    }
}

/// Distinct covariates in `[lo, hi]` plus both endpoints.
fn nodes_with_ends(xs: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut v: Vec<f64> = xs.iter().copied().filter(|&x| x >= lo && x <= hi).collect();
    v.push(lo);
    v.push(hi);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Distinct covariates in the half-open trimming interval.
fn nodes_in_trim(xs: &[f64], trim: (f64, f64)) -> Vec<f64> {
    let mut v: Vec<f64> = xs.iter().copied().filter(|&x| in_trim(x, trim)).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn tabulate<F: Fn(f64) -> Result<f64>>(nodes: Vec<f64>, f: F) -> Result<Curve> {
    let values = nodes.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    Curve::new(nodes, values)
}

/// Curves and residuals of one fit; shared by the data and bootstrap stages.
#[derive(Debug, Clone)]
pub struct Fit {
    pub qhat: Curve,
    /// Rearranged quantile curve (monotone test only).
    pub q_constrained: Option<Curve>,
    /// `None` in the location model.
    pub shat: Option<Curve>,
    pub residuals: ResidualSet,
    /// Residuals of the rearranged curve (monotone test only).
    pub residuals_constrained: Option<ResidualSet>,
}

impl Fit {
    /// Numerator residuals of the process.
    pub fn numerator(&self) -> &ResidualSet {
        self.residuals_constrained.as_ref().unwrap_or(&self.residuals)
    }

    pub fn field(&self, n: usize) -> Result<ProcessField> {
        independence_process(self.numerator(), &self.residuals, n)
    }
}

/// Estimates curves on `sample` and residuals on `trim`.
///
/// `full` tabulates `q̂` on the whole estimation domain (needed for the data
/// stage); otherwise only the points the statistics use are evaluated.
pub fn fit(sample: &Sample, tau: f64, bw: &BandwidthSet, kind: TestKind, trim: (f64, f64), grid_m: usize, full: bool) -> Result<Fit> {
    let (lo, hi) = bw.estimation_domain();
    let qest = QuantileEstimator::new(sample, tau, bw)?;
    let xs = sample.x();

    let (qhat, q_constrained) = match kind {
        TestKind::Monotone => {
            let q = tabulate(equispaced(lo, hi, grid_m), |x| qest.at(x))?;
            let qi = constrained_quantile_curve(&q, lo, hi, grid_m)?;
            (q, Some(qi))
        }
        TestKind::LocationScale => (tabulate(nodes_with_ends(xs, lo, hi), |x| qest.at(x))?, None),
        TestKind::Location => {
            let nodes = if full { nodes_with_ends(xs, lo, hi) } else { nodes_in_trim(xs, trim) };
            (tabulate(nodes, |x| qest.at(x))?, None)
        }
    };

    let shat = if kind.uses_scale() {
        let mut sx = Vec::new();
        let mut se = Vec::new();
        for (&x, &y) in xs.iter().zip(sample.y()) {
            if x >= lo && x <= hi {
                sx.push(x);
                se.push((y - qhat.eval(x)?).abs());
            }
        }
        let sest = ScaleEstimator::new(&sx, &se, bw.local_poly()?, bw.b)?;
        let nodes = if full { nodes_with_ends(xs, trim.0, trim.1) } else { nodes_in_trim(xs, trim) };
        Some(tabulate(nodes, |x| sest.at(x))?)
    } else {
        None
    };

    let scale = |x: f64| shat.as_ref().map_or(Ok(1.0), |s| s.eval(x));
    let residuals = residuals_with(sample, trim, |x| qhat.eval(x), scale)?;
    let residuals_constrained = match &q_constrained {
        Some(qi) => Some(residuals_with(sample, trim, |x| qi.eval(x), scale)?),
        None => None,
    };
    Ok(Fit { qhat, q_constrained, shat, residuals, residuals_constrained })
}

/// Statistics of one fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Statistics {
    pub ks: f64,
    pub cvm: f64,
}

fn statistics(fit: &Fit, sample: &Sample) -> Result<Statistics> {
    let field = fit.field(sample.len())?;
    Ok(Statistics { ks: ks_statistic(&field), cvm: cvm_statistic(&field, sample.x(), &fit.residuals) })
}

/// Everything derived from the observed data.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub kind: TestKind,
    pub tau: f64,
    /// Bandwidths with the smoothing level filled in.
    pub bw: BandwidthSet,
    pub fit: Fit,
    pub field: ProcessField,
    pub observed: Statistics,
}

impl Analysis {
    pub fn new(sample: &Sample, tau: f64, bw: &BandwidthSet, kind: TestKind, cfg: &BootstrapConfig) -> Result<Self> {
        bw.validate()?;
        cfg.validate()?;
        for trim in [bw.data_trim(), bw.boot_trim()] {
            if !sample.x().iter().any(|&x| in_trim(x, trim)) {
                return Err(Error::TrimEmpty { lo: trim.0, hi: trim.1 });
            }
        }
        let fit = fit(sample, tau, bw, kind, bw.data_trim(), cfg.grid_m, true)?;
        let alpha = match cfg.alpha {
            Some(a) => a,
            None => bootstrap_alpha(&fit.residuals.eps, sample.len())?,
        };
        let field = fit.field(sample.len())?;
        let observed = Statistics { ks: ks_statistic(&field), cvm: cvm_statistic(&field, sample.x(), &fit.residuals) };
        Ok(Analysis { kind, tau, bw: bw.clone().with_alpha(alpha), fit, field, observed })
    }

    /// Curve the bootstrap responses are centered on.
    pub fn center(&self) -> &Curve {
        match self.kind.center() {
            Center::RearrangedQ => self.fit.q_constrained.as_ref().unwrap_or(&self.fit.qhat),
            Center::UnconstrainedQ => &self.fit.qhat,
        }
    }

    pub fn error_cdf(&self) -> Result<SmoothErrorCdf> {
        SmoothErrorCdf::new(self.fit.residuals.eps.clone(), self.bw.alpha)
    }

    /// Bootstrap responses; curves are held constant outside their domains.
    pub fn bootstrap_sample(&self, sample: &Sample, errors: &SmoothErrorCdf, rng: &mut ChaCha8Rng) -> Result<Sample> {
        let eps = errors.draw(sample.len(), rng);
        let center = self.center();
        let y = sample
            .x()
            .iter()
            .zip(&eps)
            .map(|(&x, &e)| {
                let s = self.fit.shat.as_ref().map_or(1.0, |c| c.eval_clamped(x));
                center.eval_clamped(x) + s * e
            })
            .collect();
        sample.with_responses(y)
    }

    /// Statistics of replication `index`, reproducible from `(seed, index)` alone.
    pub fn replicate(&self, sample: &Sample, errors: &SmoothErrorCdf, seed: u64, index: u64, grid_m: usize) -> Result<Statistics> {
        let mut rng = stream(seed, ROLE_REPLICATION, index);
        let star = self.bootstrap_sample(sample, errors, &mut rng)?;
        let fit = fit(&star, self.tau, &self.bw, self.kind, self.bw.boot_trim(), grid_m, false)?;
        statistics(&fit, &star)
    }
}

/// Report of one test, serialized as JSON by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic_ks: f64,
    pub statistic_cvm: f64,
    /// `None` when too few replications succeeded to reach the level.
    pub critical_ks: Option<f64>,
    pub critical_cvm: Option<f64>,
    pub p_ks: f64,
    pub p_cvm: f64,
    pub reject_ks: bool,
    pub reject_cvm: bool,
    #[serde(rename = "B_effective")]
    pub b_effective: usize,
    pub failed: usize,
    pub config: ReportConfig,
}

/// Configuration echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub model_kind: TestKind,
    pub center: Center,
    pub n: usize,
    pub tau: f64,
    pub level: f64,
    #[serde(rename = "B")]
    pub replications: usize,
    pub seed: u64,
    pub grid_m: usize,
    pub bandwidths: BandwidthSet,
}

/// Bootstrap draws next to the report.
#[derive(Debug, Clone)]
pub struct TestOutcome {
    pub report: TestReport,
    pub analysis: Analysis,
    pub draws: Vec<Statistics>,
}

/// The `⌈(1-α)(B+1)⌉`-th order statistic, or `None` if it exceeds `B`.
pub fn critical_value(draws: &[f64], level: f64) -> Option<f64> {
    let b = draws.len();
    let rank = b + 1 - (level * (b + 1) as f64 + 1e-9).floor() as usize;
    if rank == 0 || rank > b {
        return None;
    }
    let mut v = draws.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[rank - 1])
}

/// `(1 + #{draws ≥ observed}) / (B + 1)`.
pub fn p_value(draws: &[f64], observed: f64) -> f64 {
    (1 + draws.iter().filter(|&&d| d >= observed).count()) as f64 / (draws.len() + 1) as f64
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

/// Runs the test on a pool of `cfg.workers` threads.
pub fn bootstrap_test(sample: &Sample, tau: f64, bw: &BandwidthSet, cfg: &BootstrapConfig, kind: TestKind) -> Result<TestReport> {
    run_test(sample, tau, bw, cfg, kind).map(|o| o.report)
}

pub fn run_test(sample: &Sample, tau: f64, bw: &BandwidthSet, cfg: &BootstrapConfig, kind: TestKind) -> Result<TestOutcome> {
    pool(cfg.workers)?.install(|| run_test_in_pool(sample, tau, bw, cfg, kind))
}

/// As [`run_test`] on the current rayon pool.
pub fn run_test_in_pool(sample: &Sample, tau: f64, bw: &BandwidthSet, cfg: &BootstrapConfig, kind: TestKind) -> Result<TestOutcome> {
    let analysis = Analysis::new(sample, tau, bw, kind, cfg)?;
    let errors = analysis.error_cdf()?;
    let results: Vec<Result<Statistics>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|b| analysis.replicate(sample, &errors, cfg.seed, b, cfg.grid_m))
        .collect();
    let draws: Vec<Statistics> = results.into_iter().filter_map(|r| r.ok()).collect();
    let failed = cfg.replications - draws.len();
    if failed as f64 > MAX_FAILED_SHARE * cfg.replications as f64 {
        return Err(Error::BootstrapUnstable { failed, total: cfg.replications });
    }
    let report = summarize(&analysis, &draws, failed, sample.len(), cfg);
    Ok(TestOutcome { report, analysis, draws })
}

fn summarize(analysis: &Analysis, draws: &[Statistics], failed: usize, n: usize, cfg: &BootstrapConfig) -> TestReport {
    let ks: Vec<f64> = draws.iter().map(|s| s.ks).collect();
    let cvm: Vec<f64> = draws.iter().map(|s| s.cvm).collect();
    let critical_ks = critical_value(&ks, cfg.level);
    let critical_cvm = critical_value(&cvm, cfg.level);
    let obs = analysis.observed;
    TestReport {
        statistic_ks: obs.ks,
        statistic_cvm: obs.cvm,
        critical_ks,
        critical_cvm,
        p_ks: p_value(&ks, obs.ks),
        p_cvm: p_value(&cvm, obs.cvm),
        reject_ks: critical_ks.is_some_and(|k| obs.ks >= k),
        reject_cvm: critical_cvm.is_some_and(|k| obs.cvm >= k),
        b_effective: draws.len(),
        failed,
        config: ReportConfig {
            model_kind: analysis.kind,
            center: analysis.kind.center(),
            n,
            tau: analysis.tau,
            level: cfg.level,
            replications: cfg.replications,
            seed: cfg.seed,
            grid_m: cfg.grid_m,
            bandwidths: analysis.bw.clone(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn toy_sample(n: usize, seed: u64, hetero: f64) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y = x
            .iter()
            .map(|&v| v - 0.5 * v * v + 0.1 * (1.0 + hetero * v) * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Sample::new(x, y).unwrap()
    }

    #[test]
    fn smooth_cdf_values() {
        let c = SmoothErrorCdf::new(vec![0.0], 1.0).unwrap();
        for &y in &[-1.5, 0.0, 0.7] {
            assert_abs_diff_eq!(c.eval(y), standard_normal().cdf(y), epsilon = 1e-15);
        }
        let r = vec![-0.3, 0.1, 0.2, 0.5, -0.05];
        let c = SmoothErrorCdf::new(r.clone(), 0.1).unwrap();
        let direct: f64 = r.iter().map(|e| standard_normal().cdf(-e / 0.1)).sum::<f64>() / 5.0;
        assert_abs_diff_eq!(c.eval(0.0), direct, epsilon = 1e-15);
        assert_eq!(c.eval(f64::INFINITY), 1.0);
        assert_eq!(c.eval(f64::NEG_INFINITY), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b = a + rng.random_range(1e-3..0.5);
            assert!(c.eval(a) < c.eval(b));
        }
    }

    #[test]
    fn draws_follow_the_residual_distribution() {
        let r: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 / 50.0 - 0.3).collect();
        let c = SmoothErrorCdf::new(r.clone(), 0.0).unwrap();
        let n = 100_000;
        let d = c.draw(n, &mut ChaCha8Rng::seed_from_u64(1));
        let mut sorted = d.clone();
        sorted.sort_by(f64::total_cmp);
        let mut ks: f64 = 0.0;
        for &y in &r {
            let emp = sorted.partition_point(|&v| v <= y) as f64 / n as f64;
            ks = ks.max((emp - c.eval(y)).abs());
        }
        assert!(ks <= 0.02, "{ks}");

        let smooth = SmoothErrorCdf::new(r.clone(), 0.05).unwrap();
        let d = smooth.draw(n, &mut ChaCha8Rng::seed_from_u64(2));
        let mean = d.iter().sum::<f64>() / n as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target = r.iter().sum::<f64>() / r.len() as f64;
        assert!((mean - target).abs() <= 4.0 * (var / n as f64).sqrt());
        assert_eq!(d, smooth.draw(n, &mut ChaCha8Rng::seed_from_u64(2)));
    }

    #[test]
    fn critical_value_and_p_value_conventions() {
        assert_eq!(p_value(&[1.0], 2.0), 0.5);
        assert_eq!(p_value(&[1.0], 0.5), 1.0);
        let draws: Vec<f64> = (1..=200).map(|i| i as f64).collect();
        // ⌈0.95 · 201⌉ = 191
        assert_eq!(critical_value(&draws, 0.05), Some(191.0));
        assert_eq!(critical_value(&[1.0, 2.0], 0.05), None);
        assert_eq!(critical_value(&[1.0, 2.0], 0.34), Some(2.0));
        assert_eq!(critical_value(&[1.0], 0.5), Some(1.0));
        assert_eq!(critical_value(&[1.0], 0.6), Some(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let b = rng.random_range(1..60);
            let draws: Vec<f64> = (0..b).map(|_| rng.random::<f64>()).collect();
            let obs: f64 = rng.random();
            let level = rng.random_range(0.01..0.5);
            let reject = critical_value(&draws, level).is_some_and(|k| obs >= k);
            assert_eq!(reject, p_value(&draws, obs) <= level + 1e-12, "b={b} level={level}");
        }
    }

    #[test]
    fn kind_names() {
        for k in [TestKind::Location, TestKind::LocationScale, TestKind::Monotone] {
            assert_eq!(k.to_string().parse::<TestKind>().unwrap(), k);
        }
        assert_eq!("location-scale".parse::<TestKind>().unwrap(), TestKind::LocationScale);
        assert!("scale".parse::<TestKind>().is_err());
    }

    #[test]
    fn bootstrap_boundary_identity_and_reproducibility() {
        let s = toy_sample(80, 4, 0.0);
        let bw = BandwidthSet::from_sample(&s).unwrap();
        let cfg = BootstrapConfig { replications: 3, seed: 17, ..Default::default() };
        for kind in [TestKind::Location, TestKind::LocationScale, TestKind::Monotone] {
            let a = Analysis::new(&s, 0.5, &bw, kind, &cfg).unwrap();
            let w = a.field.y_grid.len();
            assert!((0..a.field.t_grid.len()).all(|i| a.field.get(i, w - 1).abs() <= 1e-12));
            if kind != TestKind::Monotone {
                assert!(a.field.boundary_defect() <= 1e-12);
            }
            let errors = a.error_cdf().unwrap();
            let mut rng = stream(17, ROLE_REPLICATION, 0);
            let star = a.bootstrap_sample(&s, &errors, &mut rng).unwrap();
            let f = fit(&star, 0.5, &a.bw, kind, a.bw.boot_trim(), cfg.grid_m, false).unwrap();
            let plain = independence_process(&f.residuals, &f.residuals, s.len()).unwrap();
            assert!(plain.boundary_defect() <= 1e-12);
            let r1 = a.replicate(&s, &errors, 17, 2, cfg.grid_m).unwrap();
            let r2 = a.replicate(&s, &errors, 17, 2, cfg.grid_m).unwrap();
            assert_eq!(r1, r2);
        }
    }

    #[test]
    fn location_residuals_are_centered_at_the_quantile() {
        let s = toy_sample(200, 6, 0.0);
        let bw = BandwidthSet::from_sample(&s).unwrap();
        let a = Analysis::new(&s, 0.5, &bw, TestKind::Location, &BootstrapConfig::default()).unwrap();
        let eps = &a.fit.residuals.eps;
        let below = eps.iter().filter(|&&e| e <= 0.0).count() as f64 / eps.len() as f64;
        assert!((below - 0.5).abs() <= 0.1, "{below}");
        assert!(a.fit.shat.is_none());
    }

    #[test]
    fn monotone_estimate_gives_identical_processes() {
        // clearly increasing median: the rearrangement leaves q̂ untouched
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x: Vec<f64> = (0..150).map(|_| rng.random::<f64>()).collect();
        let y = x.iter().map(|&v| 2.0 * v + 0.05 * rng.sample::<f64, _>(StandardNormal)).collect();
        let s = Sample::new(x, y).unwrap();
        let bw = BandwidthSet::from_sample(&s).unwrap();
        let a = Analysis::new(&s, 0.5, &bw, TestKind::Monotone, &BootstrapConfig::default()).unwrap();
        assert!(a.fit.qhat.is_nondecreasing());
        assert_eq!(a.fit.q_constrained.as_ref().unwrap(), &a.fit.qhat);
        let plain = independence_process(&a.fit.residuals, &a.fit.residuals, s.len()).unwrap();
        assert_eq!(plain, a.field);
    }

    #[test]
    fn one_replication_p_values() {
        let s = toy_sample(60, 2, 0.0);
        let bw = BandwidthSet::from_sample(&s).unwrap();
        let cfg = BootstrapConfig { replications: 1, seed: 3, ..Default::default() };
        let r = bootstrap_test(&s, 0.5, &bw, &cfg, TestKind::Location).unwrap();
        assert!(r.p_ks == 0.5 || r.p_ks == 1.0);
        assert!(r.p_cvm == 0.5 || r.p_cvm == 1.0);
        assert_eq!(r.b_effective + r.failed, 1);
    }

    #[test]
    fn empty_bootstrap_trim_is_reported() {
        let s = toy_sample(30, 1, 0.0);
        let bw = BandwidthSet::from_sample(&s).unwrap().with_trim_unit(0.124);
        let x: Vec<f64> = s.x().iter().map(|v| if (0.45..0.55).contains(v) { 0.9 } else { *v }).collect();
        let s = Sample::new(x, s.y().to_vec()).unwrap();
        let err = bootstrap_test(&s, 0.5, &bw, &BootstrapConfig::default(), TestKind::Location).unwrap_err();
        assert!(err.to_string().contains("trim interval empty"), "{err}");
    }

    #[test]
    fn worker_count_does_not_change_the_report() {
        let s = toy_sample(70, 9, 1.0);
        let bw = BandwidthSet::from_sample(&s).unwrap();
        let one = BootstrapConfig { replications: 8, seed: 21, workers: 1, ..Default::default() };
        let four = BootstrapConfig { workers: 4, ..one.clone() };
        let a = bootstrap_test(&s, 0.5, &bw, &one, TestKind::LocationScale).unwrap();
        let b = bootstrap_test(&s, 0.5, &bw, &four, TestKind::LocationScale).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
