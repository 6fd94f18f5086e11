//! Tuning rules: Rice difference variance, the power-law bandwidths and the
//! bootstrap smoothing level.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cond_cdf::LocalPolyConfig;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::sample::Sample;

/// Default trimming unit: no boundary exclusion, so the data and bootstrap
/// statistics run over the same covariates.
pub const DEFAULT_TRIM_UNIT: f64 = 0.0;

/// Default local polynomial order.
pub const DEFAULT_ORDER: usize = 3;

/// Bandwidths and trimming for one analysis.
///
/// `trim_unit` (`m`) sets every boundary exclusion: curves are estimated on
/// `[m, 1-m]`, data residuals are trimmed to `(2m, 1-2m]` and bootstrap
/// residuals to `(4m, 1-4m]`. It defaults to [`DEFAULT_TRIM_UNIT`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSet {
    pub h: f64,
    pub d: f64,
    pub b: f64,
    pub alpha: f64,
    pub p: usize,
    pub kernel: KernelSpec,
    pub trim_unit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthWarning {
    /// `h ≥ 1/4`: the literal `[2h, 1-2h]` trimming would be empty.
    WideCovariateBandwidth { h: f64 },
}

impl fmt::Display for BandwidthWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandwidthWarning::WideCovariateBandwidth { h } => {
                write!(f, "covariate bandwidth h = {h:.4} ≥ 1/4; trimming uses the trim unit instead of h")
            }
        }
    }
}

impl BandwidthSet {
    /// Explicit `h, d, b`; `alpha = 0`, `p = 3`, Gaussian kernel, default trim unit.
    pub fn fixed(h: f64, d: f64, b: f64) -> Self {
        BandwidthSet {
            h,
            d,
            b,
            alpha: 0.0,
            p: DEFAULT_ORDER,
            kernel: KernelSpec::GAUSSIAN,
            trim_unit: DEFAULT_TRIM_UNIT,
        }
    }

    /// Rice variance followed by the default formulas.
    pub fn from_sample(sample: &Sample) -> Result<Self> {
        default_bandwidths(sample.len(), rice_variance(sample)?)
    }

    pub fn with_trim_unit(mut self, m: f64) -> Self {
        self.trim_unit = m;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("h", self.h), ("d", self.d), ("b", self.b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("bandwidth {name} = {v} must be positive")));
            }
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha = {} must be ≥ 0", self.alpha)));
        }
        if !(self.trim_unit >= 0.0 && self.trim_unit < 0.125) {
            return Err(Error::InvalidParameter(format!(
                "trim unit {} must lie in [0, 1/8)",
                self.trim_unit
            )));
        }
        Ok(())
    }

    pub fn local_poly(&self) -> Result<LocalPolyConfig> {
        LocalPolyConfig::new(self.p, self.h, self.d, self.kernel)
    }

    pub fn warnings(&self) -> Vec<BandwidthWarning> {
        let mut out = Vec::new();
        if self.h >= 0.25 {
            out.push(BandwidthWarning::WideCovariateBandwidth { h: self.h });
        }
        out
    }

    /// `[m, 1-m]`.
    pub fn estimation_domain(&self) -> (f64, f64) {
        (self.trim_unit, 1.0 - self.trim_unit)
    }

    /// `(2m, 1-2m]` as `(lo, hi)`.
    pub fn data_trim(&self) -> (f64, f64) {
        (2.0 * self.trim_unit, 1.0 - 2.0 * self.trim_unit)
    }

    /// `(4m, 1-4m]` as `(lo, hi)`.
    pub fn boot_trim(&self) -> (f64, f64) {
        (4.0 * self.trim_unit, 1.0 - 4.0 * self.trim_unit)
    }
}

/// Half-open membership used for every trimming interval.
pub fn in_trim(x: f64, (lo, hi): (f64, f64)) -> bool {
    x > lo && x <= hi
}

/// `Σ (Y_(i+1) - Y_(i))² / (2(n-1))` along the covariate order.
pub fn rice_variance(sample: &Sample) -> Result<f64> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::InvalidSample("Rice variance needs n ≥ 2".into()));
    }
    let (x, y) = (sample.x(), sample.y());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(y[i].total_cmp(&y[j])).then(i.cmp(&j)));
    let ss: f64 = idx.windows(2).map(|w| (y[w[1]] - y[w[0]]).powi(2)).sum();
    Ok(ss / (2.0 * (n - 1) as f64))
}

/// `h = (σ²/n)^{1/7}`, `d = 2h`, `b = σ² n^{-2/7}`.
pub fn default_bandwidths(n: usize, sigma2: f64) -> Result<BandwidthSet> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!("variance estimate {sigma2} must be positive")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be ≥ 1".into()));
    }
    let nf = n as f64;
    let h = (sigma2 / nf).powf(1.0 / 7.0);
    Ok(BandwidthSet::fixed(h, 2.0 * h, sigma2 * nf.powf(-2.0 / 7.0)))
}

/// Lower median: the `⌈k/2⌉`-th order statistic.
pub fn lower_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// `α = 0.1 n^{-1/4} √2 median|ε̂|`.
pub fn bootstrap_alpha(residuals: &[f64], n: usize) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::DegenerateSample("no residuals for the bootstrap smoothing level".into()));
    }
    let abs: Vec<f64> = residuals.iter().map(|e| e.abs()).collect();
    Ok(0.1 * (n as f64).powf(-0.25) * std::f64::consts::SQRT_2 * lower_median(&abs))
}
