//! Local polynomial estimates of conditional distribution functions.
//!
//! The estimate at a covariate value `x` is a weighted average
//! `F̂(y|x) = Σ W_i(x) L((y - Y_i)/d)` where `W_i(x)` is the first row of the
//! weighted least-squares smoother of order `p` and `L` is either `Ω` or the
//! indicator `1{Y_i ≤ y}`. The weights reproduce polynomials of degree `p`,
//! so they sum to one and may be negative; values are never clipped.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{omega_cdf, KernelSpec};
use crate::sample::Sample;

/// Largest accepted condition number of the rescaled normal equations.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalPolyConfig {
    /// Polynomial order.
    pub p: usize,
    /// Covariate bandwidth.
    pub h: f64,
    /// Response smoothing bandwidth.
    pub d: f64,
    pub kernel: KernelSpec,
}

impl LocalPolyConfig {
    pub fn new(p: usize, h: f64, d: f64, kernel: KernelSpec) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidParameter(format!("polynomial order {p} < 2")));
        }
        if !(h > 0.0 && h.is_finite()) || !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidParameter(format!("bandwidths must be positive (h = {h}, d = {d})")));
        }
        Ok(LocalPolyConfig { p, h, d, kernel })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdfMode {
    /// `Σ W_i Ω((y - Y_i)/d)`.
    SmoothedOmega,
    /// `Σ W_i 1{Y_i ≤ y}`.
    Indicator,
}

/// Local polynomial weights `W_1(x), …, W_n(x)` of order `cfg.p`.
pub fn local_poly_weights(x: f64, xs: &[f64], cfg: &LocalPolyConfig) -> Result<Vec<f64>> {
    local_poly_weights_with_order(x, xs, cfg.p, cfg.h, cfg.kernel)
}

/// Weights for an arbitrary order `p` (including the Nadaraya–Watson case `p = 0`).
///
/// The normal equations are assembled in the rescaled variable `(x - X_i)/h`,
/// which is the column scaling `(1, h, …, h^p)` of the raw design.
pub fn local_poly_weights_with_order(
    x: f64,
    xs: &[f64],
    p: usize,
    h: f64,
    kernel: KernelSpec,
) -> Result<Vec<f64>> {
    let q = p + 1;
    let mut k = Vec::with_capacity(xs.len());
    let mut u = Vec::with_capacity(xs.len());
    let mut moments = vec![0.0; 2 * p + 1];
    for &xi in xs {
        let ui = (x - xi) / h;
        let ki = kernel.eval(ui);
        let mut pow = ki;
        for m in moments.iter_mut() {
            *m += pow;
            pow *= ui;
        }
        k.push(ki);
        u.push(ui);
    }
    let gram = DMatrix::from_fn(q, q, |r, c| moments[r + c]);
    let eig = gram.clone().symmetric_eigenvalues();
    let (lmin, lmax) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| (lo.min(l), hi.max(l.abs())));
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularDesign { x, condition });
    }
    let mut e1 = DVector::zeros(q);
    e1[0] = 1.0;
    let coef = gram
        .cholesky()
        .map(|c| c.solve(&e1))
        .ok_or(Error::SingularDesign { x, condition })?;
    let weights = k
        .iter()
        .zip(&u)
        .map(|(&ki, &ui)| {
            let mut acc = 0.0;
            let mut pow = 1.0;
            for j in 0..q {
                acc += coef[j] * pow;
                pow *= ui;
            }
            ki * acc
        })
        .collect();
    Ok(weights)
}

/// Windows up to this size are summed term by term.
const DIRECT_WINDOW: usize = 24;

/// Conditional distribution estimate for one sample; weights are computed
/// per evaluation point through [`CondCdfEstimate::at`].
#[derive(Debug, Clone)]
pub struct CondCdfEstimate<'a> {
    xs: &'a [f64],
    sorted_y: Vec<f64>,
    /// Powers `v^k`, `k = 0..=5`, of `v = (y - center)/d` for the sorted responses.
    powers: Vec<[f64; 6]>,
    center: f64,
    order: Vec<usize>,
    config: LocalPolyConfig,
    mode: CdfMode,
}

impl<'a> CondCdfEstimate<'a> {
    pub fn new(sample: &'a Sample, config: LocalPolyConfig, mode: CdfMode) -> Result<Self> {
        Self::from_parts(sample.x(), sample.y(), config, mode)
    }

    /// Estimate from raw covariates and responses (e.g. absolute residuals).
    pub fn from_parts(xs: &'a [f64], ys: &[f64], config: LocalPolyConfig, mode: CdfMode) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidSample("covariate and response lengths differ".into()));
        }
        let n = xs.len();
        if n < config.p + 2 {
            return Err(Error::InvalidSample(format!(
                "{n} observations, need at least p + 2 = {}",
                config.p + 2
            )));
        }
        let mut distinct = xs.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < config.p + 1 {
            return Err(Error::InvalidSample(format!(
                "{} distinct covariate values, need at least p + 1 = {}",
                distinct.len(),
                config.p + 1
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]).then(a.cmp(&b)));
        let sorted_y: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
        let center = sorted_y[n / 2];
        let powers = match mode {
            CdfMode::SmoothedOmega => sorted_y
                .iter()
                .map(|&y| {
                    let v = (y - center) / config.d;
                    let mut p = [1.0; 6];
                    for k in 1..6 {
                        p[k] = p[k - 1] * v;
                    }
                    p
                })
                .collect(),
            CdfMode::Indicator => Vec::new(),
        };
        Ok(CondCdfEstimate { xs, sorted_y, powers, center, order, config, mode })
    }

    pub fn config(&self) -> &LocalPolyConfig {
        &self.config
    }

    pub fn mode(&self) -> CdfMode {
        self.mode
    }

    /// The function `y ↦ F̂(y|x)`.
    pub fn at(&self, x: f64) -> Result<LocalCdf<'_>> {
        let w = local_poly_weights(x, self.xs, &self.config)?;
        let mut prefix = Vec::with_capacity(w.len() + 1);
        let mut weights = Vec::with_capacity(w.len());
        let mut acc = 0.0;
        prefix.push(0.0);
        for &i in &self.order {
            weights.push(w[i]);
            acc += w[i];
            prefix.push(acc);
        }
        let mut moments = Vec::with_capacity(self.powers.len() + usize::from(!self.powers.is_empty()));
        if !self.powers.is_empty() {
            let mut m = [0.0; 6];
            moments.push(m);
            for (p, &wk) in self.powers.iter().zip(&weights) {
                for k in 0..6 {
                    m[k] += wk * p[k];
                }
                moments.push(m);
            }
        }
        Ok(LocalCdf {
            ys: &self.sorted_y,
            weights,
            prefix,
            moments,
            center: self.center,
            inv_d: 1.0 / self.config.d,
            d: self.config.d,
            mode: self.mode,
        })
    }

    /// `F̂(y|x)`.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.at(x)?.eval(y))
    }
}

/// `F̂(·|x)` at a fixed covariate value, with responses held in sorted order.
#[derive(Debug, Clone)]
pub struct LocalCdf<'a> {
    ys: &'a [f64],
    weights: Vec<f64>,
    prefix: Vec<f64>,
    /// Prefix sums of `W_i v_i^k` in sorted order (smoothed mode only).
    moments: Vec<[f64; 6]>,
    center: f64,
    inv_d: f64,
    d: f64,
    mode: CdfMode,
}

impl LocalCdf<'_> {
    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        match self.mode {
            CdfMode::Indicator => self.prefix[self.ys.partition_point(|&v| v <= y)],
            CdfMode::SmoothedOmega => {
                // responses at or below y - d contribute their full weight,
                // responses at or above y + d contribute nothing
                let lo = self.ys.partition_point(|&v| v <= y - self.d);
                let hi = lo + self.ys[lo..].partition_point(|&v| v < y + self.d);
                let mut acc = self.prefix[lo];
                if hi - lo <= DIRECT_WINDOW {
                    for k in lo..hi {
                        acc += self.weights[k] * omega_cdf((y - self.ys[k]) * self.inv_d);
                    }
                } else {
                    acc += self.window_sum(lo, hi, (y - self.center) * self.inv_d);
                }
                acc
            }
        }
    }

    /// `Σ_{lo ≤ k < hi} W_k Ω(a - v_k)` from the power sums: `Ω(u)` is the
    /// quintic `Σ c_m u^m` and `Σ W (a - v)^m` expands binomially.
    fn window_sum(&self, lo: usize, hi: usize, a: f64) -> f64 {
        const C: [f64; 6] = [0.5, 45.0 / 32.0, 0.0, -25.0 / 16.0, 0.0, 21.0 / 32.0];
        const BINOM: [[f64; 6]; 6] = [
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 2.0, 1.0, 0.0, 0.0, 0.0],
            [1.0, 3.0, 3.0, 1.0, 0.0, 0.0],
            [1.0, 4.0, 6.0, 4.0, 1.0, 0.0],
            [1.0, 5.0, 10.0, 10.0, 5.0, 1.0],
        ];
        let (mh, ml) = (&self.moments[hi], &self.moments[lo]);
        let mut s = [0.0; 6];
        for k in 0..6 {
            // alternating signs for (-v)^k
            s[k] = if k % 2 == 0 { mh[k] - ml[k] } else { ml[k] - mh[k] };
        }
        let mut apow = [1.0; 6];
        for k in 1..6 {
            apow[k] = apow[k - 1] * a;
        }
        let mut total = 0.0;
        for m in [0usize, 1, 3, 5] {
            let mut t = 0.0;
            for k in 0..=m {
                t += BINOM[m][k] * apow[m - k] * s[k];
            }
            total += C[m] * t;
        }
        total
    }

    pub fn mode(&self) -> CdfMode {
        self.mode
    }

    /// Responses in ascending order.
    pub fn sorted_responses(&self) -> &[f64] {
        self.ys
    }

    /// Weights aligned with [`LocalCdf::sorted_responses`].
    pub fn sorted_weights(&self) -> &[f64] {
        &self.weights
    }

    /// `prefix[j]` is the sum of the first `j` sorted weights.
    pub fn prefix_sums(&self) -> &[f64] {
        &self.prefix
    }

    /// `Σ_i W_i(x)`.
    pub fn total_weight(&self) -> f64 {
        self.prefix[self.prefix.len() - 1]
    }
}

/// `F̂_{|e|}(y|x) = Σ W_i(x) 1{|ê_i| ≤ y}`.
pub fn abs_residual_cdf(sample_x: &[f64], abs_e: &[f64], config: &LocalPolyConfig, x: f64, y: f64) -> Result<f64> {
    if abs_e.iter().any(|&e| e < 0.0) {
        return Err(Error::InvalidParameter("absolute residuals must be nonnegative".into()));
    }
    CondCdfEstimate::from_parts(sample_x, abs_e, *config, CdfMode::Indicator)?.eval(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(p: usize, h: f64) -> LocalPolyConfig {
        LocalPolyConfig { p, h, d: 0.2, kernel: KernelSpec::GAUSSIAN }
    }

    /// Oracle: build the raw (unscaled) design and solve the normal equations directly.
    fn direct_weights(x: f64, xs: &[f64], p: usize, h: f64) -> Vec<f64> {
        let n = xs.len();
        let design = DMatrix::from_fn(n, p + 1, |i, j| (x - xs[i]).powi(j as i32));
        let kdiag = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            xs.iter().map(|&xi| KernelSpec::GAUSSIAN.eval((x - xi) / h)),
        ));
        let xtw = design.transpose() * &kdiag;
        let inv = (&xtw * &design).try_inverse().unwrap();
        let full = inv * xtw;
        full.row(0).iter().copied().collect()
    }

    #[test]
    fn nadaraya_watson_limit() {
        let xs = [0.1, 0.25, 0.4, 0.8, 0.9];
        let w = local_poly_weights_with_order(0.3, &xs, 0, 0.2, KernelSpec::GAUSSIAN).unwrap();
        let ks: Vec<f64> = xs.iter().map(|&xi| KernelSpec::GAUSSIAN.eval((0.3 - xi) / 0.2)).collect();
        let total: f64 = ks.iter().sum();
        for (wi, ki) in w.iter().zip(&ks) {
            assert_abs_diff_eq!(*wi, ki / total, epsilon = 1e-14);
        }
    }

    #[test]
    fn exact_fit_with_p_plus_one_points() {
        let xs = [0.1, 0.35, 0.6, 0.9];
        let w = local_poly_weights_with_order(0.47, &xs, 3, 0.3, KernelSpec::GAUSSIAN).unwrap();
        for f in [|t: f64| 2.0 - t, |t: f64| t * t * t - 0.5 * t, |t: f64| 3.0 * t * t] {
            let fit: f64 = w.iter().zip(&xs).map(|(wi, &xi)| wi * f(xi)).sum();
            assert_abs_diff_eq!(fit, f(0.47), epsilon = 1e-10);
        }
    }

    #[test]
    fn uniform_design_matches_direct_solve() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 + 0.5) / 50.0).collect();
        let w = local_poly_weights(0.5, &xs, &cfg(3, 0.2)).unwrap();
        let oracle = direct_weights(0.5, &xs, 3, 0.2);
        for (a, b) in w.iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        for k in 1..=3 {
            let m: f64 = w.iter().zip(&xs).map(|(wi, xi)| wi * (0.5 - xi).powi(k)).sum();
            assert_abs_diff_eq!(m, 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn reproducing_property_on_random_designs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.random_range(20..120);
            let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let h = rng.random_range(0.05..0.4);
            let x = rng.random_range(0.1..0.9);
            let p = rng.random_range(2..=3);
            let w = match local_poly_weights(x, &xs, &cfg(p, h)) {
                Ok(w) => w,
                Err(Error::SingularDesign { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
            for k in 1..=p as i32 {
                let m: f64 = w.iter().zip(&xs).map(|(wi, xi)| wi * (x - xi).powi(k)).sum();
                assert_abs_diff_eq!(m, 0.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn singular_design_is_reported() {
        let xs = [0.2, 0.2, 0.2, 0.7, 0.7];
        let err = local_poly_weights(0.4, &xs, &cfg(3, 0.2)).unwrap_err();
        assert!(matches!(err, Error::SingularDesign { .. }));
        // compact kernel with no points in the window
        let c = LocalPolyConfig { p: 2, h: 0.05, d: 0.1, kernel: KernelSpec::EPANECHNIKOV };
        assert!(local_poly_weights(0.5, &[0.0, 0.1, 0.9, 1.0], &c).is_err());
    }

    fn toy_sample(n: usize, seed: u64) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y = x.iter().map(|&xi| xi + 0.3 * (rng.random::<f64>() - 0.5)).collect();
        Sample::new(x, y).unwrap()
    }

    #[test]
    fn saturates_outside_response_range() {
        let s = toy_sample(80, 3);
        let c = cfg(3, 0.2);
        let est = CondCdfEstimate::new(&s, c, CdfMode::SmoothedOmega).unwrap();
        let ymax = s.y().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ymin = s.y().iter().cloned().fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(est.eval(0.5, ymax + c.d).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(est.eval(0.5, ymin - c.d).unwrap(), 0.0);
        assert_abs_diff_eq!(est.eval(0.5, f64::INFINITY).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(est.eval(0.5, f64::NEG_INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn constant_responses_give_one_half() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 / 29.0).collect();
        let s = Sample::new(x, vec![2.5; 30]).unwrap();
        let est = CondCdfEstimate::new(&s, cfg(3, 0.2), CdfMode::SmoothedOmega).unwrap();
        assert_abs_diff_eq!(est.eval(0.4, 2.5).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn translation_equivariance() {
        let s = toy_sample(60, 5);
        let shifted = s.with_responses(s.y().iter().map(|v| v + 3.25).collect()).unwrap();
        let a = CondCdfEstimate::new(&s, cfg(3, 0.25), CdfMode::SmoothedOmega).unwrap();
        let b = CondCdfEstimate::new(&shifted, cfg(3, 0.25), CdfMode::SmoothedOmega).unwrap();
        for i in 0..25 {
            let y = -0.5 + 0.08 * i as f64;
            assert_abs_diff_eq!(a.eval(0.45, y).unwrap(), b.eval(0.45, y + 3.25).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn matches_brute_force_sum() {
        let s = toy_sample(40, 8);
        let c = cfg(3, 0.3);
        let w = local_poly_weights(0.6, s.x(), &c).unwrap();
        let smooth = CondCdfEstimate::new(&s, c, CdfMode::SmoothedOmega).unwrap();
        let ind = CondCdfEstimate::new(&s, c, CdfMode::Indicator).unwrap();
        for i in 0..30 {
            let y = -0.3 + 0.05 * i as f64;
            let brute_s: f64 = w.iter().zip(s.y()).map(|(wi, yi)| wi * omega_cdf((y - yi) / c.d)).sum();
            let brute_i: f64 = w.iter().zip(s.y()).map(|(wi, &yi)| if yi <= y { *wi } else { 0.0 }).sum();
            let vs = smooth.eval(0.6, y).unwrap();
            let vi = ind.eval(0.6, y).unwrap();
            assert_abs_diff_eq!(vs, brute_s, epsilon = 1e-12);
            assert_abs_diff_eq!(vi, brute_i, epsilon = 1e-12);
            // the two modes differ by at most Σ|W_i| |Ω - 1|
            let bound: f64 = w
                .iter()
                .zip(s.y())
                .map(|(wi, &yi)| wi.abs() * (omega_cdf((y - yi) / c.d) - if yi <= y { 1.0 } else { 0.0 }).abs())
                .sum();
            assert!((vs - vi).abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn abs_residual_cdf_cases() {
        let xs = [0.1, 0.3, 0.5, 0.7, 0.9];
        let e = [0.2, 0.05, 0.4, 0.1, 0.3];
        let c = cfg(2, 0.3);
        assert_eq!(abs_residual_cdf(&xs, &e, &c, 0.5, -0.01).unwrap(), 0.0);
        assert_abs_diff_eq!(abs_residual_cdf(&xs, &e, &c, 0.5, 0.4).unwrap(), 1.0, epsilon = 1e-12);
        let w = local_poly_weights(0.5, &xs, &c).unwrap();
        let hand = w[1] + w[3] + w[0];
        assert_abs_diff_eq!(abs_residual_cdf(&xs, &e, &c, 0.5, 0.2).unwrap(), hand, epsilon = 1e-14);
        assert!(abs_residual_cdf(&xs, &[-0.1, 0.0, 0.1, 0.2, 0.3], &c, 0.5, 0.2).is_err());
    }

    #[test]
    fn two_point_weighted_edf() {
        // p = 0 (Nadaraya–Watson) through the low-level path, two points
        let xs = [0.4, 0.6];
        let w = local_poly_weights_with_order(0.45, &xs, 0, 0.1, KernelSpec::GAUSSIAN).unwrap();
        let k0 = KernelSpec::GAUSSIAN.eval(0.5);
        let k1 = KernelSpec::GAUSSIAN.eval(-1.5);
        assert_abs_diff_eq!(w[0], k0 / (k0 + k1), epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], k1 / (k0 + k1), epsilon = 1e-15);
    }

    #[test]
    fn small_samples_rejected() {
        let s = Sample::new(vec![0.1, 0.5, 0.9], vec![0.0, 1.0, 2.0]).unwrap();
        assert!(CondCdfEstimate::new(&s, cfg(3, 0.2), CdfMode::Indicator).is_err());
    }
}
