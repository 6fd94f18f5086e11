//! Non-crossing quantile and scale curves obtained by inverting a smoothed
//! conditional distribution estimate through
//! `H(F) = (1/b) ∫_0^1 ∫_{-∞}^τ κ((F(G⁻¹(u)) - v)/b) dv du`.
//!
//! The inner integral is `1 - K((F(G⁻¹(u)) - τ)/b)` with `K` the Epanechnikov
//! antiderivative, so only the `u`-integral is numerical. Its integrand is 1
//! where `F ≤ τ - b`, 0 where `F ≥ τ + b`, and smooth in between; the
//! integration splits `(0, 1)` at the crossings of both levels and applies
//! Gauss–Legendre only on the transition pieces.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bandwidths::BandwidthSet;
use crate::cond_cdf::{CdfMode, CondCdfEstimate, LocalPolyConfig};
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::kernels::kappa_cdf;
use crate::quadrature::gl16;
use crate::sample::Sample;

/// Number of equal panels used to locate level crossings in `u`.
const PANELS: usize = 24;

/// `Φ⁻¹(0.95)`.
pub const Z95: f64 = 1.644_853_626_951_472_2;

/// Normal reference distribution `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalRef {
    pub mu: f64,
    pub sigma: f64,
}

impl NormalRef {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("normal reference N({mu}, {sigma}²)")));
        }
        Ok(NormalRef { mu, sigma })
    }

    fn dist(&self) -> Normal {
        Normal::new(self.mu, self.sigma).expect("validated parameters")
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.dist().cdf(y)
    }

    /// `G⁻¹(u)`, with `±∞` at the endpoints.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            f64::NEG_INFINITY
        } else if u >= 1.0 {
            f64::INFINITY
        } else {
            self.dist().inverse_cdf(u)
        }
    }
}

/// Left-continuous inverse of the empirical distribution function.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let k = ((n as f64 * p) - 1e-9).ceil().max(1.0) as usize;
    sorted[k.min(n) - 1]
}

/// Normal law whose 5% and 95% quantiles match the empirical ones.
pub fn fit_normal_ref(values: &[f64]) -> Result<NormalRef> {
    if values.len() < 2 {
        return Err(Error::DegenerateSample("need at least two values to fit G".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q05 = empirical_quantile(&sorted, 0.05);
    let q95 = empirical_quantile(&sorted, 0.95);
    if !(q95 > q05) {
        return Err(Error::DegenerateSample(format!(
            "empirical 5% and 95% quantiles coincide ({q05})"
        )));
    }
    NormalRef::new(0.5 * (q05 + q95), (q95 - q05) / (2.0 * Z95))
}

#[derive(Clone, Copy, PartialEq)]
enum Zone {
    Below,
    Band,
    Above,
}

/// `H_{G,κ,τ,b}(F)` for an arbitrary function `F: ℝ → ℝ` (need not be monotone
/// or stay inside `[0, 1]`). `F` is called at `±∞` for the endpoints.
pub fn h_functional<F: Fn(f64) -> f64>(f: F, g: &NormalRef, tau: f64, b: f64) -> f64 {
    h_functional_panels(f, g, tau, b, PANELS)
}

fn h_functional_panels<F: Fn(f64) -> f64>(f: F, g: &NormalRef, tau: f64, b: f64, panels: usize) -> f64 {
    let lo = tau - b;
    let hi = tau + b;
    let z = |u: f64| f(g.quantile(u));
    let zone = |v: f64| {
        if v <= lo {
            Zone::Below
        } else if v >= hi {
            Zone::Above
        } else {
            Zone::Band
        }
    };
    let integrand = |v: f64| 1.0 - kappa_cdf((v - tau) / b);

    let mut total = 0.0;
    let mut u_prev = 0.0;
    let mut z_prev = f(f64::NEG_INFINITY);
    let mut pieces: Vec<(f64, f64)> = Vec::with_capacity(4);
    for k in 1..=panels {
        let u_next = if k == panels { 1.0 } else { k as f64 / panels as f64 };
        let z_next = if k == panels { f(f64::INFINITY) } else { z(u_next) };

        // crossings of both levels inside the panel, in order of u
        pieces.clear();
        for level in [lo, hi] {
            if (z_prev - level) * (z_next - level) < 0.0 {
                let root = find_crossing(|u| z(u) - level, u_prev, u_next, z_prev - level, z_next - level);
                pieces.push((root, level));
            }
        }
        pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
        pieces.push((u_next, z_next));

        let (mut a, mut za) = (u_prev, z_prev);
        for &(bnd, zb) in &pieces {
            if bnd > a {
                total += match (zone(za), zone(zb)) {
                    (Zone::Below, Zone::Below) => bnd - a,
                    (Zone::Above, Zone::Above) => 0.0,
                    _ => adaptive(&|u| integrand(z(u)), a, bnd, 12),
                };
            }
            a = bnd;
            za = zb;
        }
        u_prev = u_next;
        z_prev = z_next;
    }
    total
}

/// Gauss–Legendre with recursive halving until both halves agree with the whole.
fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, depth: u32) -> f64 {
    let whole = gl16().integrate(f, a, b);
    adaptive_step(f, a, b, whole, depth)
}

fn adaptive_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = gl16().integrate(f, a, m);
    let right = gl16().integrate(f, m, b);
    if depth == 0 || (left + right - whole).abs() <= 1e-13 {
        return left + right;
    }
    adaptive_step(f, a, m, left, depth - 1) + adaptive_step(f, m, b, right, depth - 1)
}

/// Illinois regula falsi with periodic bisection; `ga` and `gb` bracket a sign change.
fn find_crossing<F: FnMut(f64) -> f64>(mut g: F, mut a: f64, mut b: f64, mut ga: f64, mut gb: f64) -> f64 {
    let mut side = 0i8;
    for iter in 0..200 {
        if b - a <= 1e-15 {
            break;
        }
        let mut c = if iter % 4 == 3 { 0.5 * (a + b) } else { (a * gb - b * ga) / (gb - ga) };
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let gc = g(c);
        if gc == 0.0 || gc.abs() < 1e-14 {
            return c;
        }
        if (gc > 0.0) == (gb > 0.0) {
            b = c;
            gb = gc;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            ga = gc;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}

/// Exact `H` for a right-continuous step function: `F(y) = cum[j]` on
/// `[y_(j), y_(j+1))`, where `jumps_u[j] = G(y_(j+1))` (so `jumps_u` has one
/// entry fewer than `cum`, and `cum[0]` is the value below the first jump).
pub fn h_functional_steps(jumps_u: &[f64], cum: &[f64], tau: f64, b: f64) -> f64 {
    debug_assert_eq!(jumps_u.len() + 1, cum.len());
    let mut total = 0.0;
    let mut u_prev = 0.0;
    for (j, &level) in cum.iter().enumerate() {
        let u_next = if j < jumps_u.len() { jumps_u[j] } else { 1.0 };
        let len = u_next - u_prev;
        if len > 0.0 {
            total += len * (1.0 - kappa_cdf((level - tau) / b));
        }
        u_prev = u_next;
    }
    total
}

/// Estimator of `q_τ(x) = G⁻¹(H(F̂_Y(·|x)))` with `G` fitted to all responses.
#[derive(Debug, Clone)]
pub struct QuantileEstimator<'a> {
    cdf: CondCdfEstimate<'a>,
    g: NormalRef,
    tau: f64,
    b: f64,
}

impl<'a> QuantileEstimator<'a> {
    pub fn new(sample: &'a Sample, tau: f64, bw: &BandwidthSet) -> Result<Self> {
        check_tau(tau)?;
        let g = fit_normal_ref(sample.y())?;
        let cdf = CondCdfEstimate::new(sample, bw.local_poly()?, CdfMode::SmoothedOmega)?;
        Ok(QuantileEstimator { cdf, g, tau, b: bw.b })
    }

    pub fn reference(&self) -> &NormalRef {
        &self.g
    }

    pub fn at(&self, x: f64) -> Result<f64> {
        let f = self.cdf.at(x)?;
        let h = h_functional(|y| f.eval(y), &self.g, self.tau, self.b);
        let q = self.g.quantile(h);
        if !q.is_finite() {
            return Err(Error::DegenerateSample(format!("quantile functional saturated at x = {x}")));
        }
        Ok(q)
    }
}

/// Estimator of the scale `s(x)`: the conditional median of `|ê|` obtained
/// through the indicator-weighted distribution of the absolute residuals.
#[derive(Debug, Clone)]
pub struct ScaleEstimator<'a> {
    cdf: CondCdfEstimate<'a>,
    gs: NormalRef,
    jumps_u: Vec<f64>,
    b: f64,
}

impl<'a> ScaleEstimator<'a> {
    /// `xs` and `abs_e` are the covariates and absolute residuals entering the estimate.
    pub fn new(xs: &'a [f64], abs_e: &[f64], config: LocalPolyConfig, b: f64) -> Result<Self> {
        let gs = fit_normal_ref(abs_e)?;
        let cdf = CondCdfEstimate::from_parts(xs, abs_e, config, CdfMode::Indicator)?;
        let mut sorted = abs_e.to_vec();
        sorted.sort_by(f64::total_cmp);
        let jumps_u = sorted.iter().map(|&v| gs.cdf(v)).collect();
        Ok(ScaleEstimator { cdf, gs, jumps_u, b })
    }

    pub fn reference(&self) -> &NormalRef {
        &self.gs
    }

    pub fn at(&self, x: f64) -> Result<f64> {
        let f = self.cdf.at(x)?;
        let h = h_functional_steps(&self.jumps_u, f.prefix_sums(), 0.5, self.b);
        let s = self.gs.quantile(h);
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::ScaleDegenerate { x, value: s });
        }
        Ok(s)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} not in (0, 1)")));
    }
    Ok(())
}

fn check_grid(grid: &[f64], lo: f64, hi: f64) -> Result<()> {
    for &x in grid {
        if !(lo..=hi).contains(&x) {
            return Err(Error::OutOfDomain { x, lo, hi });
        }
    }
    Ok(())
}

/// `q̂_τ` on `grid`, which must lie in the estimation domain `[m, 1 - m]`.
pub fn estimate_quantile_curve(sample: &Sample, tau: f64, bw: &BandwidthSet, grid: &[f64]) -> Result<Curve> {
    let (lo, hi) = bw.estimation_domain();
    check_grid(grid, lo, hi)?;
    let est = QuantileEstimator::new(sample, tau, bw)?;
    let values = grid.iter().map(|&x| est.at(x)).collect::<Result<Vec<_>>>()?;
    Curve::new(grid.to_vec(), values)
}

/// Absolute residuals `|Y_i - q̂(X_i)|` for covariates inside the domain of `qhat`
/// and the estimation domain; returns `(covariates, |ê|)`.
pub fn abs_residuals(sample: &Sample, qhat: &Curve, bw: &BandwidthSet) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = bw.estimation_domain();
    let (clo, chi) = qhat.domain();
    let (lo, hi) = (lo.max(clo), hi.min(chi));
    let mut xs = Vec::new();
    let mut es = Vec::new();
    for (&x, &y) in sample.x().iter().zip(sample.y()) {
        if x >= lo && x <= hi {
            xs.push(x);
            es.push((y - qhat.eval(x)?).abs());
        }
    }
    Ok((xs, es))
}

/// `ŝ` on `grid` (inside `[2m, 1 - 2m]`) from the residuals of `qhat`.
pub fn estimate_scale_curve(sample: &Sample, qhat: &Curve, bw: &BandwidthSet, grid: &[f64]) -> Result<Curve> {
    let (lo, hi) = bw.data_trim();
    check_grid(grid, lo, hi)?;
    let (xs, es) = abs_residuals(sample, qhat, bw)?;
    let est = ScaleEstimator::new(&xs, &es, bw.local_poly()?, bw.b)?;
    let values = grid.iter().map(|&x| est.at(x)).collect::<Result<Vec<_>>>()?;
    Curve::new(grid.to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::equispaced;
    use crate::quadrature::GaussLegendre;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Brute-force reference: composite 8-point rule on 2^15 panels of `u`.
    fn h_reference<F: Fn(f64) -> f64>(f: F, g: &NormalRef, tau: f64, b: f64) -> f64 {
        let rule = GaussLegendre::new(8);
        rule.integrate_composite(|u| 1.0 - kappa_cdf((f(g.quantile(u)) - tau) / b), 0.0, 1.0, 1 << 15)
    }

    #[test]
    fn fit_normal_ref_examples() {
        // 5 values ≤ -Z95, 89 inside, then Z95 and 5 above
        let mut v = vec![-3.0, -2.5, -2.2, -2.0, -Z95];
        v.extend((0..89).map(|i| -1.0 + 2.0 * i as f64 / 88.0));
        v.extend([Z95, 2.0, 2.2, 2.5, 3.0, 3.5]);
        assert_eq!(v.len(), 100);
        let g = fit_normal_ref(&v).unwrap();
        assert_abs_diff_eq!(g.mu, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.sigma, 1.0, epsilon = 1e-15);
        let shifted: Vec<f64> = v.iter().map(|x| x + 2.5).collect();
        let gs = fit_normal_ref(&shifted).unwrap();
        assert_abs_diff_eq!(gs.mu, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(gs.sigma, 1.0, epsilon = 1e-12);
        assert!(matches!(fit_normal_ref(&[1.0; 10]), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn fit_normal_ref_on_normal_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let g = fit_normal_ref(&v).unwrap();
        assert!(g.mu.abs() < 0.05);
        assert!((g.sigma - 1.0).abs() < 0.05);
    }

    #[test]
    fn h_is_exact_for_f_equal_g() {
        let g = NormalRef::new(0.3, 1.7).unwrap();
        for &b in &[0.01, 0.05, 0.1] {
            for i in 1..=9 {
                let tau = i as f64 / 10.0;
                if tau - b <= 0.0 || tau + b >= 1.0 {
                    continue;
                }
                let h = h_functional(|y| g.cdf(y), &g, tau, b);
                assert_abs_diff_eq!(h, tau, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn h_degenerate_and_step_cases() {
        let g = NormalRef::new(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(h_functional(|_| 1.0, &g, 0.5, 0.1), 0.0, epsilon = 1e-15);
        let jump = g.quantile(0.3);
        let step = |y: f64| if y >= jump { 1.0 } else { 0.0 };
        let h = h_functional(step, &g, 0.5, 0.05);
        assert_abs_diff_eq!(h, 0.3, epsilon = 1e-6);
        assert_abs_diff_eq!(h_functional_steps(&[0.3], &[0.0, 1.0], 0.5, 0.05), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn h_matches_dense_reference_on_smooth_cdfs() {
        let g = NormalRef::new(0.0, 1.0).unwrap();
        let targets = [
            NormalRef::new(0.4, 0.7).unwrap(),
            NormalRef::new(-1.0, 2.0).unwrap(),
            NormalRef::new(0.1, 0.2).unwrap(),
        ];
        for t in &targets {
            for &b in &[1e-3, 0.01, 0.1] {
                for &tau in &[0.25, 0.5, 0.75] {
                    let fast = h_functional(|y| t.cdf(y), &g, tau, b);
                    let slow = h_reference(|y| t.cdf(y), &g, tau, b);
                    assert_abs_diff_eq!(fast, slow, epsilon = 1e-9);
                }
            }
        }
        // a non-monotone F that leaves [0, 1]
        let wiggly = |y: f64| g.cdf(y) + 0.03 * (3.0 * y).sin() * (-y * y).exp();
        for &tau in &[0.3, 0.5] {
            let fast = h_functional(wiggly, &g, tau, 0.02);
            let slow = h_reference(wiggly, &g, tau, 0.02);
            assert_abs_diff_eq!(fast, slow, epsilon = 1e-8);
        }
    }

    #[test]
    fn steps_agree_with_general_functional() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = NormalRef::new(0.5, 0.3).unwrap();
        for _ in 0..20 {
            let n = 12;
            let mut ys: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            ys.sort_by(f64::total_cmp);
            let ws: Vec<f64> = (0..n).map(|_| rng.random_range(-0.02..0.2)).collect();
            let total: f64 = ws.iter().sum();
            let mut cum = vec![0.0];
            for w in &ws {
                cum.push(cum.last().unwrap() + w / total);
            }
            let jumps: Vec<f64> = ys.iter().map(|&y| g.cdf(y)).collect();
            let step = |y: f64| cum[ys.partition_point(|&v| v <= y)];
            for &tau in &[0.3, 0.5, 0.7] {
                let exact = h_functional_steps(&jumps, &cum, tau, 0.05);
                let reference = h_reference(step, &g, tau, 0.05);
                assert_abs_diff_eq!(exact, reference, epsilon = 1e-4);
            }
            // monotone in tau
            let taus = [0.1, 0.2, 0.4, 0.6, 0.8, 0.9];
            let hs: Vec<f64> = taus.iter().map(|&t| h_functional_steps(&jumps, &cum, t, 0.05)).collect();
            assert!(hs.windows(2).all(|w| w[0] <= w[1] + 1e-15));
        }
    }

    fn bw_fixed(h: f64, d: f64, b: f64) -> BandwidthSet {
        BandwidthSet::fixed(h, d, b).with_trim_unit(0.05)
    }

    fn noisy_sample(n: usize, seed: u64) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y = x
            .iter()
            .map(|&xi| 1.0 + xi + (0.1 + 0.2 * xi) * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Sample::new(x, y).unwrap()
    }

    #[test]
    fn constant_responses() {
        let x: Vec<f64> = (0..60).map(|i| i as f64 / 59.0).collect();
        let s = Sample::new(x.clone(), vec![3.0; 60]).unwrap();
        let bw = bw_fixed(0.2, 0.1, 0.02);
        // G cannot be fitted to a point mass
        assert!(matches!(
            estimate_quantile_curve(&s, 0.5, &bw, &[0.5]),
            Err(Error::DegenerateSample(_))
        ));
        // with G supplied, F̂ is Ω((y-3)/d) everywhere and q̂ lands within d of 3
        let g = NormalRef::new(3.0, 1.0).unwrap();
        let cdf = CondCdfEstimate::new(&s, bw.local_poly().unwrap(), CdfMode::SmoothedOmega).unwrap();
        for &x0 in &[0.2, 0.5, 0.8] {
            let f = cdf.at(x0).unwrap();
            let q = g.quantile(h_functional(|y| f.eval(y), &g, 0.5, bw.b));
            assert!((q - 3.0).abs() <= 1e-6, "{q}");
            let q9 = g.quantile(h_functional(|y| f.eval(y), &g, 0.9, bw.b));
            assert!(q9 > 3.0 && q9 <= 3.0 + bw.d, "{q9}");
        }
    }

    #[test]
    fn quantile_curves_do_not_cross() {
        let s = noisy_sample(150, 9);
        let bw = bw_fixed(0.15, 0.1, 0.01);
        let grid = equispaced(0.1, 0.9, 21);
        let curves: Vec<Curve> = [0.1, 0.25, 0.5, 0.75, 0.9]
            .iter()
            .map(|&t| estimate_quantile_curve(&s, t, &bw, &grid).unwrap())
            .collect();
        for pair in curves.windows(2) {
            for (a, b) in pair[0].values().iter().zip(pair[1].values()) {
                assert!(a <= b, "{a} > {b}");
            }
        }
    }

    #[test]
    fn scale_curve_is_positive_and_homogeneous() {
        let s = noisy_sample(200, 2);
        let bw = bw_fixed(0.15, 0.1, 0.01);
        let qgrid = equispaced(0.05, 0.95, 91);
        let q = estimate_quantile_curve(&s, 0.5, &bw, &qgrid).unwrap();
        let sgrid = equispaced(0.1, 0.9, 17);
        let sc = estimate_scale_curve(&s, &q, &bw, &sgrid).unwrap();
        assert!(sc.values().iter().all(|&v| v > 0.0));

        // multiply responses by c with bandwidths fixed: d and b are response-scale
        // quantities for F̂_Y and must scale too for exact homogeneity of q̂; the
        // scale step only depends on |ê| through ranks and G_s, which scales with c.
        let c = 2.5;
        let scaled = s.with_responses(s.y().iter().map(|v| v * c).collect()).unwrap();
        let bw_c = BandwidthSet { d: bw.d * c, ..bw.clone() };
        let qc = estimate_quantile_curve(&scaled, 0.5, &bw_c, &qgrid).unwrap();
        for (a, b) in q.values().iter().zip(qc.values()) {
            assert_abs_diff_eq!(a * c, *b, epsilon = 1e-8);
        }
        let scc = estimate_scale_curve(&scaled, &qc, &bw_c, &sgrid).unwrap();
        for (a, b) in sc.values().iter().zip(scc.values()) {
            assert_abs_diff_eq!(a * c, *b, epsilon = 1e-8);
        }
    }

    #[test]
    fn noiseless_data_has_degenerate_residuals() {
        let x: Vec<f64> = (0..80).map(|i| i as f64 / 79.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + v).collect();
        let s = Sample::new(x.clone(), y).unwrap();
        let bw = bw_fixed(0.15, 0.1, 0.01);
        // oracle curve: the true quantile function
        let q = Curve::new(x.clone(), x.iter().map(|v| 1.0 + v).collect()).unwrap();
        let err = estimate_scale_curve(&s, &q, &bw, &[0.5]).unwrap_err();
        assert!(matches!(err, Error::DegenerateSample(_)));
    }

    #[test]
    fn grid_outside_domain_is_rejected() {
        let s = noisy_sample(50, 1);
        let bw = bw_fixed(0.15, 0.1, 0.01);
        assert!(matches!(
            estimate_quantile_curve(&s, 0.5, &bw, &[0.01]),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(estimate_quantile_curve(&s, 1.5, &bw, &[0.5]).is_err());
    }
}
