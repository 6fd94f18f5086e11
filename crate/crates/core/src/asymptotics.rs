//! Limit objects of the independence process: the expansion functions `φ`,
//! `ψ`, the influence function `g(ε, y)` and the covariance of the Gaussian
//! limit. Validation only; the tests never use them.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Closed-form error families before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Normal { mu: f64, sigma: f64 },
    StudentT { nu: f64 },
}

impl Family {
    fn validate(&self) -> Result<()> {
        match *self {
            Family::Normal { mu, sigma } if sigma > 0.0 && mu.is_finite() && sigma.is_finite() => Ok(()),
            Family::StudentT { nu } if nu > 0.0 && nu.is_finite() => Ok(()),
            other => Err(Error::InvalidParameter(format!("invalid error family {other:?}"))),
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match *self {
            Family::Normal { mu, sigma } => Normal::new(mu, sigma).expect("validated").cdf(x),
            Family::StudentT { nu } => StudentsT::new(0.0, 1.0, nu).expect("validated").cdf(x),
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match *self {
            Family::Normal { mu, sigma } => Normal::new(mu, sigma).expect("validated").pdf(x),
            Family::StudentT { nu } => StudentsT::new(0.0, 1.0, nu).expect("validated").pdf(x),
        }
    }

    fn inverse_cdf(&self, p: f64) -> f64 {
        match *self {
            Family::Normal { mu, sigma } => Normal::new(mu, sigma).expect("validated").inverse_cdf(p),
            Family::StudentT { nu } => StudentsT::new(0.0, 1.0, nu).expect("validated").inverse_cdf(p),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Family::Normal { mu, sigma } => mu + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal),
            Family::StudentT { nu } => rng.sample(rand_distr::StudentT::new(nu).expect("validated")),
        }
    }
}

/// `ε = (η - shift) · scale` with `η` from `family`; normalized so that
/// `F_ε(0) = τ` and `median |ε| = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub family: Family,
    pub tau: f64,
    pub shift: f64,
    pub scale: f64,
}

/// Shift to the `τ`-quantile, then scale so that `|ε|` has median one.
pub fn rescale_error_model(family: Family, tau: f64) -> Result<ErrorModel> {
    family.validate()?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} not in (0, 1)")));
    }
    let shift = family.inverse_cdf(tau);
    // mass of [shift - q, shift + q] increases in q from 0 to 1
    let mass = |q: f64| family.cdf(shift + q) - family.cdf(shift - q) - 0.5;
    let mut hi = 1.0;
    while mass(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(ErrorModel { family, tau, shift, scale: 1.0 / (0.5 * (lo + hi)) })
}

impl ErrorModel {
    pub fn cdf(&self, y: f64) -> f64 {
        self.family.cdf(self.shift + y / self.scale)
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.family.pdf(self.shift + y / self.scale) / self.scale
    }

    /// Density of `|ε|` for `y ≥ 0`.
    pub fn abs_pdf(&self, y: f64) -> f64 {
        if y < 0.0 {
            0.0
        } else {
            self.pdf(y) + self.pdf(-y)
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        (self.family.sample(rng) - self.shift) * self.scale
    }
}

/// `φ(y) = f(y)/f(0) · (1 - y (f(1) - f(-1)) / f_{|ε|}(1))`.
pub fn phi(em: &ErrorModel, y: f64) -> f64 {
    em.pdf(y) / em.pdf(0.0) * (1.0 - y * (em.pdf(1.0) - em.pdf(-1.0)) / em.abs_pdf(1.0))
}

/// `ψ(y) = y f(y) / f_{|ε|}(1)`.
pub fn psi(em: &ErrorModel, y: f64) -> f64 {
    y * em.pdf(y) / em.abs_pdf(1.0)
}

/// `φ` of the location model, where the scale is not estimated.
pub fn phi_location(em: &ErrorModel, y: f64) -> f64 {
    em.pdf(y) / em.pdf(0.0)
}

fn ind(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// `g(ε, y) = I{ε ≤ y} - F(y) - φ(y)(I{ε ≤ 0} - τ) - ψ(y)(I{|ε| ≤ 1} - 1/2)`.
pub fn influence(em: &ErrorModel, eps: f64, y: f64) -> f64 {
    ind(eps <= y) - em.cdf(y) - phi(em, y) * (ind(eps <= 0.0) - em.tau) - psi(em, y) * (ind(eps.abs() <= 1.0) - 0.5)
}

/// Covariate distribution and error model of the limit process.
#[derive(Debug, Clone, Copy)]
pub struct LimitCovarianceSpec {
    pub error_model: ErrorModel,
    pub fx: fn(f64) -> f64,
}

pub fn uniform_cdf(t: f64) -> f64 {
    t.clamp(0.0, 1.0)
}

impl LimitCovarianceSpec {
    pub fn uniform(error_model: ErrorModel) -> Self {
        LimitCovarianceSpec { error_model, fx: uniform_cdf }
    }

    fn covariate_factor(&self, s: f64, t: f64) -> f64 {
        let f = self.fx;
        f(s.min(t)) - f(s) * f(t)
    }
}

/// Error bracket of the covariance for arbitrary expansion coefficients.
fn error_bracket(em: &ErrorModel, y: f64, z: f64, (phy, phz): (f64, f64), (psy, psz): (f64, f64)) -> f64 {
    let f = |v: f64| em.cdf(v);
    let tau = em.tau;
    let abs_part = |v: f64| if v > -1.0 { f(v.min(1.0)) - f(-1.0) } else { 0.0 } - 0.5 * f(v);
    f(y.min(z)) - f(y) * f(z) + phy * phz * (tau - tau * tau) + 0.25 * psy * psz
        - phy * (f(z.min(0.0)) - f(z) * tau)
        - phz * (f(y.min(0.0)) - f(y) * tau)
        - psy * abs_part(z)
        - psz * abs_part(y)
        + (phy * psz + phz * psy) * (f(0.0) - f(-1.0) - 0.5 * tau)
}

/// `Cov(S(s, y), S(t, z))` of the location-scale limit.
pub fn limit_covariance(spec: &LimitCovarianceSpec, s: f64, y: f64, t: f64, z: f64) -> f64 {
    let em = &spec.error_model;
    let (py, pz, qy, qz) = (phi(em, y), phi(em, z), psi(em, y), psi(em, z));
    // both argument orders, so that the result is exactly symmetric
    let bracket = 0.5 * (error_bracket(em, y, z, (py, pz), (qy, qz)) + error_bracket(em, z, y, (pz, py), (qz, qy)));
    spec.covariate_factor(s, t) * bracket
}

/// The general bracket with location-model coefficients substituted.
pub fn limit_covariance_location_substituted(spec: &LimitCovarianceSpec, s: f64, y: f64, t: f64, z: f64) -> f64 {
    let em = &spec.error_model;
    spec.covariate_factor(s, t) * error_bracket(em, y, z, (phi_location(em, y), phi_location(em, z)), (0.0, 0.0))
}

/// Location-model covariance written out on its own:
/// `E[(I{ε≤y} - F(y) - φ(y)B)(I{ε≤z} - F(z) - φ(z)B)]` with `B = I{ε≤0} - τ`.
pub fn location_covariance(spec: &LimitCovarianceSpec, s: f64, y: f64, t: f64, z: f64) -> f64 {
    let em = &spec.error_model;
    let f = |v: f64| em.cdf(v);
    let (a, b) = (phi_location(em, y), phi_location(em, z));
    let tau = em.tau;
    let joint = f(y.min(z)) - f(y) * f(z);
    let cross_y = f(y.min(0.0)) - tau * f(y);
    let cross_z = f(z.min(0.0)) - tau * f(z);
    spec.covariate_factor(s, t) * (joint - a * cross_z - b * cross_y + a * b * tau * (1.0 - tau))
}

/// `n^{-1/2} Σ g(ε_i, y)(I{X_i ≤ t} - F_X(t))`.
pub fn expansion_sum(spec: &LimitCovarianceSpec, xs: &[f64], eps: &[f64], t: f64, y: f64) -> f64 {
    let em = &spec.error_model;
    let (fy, ph, ps, ft) = (em.cdf(y), phi(em, y), psi(em, y), (spec.fx)(t));
    let s: f64 = xs
        .iter()
        .zip(eps)
        .map(|(&x, &e)| {
            let g = ind(e <= y) - fy - ph * (ind(e <= 0.0) - em.tau) - ps * (ind(e.abs() <= 1.0) - 0.5);
            g * (ind(x <= t) - ft)
        })
        .sum();
    s / (xs.len() as f64).sqrt()
}

/// Monte-Carlo covariance of the expansion sum with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceCheck {
    pub empirical: f64,
    pub standard_error: f64,
    pub theoretical: f64,
}

impl CovarianceCheck {
    /// `|empirical - theoretical|` in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.empirical - self.theoretical).abs() / self.standard_error
    }
}

/// `reps` replications of `n` pairs `(X, ε)` with uniform `X`, evaluated at
/// each `(s, y, t, z)`.
pub fn monte_carlo_covariance(
    spec: &LimitCovarianceSpec,
    n: usize,
    reps: usize,
    points: &[(f64, f64, f64, f64)],
    rng: &mut ChaCha8Rng,
) -> Vec<CovarianceCheck> {
    let mut products = vec![Vec::with_capacity(reps); points.len()];
    let mut xs = vec![0.0; n];
    let mut eps = vec![0.0; n];
    for _ in 0..reps {
        for i in 0..n {
            xs[i] = rng.random();
            eps[i] = spec.error_model.sample(rng);
        }
        for (k, &(s, y, t, z)) in points.iter().enumerate() {
            let a = expansion_sum(spec, &xs, &eps, s, y);
            let b = expansion_sum(spec, &xs, &eps, t, z);
            products[k].push(a * b);
        }
    }
    points
        .iter()
        .zip(products)
        .map(|(&(s, y, t, z), p)| {
            let r = p.len() as f64;
            let mean = p.iter().sum::<f64>() / r;
            let var = p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
            CovarianceCheck {
                empirical: mean,
                standard_error: (var / r).sqrt(),
                theoretical: limit_covariance(spec, s, y, t, z),
            }
        })
        .collect()
}
