//! Smoothing kernels.
//!
//! Three kernels are used by the estimators:
//! - the covariate kernel `K` (Gaussian by default) that builds the local
//!   polynomial weights,
//! - the inversion kernel `κ` (Epanechnikov) inside the quantile functional,
//! - the order-4 kernel `ω(u) = (15/32)(3 - 10u² + 7u⁴)` on `[-1, 1]` whose
//!   antiderivative `Ω` smooths the response indicator.
//!
//! `ω` takes negative values for `√(3/7) < |u| < 1`, so `Ω` overshoots 1
//! slightly before settling at 1 on the support boundary.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const OMEGA_C: f64 = 15.0 / 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// Standard normal density, unbounded support.
    Gaussian,
    /// `0.75 (1 - u²)` on `[-1, 1]`.
    Epanechnikov,
    /// Order-4 polynomial kernel on `[-1, 1]`.
    Quartic4,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Epanechnikov => "epanechnikov",
            KernelKind::Quartic4 => "quartic4",
        };
        f.write_str(s)
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(KernelKind::Gaussian),
            "epanechnikov" => Ok(KernelKind::Epanechnikov),
            "quartic4" => Ok(KernelKind::Quartic4),
            other => Err(Error::InvalidParameter(format!("unknown kernel '{other}'"))),
        }
    }
}

/// A kernel together with its support and moment order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
}

impl KernelSpec {
    pub const GAUSSIAN: KernelSpec = KernelSpec { kind: KernelKind::Gaussian };
    pub const EPANECHNIKOV: KernelSpec = KernelSpec { kind: KernelKind::Epanechnikov };
    pub const QUARTIC4: KernelSpec = KernelSpec { kind: KernelKind::Quartic4 };

    pub fn new(kind: KernelKind) -> Self {
        KernelSpec { kind }
    }

    /// Compact support, or `None` for the Gaussian.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self.kind {
            KernelKind::Gaussian => None,
            KernelKind::Epanechnikov | KernelKind::Quartic4 => Some((-1.0, 1.0)),
        }
    }

    /// Order of the first non-vanishing moment beyond the zeroth.
    pub fn order(&self) -> u32 {
        match self.kind {
            KernelKind::Gaussian | KernelKind::Epanechnikov => 2,
            KernelKind::Quartic4 => 4,
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self.kind {
            KernelKind::Gaussian => INV_SQRT_2PI * (-0.5 * u * u).exp(),
            KernelKind::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            KernelKind::Quartic4 => {
                if u.abs() <= 1.0 {
                    let u2 = u * u;
                    OMEGA_C * (3.0 - 10.0 * u2 + 7.0 * u2 * u2)
                } else {
                    0.0
                }
            }
        }
    }

    /// `m`-th derivative of the kernel; `m` must be 0, 1 or 2.
    pub fn derivative(&self, m: u32, u: f64) -> Result<f64> {
        if m > 2 {
            return Err(Error::UnsupportedDerivative(m));
        }
        if m == 0 {
            return Ok(self.eval(u));
        }
        let value = match self.kind {
            KernelKind::Gaussian => {
                let phi = self.eval(u);
                if m == 1 {
                    -u * phi
                } else {
                    (u * u - 1.0) * phi
                }
            }
            KernelKind::Epanechnikov => {
                if u.abs() >= 1.0 {
                    0.0
                } else if m == 1 {
                    -1.5 * u
                } else {
                    -1.5
                }
            }
            KernelKind::Quartic4 => {
                if u.abs() >= 1.0 {
                    0.0
                } else if m == 1 {
                    OMEGA_C * (-20.0 * u + 28.0 * u * u * u)
                } else {
                    OMEGA_C * (-20.0 + 84.0 * u * u)
                }
            }
        };
        Ok(value)
    }

    /// Antiderivative `∫_{-∞}^u k(w) dw`, in closed form.
    pub fn cdf(&self, u: f64) -> f64 {
        match self.kind {
            KernelKind::Gaussian => standard_normal().cdf(u),
            KernelKind::Epanechnikov => kappa_cdf(u),
            KernelKind::Quartic4 => omega_cdf(u),
        }
    }
}

pub(crate) fn standard_normal() -> Normal {
    Normal::standard()
}

/// `Ω(u)`, the antiderivative of the order-4 kernel `ω`.
#[inline]
pub fn omega_cdf(u: f64) -> f64 {
    if u <= -1.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let u2 = u * u;
        OMEGA_C * u * (3.0 - u2 * (10.0 / 3.0) + u2 * u2 * (7.0 / 5.0)) + 0.5
    }
}

/// Antiderivative of the Epanechnikov kernel.
#[inline]
pub fn kappa_cdf(u: f64) -> f64 {
    if u <= -1.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        0.5 + 0.75 * (u - u * u * u / 3.0)
    }
}
