//! Increasing rearrangement of a curve on `[a, b]` and the constrained
//! quantile curve.

use crate::curve::{equispaced, Curve};
use crate::error::{Error, Result};

pub const DEFAULT_GRID: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RearrangeConfig {
    pub a: f64,
    pub b: f64,
    pub grid_m: usize,
}

impl RearrangeConfig {
    pub fn new(a: f64, b: f64, grid_m: usize) -> Result<Self> {
        if !(a < b) || grid_m < 3 {
            return Err(Error::InvalidParameter(format!(
                "rearrangement needs a < b and grid_m ≥ 3 (got [{a}, {b}], {grid_m})"
            )));
        }
        Ok(RearrangeConfig { a, b, grid_m })
    }

    pub fn grid(&self) -> Vec<f64> {
        equispaced(self.a, self.b, self.grid_m)
    }
}

/// Discrete rearrangement: `g` sampled on the equispaced grid, values sorted
/// ascending and placed back on the same nodes.
pub fn increasing_rearrangement(g: &Curve, cfg: &RearrangeConfig) -> Result<Curve> {
    let grid = cfg.grid();
    let mut values = grid.iter().map(|&x| g.eval(x)).collect::<Result<Vec<_>>>()?;
    values.sort_by(f64::total_cmp);
    Curve::new(grid, values)
}

/// `Γ(q̂)` on `[lo, hi]`.
pub fn constrained_quantile_curve(qhat: &Curve, lo: f64, hi: f64, grid_m: usize) -> Result<Curve> {
    increasing_rearrangement(qhat, &RearrangeConfig::new(lo, hi, grid_m)?)
}
