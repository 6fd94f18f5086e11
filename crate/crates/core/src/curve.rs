//! Function estimates tabulated on a grid, evaluated by linear interpolation.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    grid: Vec<f64>,
    values: Vec<f64>,
}

/// `m` equispaced nodes from `a` to `b` inclusive.
pub fn equispaced(a: f64, b: f64, m: usize) -> Vec<f64> {
    assert!(m >= 2, "equispaced grid needs at least two nodes");
    let step = (b - a) / (m - 1) as f64;
    (0..m)
        .map(|k| if k + 1 == m { b } else { a + k as f64 * step })
        .collect()
}

impl Curve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "curve grid has {} nodes but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.is_empty() {
            return Err(Error::InvalidParameter("curve grid is empty".into()));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("curve grid must be strictly increasing".into()));
        }
        Ok(Curve { grid, values })
    }

    /// Build from `(x, value)` pairs in any order; duplicate `x` keep the first value.
    pub fn from_points(mut points: Vec<(f64, f64)>) -> Result<Self> {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        points.dedup_by(|b, a| a.0 == b.0);
        let (grid, values) = points.into_iter().unzip();
        Curve::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    /// Linear interpolation; node hits return the stored value exactly.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&x) {
            return Err(Error::OutOfDomain { x, lo, hi });
        }
        Ok(self.interpolate(x))
    }

    /// Like [`Curve::eval`] but extends the end values as constants outside the domain.
    pub fn eval_clamped(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        if x <= lo {
            self.values[0]
        } else if x >= hi {
            self.values[self.values.len() - 1]
        } else {
            self.interpolate(x)
        }
    }

    fn interpolate(&self, x: f64) -> f64 {
        match self.grid.binary_search_by(|g| g.total_cmp(&x)) {
            Ok(i) => self.values[i],
            Err(i) => {
                let (x0, x1) = (self.grid[i - 1], self.grid[i]);
                let (v0, v1) = (self.values[i - 1], self.values[i]);
                let w = (x - x0) / (x1 - x0);
                v0 + w * (v1 - v0)
            }
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn write_csv<W: io::Write>(&self, writer: W, value_name: &str) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", value_name])?;
        for (x, v) in self.grid.iter().zip(&self.values) {
            w.serialize((x, v))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> std::result::Result<Self, Box<dyn std::error::Error>> {
        let mut r = csv::Reader::from_path(path)?;
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for rec in r.deserialize() {
            let (x, v): (f64, f64) = rec?;
            grid.push(x);
            values.push(v);
        }
        Ok(Curve::new(grid, values)?)
    }
}
