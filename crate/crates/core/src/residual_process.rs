//! Trimmed residuals, the independence process comparing the joint empirical
//! distribution of `(X, ε̂)` with the product of its marginals, and its
//! Kolmogorov–Smirnov and Cramér–von Mises functionals.

use std::io;

use crate::bandwidths::in_trim;
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::sample::Sample;

/// Residuals of the observations with `trim_lo < X_i ≤ trim_hi`, in original order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub indices: Vec<usize>,
    pub x: Vec<f64>,
    pub eps: Vec<f64>,
    pub trim_lo: f64,
    pub trim_hi: f64,
}

impl ResidualSet {
    pub fn n_trim(&self) -> usize {
        self.eps.len()
    }

    /// Same observations with different residual values.
    pub fn with_eps(&self, eps: Vec<f64>) -> Result<Self> {
        if eps.len() != self.eps.len() {
            return Err(Error::InvalidParameter("residual count mismatch".into()));
        }
        Ok(ResidualSet { eps, ..self.clone() })
    }
}

/// Trimmed residuals `(Y_i - q(X_i)) / s(X_i)` from pointwise evaluators.
pub fn residuals_with<Q, S>(sample: &Sample, trim: (f64, f64), q: Q, s: S) -> Result<ResidualSet>
where
    Q: Fn(f64) -> Result<f64>,
    S: Fn(f64) -> Result<f64>,
{
    let mut indices = Vec::new();
    let mut xs = Vec::new();
    let mut eps = Vec::new();
    for (i, (&x, &y)) in sample.x().iter().zip(sample.y()).enumerate() {
        if in_trim(x, trim) {
            indices.push(i);
            xs.push(x);
            eps.push((y - q(x)?) / s(x)?);
        }
    }
    if indices.is_empty() {
        return Err(Error::TrimEmpty { lo: trim.0, hi: trim.1 });
    }
    Ok(ResidualSet { indices, x: xs, eps, trim_lo: trim.0, trim_hi: trim.1 })
}

/// Trimmed residuals from curves; `scurve = None` is the location model `ŝ ≡ 1`.
pub fn compute_residuals(sample: &Sample, qcurve: &Curve, scurve: Option<&Curve>, trim: (f64, f64)) -> Result<ResidualSet> {
    residuals_with(sample, trim, |x| qcurve.eval(x), |x| scurve.map_or(Ok(1.0), |s| s.eval(x)))
}

/// `F̂_{X,ε}(t, y)` normalized by the trimmed covariate mass.
pub fn joint_edf(res: &ResidualSet, t: f64, y: f64) -> f64 {
    let cnt = res
        .x
        .iter()
        .zip(&res.eps)
        .filter(|&(&x, &e)| x > res.trim_lo && x <= t && e <= y)
        .count();
    cnt as f64 / res.n_trim() as f64
}

/// `S(t, y)` on the grid of distinct trimmed covariates × residual values.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessField {
    pub t_grid: Vec<f64>,
    /// Sorted distinct residual values of both sets, then `+∞`.
    pub y_grid: Vec<f64>,
    /// Row-major, `t_grid.len() × y_grid.len()`.
    pub values: Vec<f64>,
}

impl ProcessField {
    pub fn get(&self, ti: usize, yi: usize) -> f64 {
        self.values[ti * self.y_grid.len() + yi]
    }

    pub fn row(&self, ti: usize) -> &[f64] {
        let w = self.y_grid.len();
        &self.values[ti * w..(ti + 1) * w]
    }

    /// `S(t, y)` at arbitrary arguments; zero below the first trimmed covariate.
    pub fn eval(&self, t: f64, y: f64) -> f64 {
        let ti = self.t_grid.partition_point(|&v| v <= t);
        let yi = self.y_grid.partition_point(|&v| v <= y);
        if ti == 0 || yi == 0 {
            return 0.0;
        }
        self.get(ti - 1, yi - 1)
    }

    /// Largest `|S|` on the last row and the `+∞` column; zero up to rounding.
    pub fn boundary_defect(&self) -> f64 {
        let w = self.y_grid.len();
        let last_row = self.row(self.t_grid.len() - 1).iter().map(|v| v.abs()).fold(0.0, f64::max);
        let last_col = (0..self.t_grid.len()).map(|i| self.get(i, w - 1).abs()).fold(0.0, f64::max);
        last_row.max(last_col)
    }

    /// Long-format CSV `t,y,S` without the `+∞` column.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "y", "S"])?;
        for (ti, t) in self.t_grid.iter().enumerate() {
            for (yi, y) in self.y_grid.iter().enumerate().take(self.y_grid.len() - 1) {
                w.write_record([t.to_string(), y.to_string(), self.get(ti, yi).to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Sorted distinct values of both residual sets followed by `+∞`.
fn residual_grid(a: &ResidualSet, b: &ResidualSet) -> Vec<f64> {
    let mut y: Vec<f64> = a.eps.iter().chain(&b.eps).copied().collect();
    y.sort_by(f64::total_cmp);
    y.dedup();
    y.push(f64::INFINITY);
    y
}

fn column_of(y_grid: &[f64], v: f64) -> usize {
    y_grid.partition_point(|&g| g < v)
}

/// `S(t, y) = √n (F̂_num(t, y) - F̂_marg(trim_hi, y) F̂(t, ∞))`.
///
/// `num_res == marg_res` gives the plain process; constrained numerator
/// residuals with unconstrained marginal ones give the monotone-model process.
pub fn independence_process(num_res: &ResidualSet, marg_res: &ResidualSet, n: usize) -> Result<ProcessField> {
    if num_res.indices != marg_res.indices {
        return Err(Error::InvalidParameter("residual sets must share trimming".into()));
    }
    let nt = num_res.n_trim();
    if nt == 0 {
        return Err(Error::TrimEmpty { lo: num_res.trim_lo, hi: num_res.trim_hi });
    }
    let y_grid = residual_grid(num_res, marg_res);
    let w = y_grid.len();
    let ntf = nt as f64;
    let root_n = (n as f64).sqrt();

    // marginal counts per column
    let mut marg = vec![0usize; w];
    for &e in &marg_res.eps {
        marg[column_of(&y_grid, e)] += 1;
    }
    for j in 1..w {
        marg[j] += marg[j - 1];
    }

    let mut order: Vec<usize> = (0..nt).collect();
    order.sort_by(|&i, &j| num_res.x[i].total_cmp(&num_res.x[j]).then(i.cmp(&j)));
    let cols: Vec<usize> = num_res.eps.iter().map(|&e| column_of(&y_grid, e)).collect();

    let mut t_grid = Vec::new();
    let mut values = Vec::new();
    let mut hist = vec![0usize; w];
    let mut k = 0;
    while k < nt {
        let t = num_res.x[order[k]];
        while k < nt && num_res.x[order[k]] == t {
            hist[cols[order[k]]] += 1;
            k += 1;
        }
        let m_t = k as f64 / ntf;
        let mut cnt = 0usize;
        for j in 0..w {
            cnt += hist[j];
            values.push(root_n * (cnt as f64 / ntf - (marg[j] as f64 / ntf) * m_t));
        }
        t_grid.push(t);
    }
    Ok(ProcessField { t_grid, y_grid, values })
}

/// `sup |S|` over the grid.
pub fn ks_statistic(field: &ProcessField) -> f64 {
    field.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `(1/n) Σ_{all X_i} (1/n_t) Σ_{j} S²(X_i, ε̂_j)`, the inner sum running over
/// the marginal residuals; `S` vanishes for covariates outside the trimming.
pub fn cvm_statistic(field: &ProcessField, all_x: &[f64], marg_res: &ResidualSet) -> f64 {
    let cols: Vec<usize> = marg_res.eps.iter().map(|&e| column_of(&field.y_grid, e)).collect();
    let nt = marg_res.n_trim() as f64;
    let mut total = 0.0;
    for &x in all_x {
        if !in_trim(x, (marg_res.trim_lo, marg_res.trim_hi)) {
            continue;
        }
        let ti = field.t_grid.partition_point(|&v| v <= x);
        if ti == 0 {
            continue;
        }
        let row = field.row(ti - 1);
        let inner: f64 = cols.iter().map(|&c| row[c] * row[c]).sum();
        total += inner / nt;
    }
    total / all_x.len() as f64
}

/// Degenerate statistics for the constrained residuals: `sup_t |R_n(t)|` with
/// `R_n(t) = n^{-1/2} Σ (I{ε̂_{i,I} ≤ 0} - τ) I{X_i ≤ t}`, and
/// `sup_y |S̃_n(trim_hi, y)|`, the last-row gap between constrained and
/// unconstrained residual distributions.
pub fn degenerate_diagnostics(res_i: &ResidualSet, res: &ResidualSet, tau: f64, n: usize) -> (f64, f64) {
    let root_n = (n as f64).sqrt();
    let mut order: Vec<usize> = (0..res_i.n_trim()).collect();
    order.sort_by(|&i, &j| res_i.x[i].total_cmp(&res_i.x[j]));
    let mut acc = 0.0;
    let mut sup_r: f64 = 0.0;
    for (k, &i) in order.iter().enumerate() {
        acc += if res_i.eps[i] <= 0.0 { 1.0 - tau } else { -tau };
        let group_end = k + 1 == order.len() || res_i.x[order[k + 1]] != res_i.x[i];
        if group_end {
            sup_r = sup_r.max(acc.abs());
        }
    }

    let mut a = res_i.eps.clone();
    let mut b = res.eps.clone();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let mut sup_s: f64 = 0.0;
    for &y in a.iter().chain(&b) {
        let ca = a.partition_point(|&v| v <= y) as f64;
        let cb = b.partition_point(|&v| v <= y) as f64;
        sup_s = sup_s.max((ca - cb).abs());
    }
    (sup_r / root_n, sup_s / root_n)
}
