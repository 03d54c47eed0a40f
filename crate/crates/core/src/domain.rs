//! Uniform periodic grids on the circle and functions sampled on them.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::io::BufRead;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Smallest node count accepted by [`PeriodicGrid::new`].
pub const MIN_NODES: usize = 4;

/// Uniform nodes `x_i = i * spacing` on `[0, period)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    n: usize,
    period: f64,
    spacing: f64,
}

impl PeriodicGrid {
    pub fn new(n: usize, period: f64) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::InvalidInput(format!(
                "grid too coarse: n = {n}, need at least {MIN_NODES} nodes"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grid period must be positive and finite, got {period}"
            )));
        }
        Ok(Self { n, period, spacing: period / n as f64 })
    }

    /// Grid on the standard circle `[0, 2π)`.
    pub fn circle(n: usize) -> Result<Self> {
        Self::new(n, TAU)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    /// Maps `x` into `[0, period)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let r = x.rem_euclid(self.period);
        // rem_euclid can round up to `period` for tiny negative inputs
        if r >= self.period {
            0.0
        } else {
            r
        }
    }

    /// Index of the node nearest to `x` (after wrapping).
    pub fn nearest(&self, x: f64) -> usize {
        let s = (self.wrap(x) / self.spacing).round() as usize;
        s % self.n
    }

    /// Distance between two points measured along the circle.
    pub fn circle_distance(&self, a: f64, b: f64) -> f64 {
        let d = self.wrap(a - b);
        d.min(self.period - d)
    }

    fn same_as(&self, other: &Self) -> bool {
        self.n == other.n && self.period == other.period
    }
}

/// Values of a function at the nodes of a [`PeriodicGrid`]. Every value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: PeriodicGrid,
    values: Arc<[f64]>,
}

impl GridFunction {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.n()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("value {} at node {i}", values[i])));
        }
        Ok(Self { grid, values: values.into() })
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn constant(grid: PeriodicGrid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.n()])
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Value at node `i`, with the index taken modulo `n`.
    pub fn at(&self, i: isize) -> f64 {
        self.values[i.rem_euclid(self.grid.n as isize) as usize]
    }

    /// Periodic piecewise-linear interpolant at `x`.
    pub fn interpolate(&self, x: f64) -> f64 {
        let s = self.grid.wrap(x) / self.grid.spacing;
        let k = s.floor();
        let theta = s - k;
        let i = k as usize % self.grid.n;
        let j = (i + 1) % self.grid.n;
        if theta == 0.0 {
            self.values[i]
        } else {
            (1.0 - theta) * self.values[i] + theta * self.values[j]
        }
    }

    /// Applies `f` to every value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Combines two functions on the same grid node by node.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_grid(other)?;
        Self::new(
            self.grid,
            self.values.iter().zip(other.values.iter()).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn shifted(&self, a: f64) -> Result<Self> {
        self.map(|v| v + a)
    }

    pub fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "grid (n = {}, period = {}) vs (n = {}, period = {})",
                self.grid.n, self.grid.period, other.grid.n, other.grid.period
            )))
        }
    }

    /// Writes the `x,value` CSV representation.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.len() + 8);
        out.push_str("x,value\n");
        for (x, v) in self.grid.nodes().zip(self.values.iter()) {
            let _ = writeln!(out, "{},{}", fmt_sig(x), fmt_sig(*v));
        }
        out
    }

    /// Parses the `x,value` CSV representation. The grid is rebuilt from
    /// the row count with the given period; the x column must match it.
    pub fn from_csv(reader: impl BufRead, period: f64) -> Result<Self> {
        let mut lines = reader.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "x,value" => {}
            Some(Ok(h)) => return Err(Error::Parse(format!("unexpected CSV header {h:?}"))),
            Some(Err(e)) => return Err(Error::Io { path: "<csv>".into(), source: e }),
            None => return Err(Error::Parse("empty CSV".into())),
        }
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Io { path: "<csv>".into(), source: e })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let (Some(x), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse(format!("line {}: expected two columns", lineno + 2)));
            };
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
            };
            xs.push(parse(x)?);
            vs.push(parse(v)?);
        }
        let grid = PeriodicGrid::new(vs.len(), period)?;
        for (i, x) in xs.iter().enumerate() {
            if (x - grid.node(i)).abs() > 1e-9 * period {
                return Err(Error::Parse(format!(
                    "row {i}: x = {x} does not match node {}",
                    grid.node(i)
                )));
            }
        }
        Self::new(grid, vs)
    }
}

/// Largest nodewise absolute difference.
pub fn sup_diff(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    f.check_grid(g)?;
    Ok(f.values
        .iter()
        .zip(g.values.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Formats a float with 12 significant digits in scientific notation.
/// Output is platform independent and parses back with `str::parse`.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v:.11e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn make_grid_spacing() {
        let g = PeriodicGrid::new(8, TAU).unwrap();
        assert_eq!(g.spacing(), PI / 4.0);
        let g = PeriodicGrid::new(512, TAU).unwrap();
        assert_eq!(g.spacing(), TAU / 512.0);
        assert!((g.spacing() * 512.0 - TAU).abs() <= f64::EPSILON * TAU);
    }

    #[test]
    fn make_grid_rejects_bad_input() {
        let err = PeriodicGrid::new(3, TAU).unwrap_err();
        assert!(err.to_string().contains("grid too coarse"));
        assert!(PeriodicGrid::new(8, 0.0).is_err());
        assert!(PeriodicGrid::new(8, -1.0).is_err());
        assert!(PeriodicGrid::new(8, f64::NAN).is_err());
    }

    #[test]
    fn grid_function_rejects_non_finite_and_wrong_length() {
        let g = PeriodicGrid::circle(4).unwrap();
        assert!(GridFunction::new(g, vec![0.0; 3]).is_err());
        assert!(GridFunction::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(GridFunction::new(g, vec![0.0, f64::INFINITY, 0.0, 0.0]).is_err());
    }

    #[test]
    fn interpolate_nodes_midpoints_and_wrap() {
        let g = PeriodicGrid::circle(16).unwrap();
        let f = GridFunction::from_fn(g, f64::sin).unwrap();
        let x3 = g.node(3);
        assert_eq!(f.interpolate(x3), x3.sin());

        let lin = GridFunction::from_fn(g, |x| 2.0 * x + 1.0).unwrap();
        let mid = 0.5 * (g.node(5) + g.node(6));
        let expect = 0.5 * (lin.values()[5] + lin.values()[6]);
        assert!((lin.interpolate(mid) - expect).abs() < 1e-14);

        assert!((f.interpolate(TAU + 0.1) - f.interpolate(0.1)).abs() < 1e-15);
        assert!((f.interpolate(-0.1) - f.interpolate(TAU - 0.1)).abs() < 1e-15);
        // last cell wraps back to node 0
        let last = 0.5 * (g.node(15) + TAU);
        assert!((f.interpolate(last) - 0.5 * (f.values()[15] + f.values()[0])).abs() < 1e-15);
    }

    #[test]
    fn sup_diff_cases() {
        let g = PeriodicGrid::circle(4).unwrap();
        let f = GridFunction::new(g, vec![0.0, 2.0, -3.0, 0.0]).unwrap();
        let zero = GridFunction::constant(g, 0.0).unwrap();
        let one = GridFunction::constant(g, 1.0).unwrap();
        assert_eq!(sup_diff(&f, &f).unwrap(), 0.0);
        assert_eq!(sup_diff(&one, &zero).unwrap(), 1.0);
        assert_eq!(sup_diff(&f, &zero).unwrap(), 3.0);
        let other = GridFunction::constant(PeriodicGrid::circle(5).unwrap(), 0.0).unwrap();
        assert!(matches!(sup_diff(&f, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn csv_round_trip() {
        let g = PeriodicGrid::circle(32).unwrap();
        let f = GridFunction::from_fn(g, |x| (3.0 * x).cos() * 1e3 + x.sin() * 1e-3).unwrap();
        let text = f.to_csv();
        assert!(text.starts_with("x,value\n"));
        assert!(!text.contains('\r'));
        let back = GridFunction::from_csv(text.as_bytes(), TAU).unwrap();
        let scale = f.values().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        assert!(sup_diff(&f, &back).unwrap() <= 1e-11 * scale);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(GridFunction::from_csv("a,b\n".as_bytes(), TAU).is_err());
        assert!(GridFunction::from_csv("x,value\n0,1,2\n".as_bytes(), TAU).is_err());
        assert!(GridFunction::from_csv("x,value\n0,zz\n".as_bytes(), TAU).is_err());
    }
}
