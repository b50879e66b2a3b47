//! Uniform grids and sampled fields.
//!
//! [`Field2D`] holds a real phase-space snapshot `Z(t, x, y)` (x is momentum,
//! y is position); [`Field1D`] holds a complex profile `U(t, w)` of the
//! reduced equation.
//!
//! CSV layout: a `# t=<time>` header, a column header line, then one row per
//! node in x-major order with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{QbmError, Result};
use crate::interp::cubic_stencil;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    min: f64,
    max: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if !(min < max) || !min.is_finite() || !max.is_finite() {
            return Err(QbmError::InvalidGrid(format!(
                "bounds [{min}, {max}] are not increasing"
            )));
        }
        if n < 3 {
            return Err(QbmError::InvalidGrid(format!(
                "need at least 3 nodes, got {n}"
            )));
        }
        Ok(Grid1D { min, max, n })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    /// Node coordinate; the last node is exactly `max`.
    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.max
        } else {
            self.min + i as f64 * self.spacing()
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    pub fn contains(&self, w: f64) -> bool {
        w >= self.min && w <= self.max
    }

    /// Same bounds with `2n - 1` nodes (spacing halved).
    pub fn refined(&self) -> Grid1D {
        Grid1D {
            n: 2 * self.n - 1,
            ..*self
        }
    }

    fn fractional_index(&self, w: f64) -> f64 {
        (w - self.min) / self.spacing()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    pub x: Grid1D,
    pub y: Grid1D,
}

impl Grid2D {
    pub fn new(x: Grid1D, y: Grid1D) -> Self {
        Grid2D { x, y }
    }

    /// Square grid `[min, max]^2` with `n` nodes per axis.
    pub fn square(min: f64, max: f64, n: usize) -> Result<Self> {
        let axis = Grid1D::new(min, max, n)?;
        Ok(Grid2D { x: axis, y: axis })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.x.n(), self.y.n())
    }

    pub fn refined(&self) -> Grid2D {
        Grid2D {
            x: self.x.refined(),
            y: self.y.refined(),
        }
    }
}

/// Real scalar field on a 2D grid at time `t`; `values[[i, j]]` sits at `(x_i, y_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field2D {
    pub grid: Grid2D,
    pub t: f64,
    pub values: Array2<f64>,
}

impl Field2D {
    pub fn new(grid: Grid2D, t: f64, values: Array2<f64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(QbmError::InvalidGrid(format!(
                "value array {:?} does not match grid {:?}",
                values.dim(),
                grid.shape()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(QbmError::BlowUp { t });
        }
        Ok(Field2D { grid, t, values })
    }

    pub fn from_fn(grid: Grid2D, t: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let xs = grid.x.coords();
        let ys = grid.y.coords();
        let values = Array2::from_shape_fn(grid.shape(), |(i, j)| f(xs[i], ys[j]));
        Field2D::new(grid, t, values)
    }

    pub fn zeros(grid: Grid2D, t: f64) -> Self {
        Field2D {
            grid,
            t,
            values: Array2::zeros(grid.shape()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest magnitude on the outermost ring of nodes.
    pub fn boundary_max_abs(&self) -> f64 {
        let (nx, ny) = self.grid.shape();
        let mut m: f64 = 0.0;
        for i in 0..nx {
            m = m
                .max(self.values[[i, 0]].abs())
                .max(self.values[[i, ny - 1]].abs());
        }
        for j in 0..ny {
            m = m
                .max(self.values[[0, j]].abs())
                .max(self.values[[nx - 1, j]].abs());
        }
        m
    }

    /// `a * self + b * other` on the same grid, stamped with `self.t`.
    pub fn combine(&self, a: f64, other: &Field2D, b: f64) -> Result<Field2D> {
        if self.grid != other.grid {
            return Err(QbmError::InvalidGrid(
                "fields live on different grids".into(),
            ));
        }
        let values = &self.values * a + &other.values * b;
        Ok(Field2D {
            grid: self.grid,
            t: self.t,
            values,
        })
    }
}

/// Complex scalar field on a 1D grid at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field1D {
    pub grid: Grid1D,
    pub t: f64,
    pub values: Array1<Complex64>,
}

impl Field1D {
    pub fn new(grid: Grid1D, t: f64, values: Array1<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(QbmError::InvalidGrid(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.n()
            )));
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(QbmError::BlowUp { t });
        }
        Ok(Field1D { grid, t, values })
    }

    pub fn from_fn(grid: Grid1D, t: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = Array1::from_iter(grid.coords().into_iter().map(f));
        Field1D::new(grid, t, values)
    }

    /// Four-point cubic interpolation; exact at nodes.
    pub fn sample(&self, w: f64) -> Result<Complex64> {
        if !self.grid.contains(w) {
            return Err(QbmError::OutOfBounds { x: w, y: 0.0 });
        }
        if self.grid.n() < 4 {
            return Err(QbmError::InvalidGrid("cubic sampling needs 4 nodes".into()));
        }
        let (start, wts) = cubic_stencil(self.grid.fractional_index(w), self.grid.n());
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, wt) in wts.iter().enumerate() {
            if *wt != 0.0 {
                acc += self.values[start + k] * *wt;
            }
        }
        Ok(acc)
    }
}

/// Correlated Gaussian `amp * exp(-Q/2)` with
/// `Q = (u^2 - 2 rho u v + v^2) / (1 - rho^2)`, `u = (x-x0)/sx`, `v = (y-y0)/sy`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian2D {
    pub x0: f64,
    pub y0: f64,
    pub sx: f64,
    pub sy: f64,
    pub rho: f64,
    pub amp: f64,
}

impl Gaussian2D {
    pub fn validate(&self) -> Result<()> {
        if !(self.sx > 0.0) || !(self.sy > 0.0) {
            return Err(QbmError::InvalidParameter(format!(
                "widths must be positive, got sx={}, sy={}",
                self.sx, self.sy
            )));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(QbmError::InvalidParameter(format!(
                "correlation must lie in (-1, 1), got {}",
                self.rho
            )));
        }
        Ok(())
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let u = (x - self.x0) / self.sx;
        let v = (y - self.y0) / self.sy;
        let q = (u * u - 2.0 * self.rho * u * v + v * v) / (1.0 - self.rho * self.rho);
        self.amp * (-0.5 * q).exp()
    }

    /// Integral over the whole plane.
    pub fn total_mass(&self) -> f64 {
        self.amp
            * 2.0
            * std::f64::consts::PI
            * self.sx
            * self.sy
            * (1.0 - self.rho * self.rho).sqrt()
    }
}

pub fn gaussian2d(grid: Grid2D, g: &Gaussian2D) -> Result<Field2D> {
    g.validate()?;
    Field2D::from_fn(grid, 0.0, |x, y| g.value(x, y))
}

fn trapezoid_weights(axis: &Grid1D) -> Vec<f64> {
    let h = axis.spacing();
    (0..axis.n())
        .map(|i| {
            if i == 0 || i + 1 == axis.n() {
                0.5 * h
            } else {
                h
            }
        })
        .collect()
}

/// Trapezoidal quadrature of `weight(x, y) * Z` over the grid.
pub fn integrate2d_weighted(f: &Field2D, weight: impl Fn(f64, f64) -> f64) -> f64 {
    let wx = trapezoid_weights(&f.grid.x);
    let wy = trapezoid_weights(&f.grid.y);
    let xs = f.grid.x.coords();
    let ys = f.grid.y.coords();
    let mut total = 0.0;
    for (i, row) in f.values.outer_iter().enumerate() {
        let mut acc = 0.0;
        for (j, v) in row.iter().enumerate() {
            acc += wy[j] * weight(xs[i], ys[j]) * v;
        }
        total += wx[i] * acc;
    }
    total
}

pub fn integrate2d(f: &Field2D) -> f64 {
    integrate2d_weighted(f, |_, _| 1.0)
}

/// Bicubic (tensor four-point Lagrange) interpolation; exact at nodes.
pub fn sample2d(f: &Field2D, x: f64, y: f64) -> Result<f64> {
    let g = &f.grid;
    if !g.x.contains(x) || !g.y.contains(y) {
        return Err(QbmError::OutOfBounds { x, y });
    }
    if g.x.n() < 4 || g.y.n() < 4 {
        return Err(QbmError::InvalidGrid(
            "bicubic sampling needs 4 nodes per axis".into(),
        ));
    }
    let (i0, wx) = cubic_stencil(g.x.fractional_index(x), g.x.n());
    let (j0, wy) = cubic_stencil(g.y.fractional_index(y), g.y.n());
    let mut acc = 0.0;
    for (a, &wa) in wx.iter().enumerate() {
        if wa == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for (b, &wb) in wy.iter().enumerate() {
            if wb != 0.0 {
                row += wb * f.values[[i0 + a, j0 + b]];
            }
        }
        acc += wa * row;
    }
    Ok(acc)
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn field2d_to_csv(f: &Field2D) -> String {
    let mut out = String::with_capacity(f.values.len() * 72 + 64);
    let _ = writeln!(out, "# t={}", fmt_num(f.t));
    out.push_str("x,y,value\n");
    let xs = f.grid.x.coords();
    let ys = f.grid.y.coords();
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_num(*x),
                fmt_num(*y),
                fmt_num(f.values[[i, j]])
            );
        }
    }
    out
}

pub fn field1d_to_csv(f: &Field1D) -> String {
    let mut out = String::with_capacity(f.values.len() * 72 + 64);
    let _ = writeln!(out, "# t={}", fmt_num(f.t));
    out.push_str("w,re,im\n");
    for (w, v) in f.grid.coords().iter().zip(f.values.iter()) {
        let _ = writeln!(out, "{},{},{}", fmt_num(*w), fmt_num(v.re), fmt_num(v.im));
    }
    out
}

pub fn write_field2d(path: &Path, f: &Field2D) -> Result<()> {
    fs::write(path, field2d_to_csv(f))?;
    Ok(())
}

pub fn write_field1d(path: &Path, f: &Field1D) -> Result<()> {
    fs::write(path, field1d_to_csv(f))?;
    Ok(())
}

struct CsvRows {
    t: f64,
    rows: Vec<(usize, [f64; 3])>,
}

fn parse_csv(text: &str, header: &str) -> Result<CsvRows> {
    let mut lines = text.lines().enumerate();
    let err = |line: usize, msg: String| QbmError::Parse { line, msg };
    let (_, first) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let t = first
        .strip_prefix("# t=")
        .ok_or_else(|| err(1, "expected `# t=<time>` header".into()))?
        .trim()
        .parse::<f64>()
        .map_err(|e| err(1, format!("bad time stamp: {e}")))?;
    let (_, cols) = lines
        .next()
        .ok_or_else(|| err(2, "missing column header".into()))?;
    if cols.trim() != header {
        return Err(err(
            2,
            format!("expected column header `{header}`, found `{}`", cols.trim()),
        ));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(err(
                line_no,
                format!("expected 3 columns, found {}", parts.len()),
            ));
        }
        let mut v = [0.0; 3];
        for (k, p) in parts.iter().enumerate() {
            v[k] = p
                .trim()
                .parse::<f64>()
                .map_err(|_| err(line_no, format!("`{}` is not a number", p.trim())))?;
        }
        rows.push((line_no, v));
    }
    Ok(CsvRows { t, rows })
}

fn axis_from(coords: &[f64], line: usize) -> Result<Grid1D> {
    let n = coords.len();
    let g = Grid1D::new(coords[0], coords[n - 1], n).map_err(|e| QbmError::Parse {
        line,
        msg: e.to_string(),
    })?;
    for (i, c) in coords.iter().enumerate() {
        if *c != g.coord(i) {
            return Err(QbmError::Parse {
                line,
                msg: format!("coordinate {c} is not on a uniform grid"),
            });
        }
    }
    Ok(g)
}

pub fn field2d_from_csv(text: &str) -> Result<Field2D> {
    let CsvRows { t, rows } = parse_csv(text, "x,y,value")?;
    let first_line = rows.first().map(|r| r.0).unwrap_or(3);
    if rows.is_empty() {
        return Err(QbmError::Parse {
            line: 3,
            msg: "no data rows".into(),
        });
    }
    let x0 = rows[0].1[0];
    let ny = rows.iter().take_while(|r| r.1[0] == x0).count();
    if rows.len() % ny != 0 {
        return Err(QbmError::Parse {
            line: rows.last().unwrap().0,
            msg: format!("{} rows do not form blocks of {ny}", rows.len()),
        });
    }
    let nx = rows.len() / ny;
    let ys: Vec<f64> = rows[..ny].iter().map(|r| r.1[1]).collect();
    let xs: Vec<f64> = (0..nx).map(|i| rows[i * ny].1[0]).collect();
    let mut values = Array2::zeros((nx, ny));
    for (k, (line, v)) in rows.iter().enumerate() {
        let (i, j) = (k / ny, k % ny);
        if v[0] != xs[i] || v[1] != ys[j] {
            return Err(QbmError::Parse {
                line: *line,
                msg: "rows are not in x-major grid order".into(),
            });
        }
        values[[i, j]] = v[2];
    }
    let grid = Grid2D::new(axis_from(&xs, first_line)?, axis_from(&ys, first_line)?);
    Field2D::new(grid, t, values)
}

pub fn field1d_from_csv(text: &str) -> Result<Field1D> {
    let CsvRows { t, rows } = parse_csv(text, "w,re,im")?;
    if rows.is_empty() {
        return Err(QbmError::Parse {
            line: 3,
            msg: "no data rows".into(),
        });
    }
    let ws: Vec<f64> = rows.iter().map(|r| r.1[0]).collect();
    let grid = axis_from(&ws, rows[0].0)?;
    let values = Array1::from_iter(rows.iter().map(|r| Complex64::new(r.1[1], r.1[2])));
    Field1D::new(grid, t, values)
}

pub fn read_field2d(path: &Path) -> Result<Field2D> {
    field2d_from_csv(&fs::read_to_string(path)?)
}

pub fn read_field1d(path: &Path) -> Result<Field1D> {
    field1d_from_csv(&fs::read_to_string(path)?)
}

/// JSON metadata sidecar for a snapshot file.
pub fn sidecar_json_2d(f: &Field2D, provenance: &str) -> serde_json::Value {
    serde_json::json!({
        "kind": "field2d",
        "t": f.t,
        "x": { "min": f.grid.x.min(), "max": f.grid.x.max(), "n": f.grid.x.n() },
        "y": { "min": f.grid.y.min(), "max": f.grid.y.max(), "n": f.grid.y.n() },
        "provenance": provenance,
    })
}

pub fn sidecar_json_1d(f: &Field1D, provenance: &str) -> serde_json::Value {
    serde_json::json!({
        "kind": "field1d",
        "t": f.t,
        "w": { "min": f.grid.min(), "max": f.grid.max(), "n": f.grid.n() },
        "provenance": provenance,
    })
}
