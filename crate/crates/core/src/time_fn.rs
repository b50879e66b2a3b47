//! Scalar functions of time.
//!
//! Two representations are supported. [`QuasiPoly`] holds finite sums of
//! `c * t^n * exp(k t)` with complex `c` and `k`; real-valued functions are
//! stored with conjugate-paired terms, so trigonometric and hyperbolic
//! profiles are exact. The class is closed under sums, products and
//! differentiation, which is what makes Lie brackets of point generators
//! exact. [`Tabulated`] holds sampled data with linear or natural cubic
//! spline interpolation. [`TimeFn`] combines both into an expression tree.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{QbmError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
struct Term {
    coef: Complex64,
    power: u32,
    rate: Complex64,
}

impl Term {
    fn key_cmp(&self, other: &Term) -> Ordering {
        self.power
            .cmp(&other.power)
            .then(self.rate.re.total_cmp(&other.rate.re))
            .then(self.rate.im.total_cmp(&other.rate.im))
    }

    fn same_key(&self, other: &Term) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

/// Exponential polynomial `sum_i c_i t^{n_i} e^{k_i t}`, evaluated as its real part.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct QuasiPoly {
    terms: Vec<Term>,
}

impl QuasiPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::exp(c, 0.0)
    }

    /// `c * e^(rate t)`
    pub fn exp(c: f64, rate: f64) -> Self {
        Self::from_terms(vec![Term {
            coef: Complex64::new(c, 0.0),
            power: 0,
            rate: Complex64::new(rate, 0.0),
        }])
    }

    /// `c * t^power`
    pub fn monomial(c: f64, power: u32) -> Self {
        Self::from_terms(vec![Term {
            coef: Complex64::new(c, 0.0),
            power,
            rate: Complex64::new(0.0, 0.0),
        }])
    }

    /// `c * cos(omega t)`
    pub fn cos(c: f64, omega: f64) -> Self {
        let half = Complex64::new(0.5 * c, 0.0);
        Self::from_terms(vec![
            Term {
                coef: half,
                power: 0,
                rate: Complex64::new(0.0, omega),
            },
            Term {
                coef: half,
                power: 0,
                rate: Complex64::new(0.0, -omega),
            },
        ])
    }

    /// `c * sin(omega t)`
    pub fn sin(c: f64, omega: f64) -> Self {
        // sin = (e^{i w t} - e^{-i w t}) / 2i
        let a = Complex64::new(0.0, -0.5 * c);
        Self::from_terms(vec![
            Term {
                coef: a,
                power: 0,
                rate: Complex64::new(0.0, omega),
            },
            Term {
                coef: -a,
                power: 0,
                rate: Complex64::new(0.0, -omega),
            },
        ])
    }

    fn from_terms(mut terms: Vec<Term>) -> Self {
        terms.sort_by(|a, b| a.key_cmp(b));
        let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.same_key(&t) => last.coef += t.coef,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coef != Complex64::new(0.0, 0.0));
        QuasiPoly { terms: merged }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Value if the function is a constant, `None` otherwise.
    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.as_slice() {
            [] => Some(0.0),
            [t] if t.power == 0 && t.rate == Complex64::new(0.0, 0.0) => Some(t.coef.re),
            _ => None,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for term in &self.terms {
            let e = (term.rate * t).exp();
            let p = if term.power == 0 {
                1.0
            } else {
                t.powi(term.power as i32)
            };
            acc += (term.coef * e).re * p;
        }
        acc
    }

    pub fn add(&self, other: &QuasiPoly) -> QuasiPoly {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self::from_terms(terms)
    }

    pub fn sub(&self, other: &QuasiPoly) -> QuasiPoly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> QuasiPoly {
        Self::from_terms(
            self.terms
                .iter()
                .map(|t| Term {
                    coef: t.coef * c,
                    ..*t
                })
                .collect(),
        )
    }

    pub fn mul(&self, other: &QuasiPoly) -> QuasiPoly {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(Term {
                    coef: a.coef * b.coef,
                    power: a.power + b.power,
                    rate: a.rate + b.rate,
                });
            }
        }
        Self::from_terms(terms)
    }

    pub fn derivative(&self) -> QuasiPoly {
        let mut terms = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            if t.rate != Complex64::new(0.0, 0.0) {
                terms.push(Term {
                    coef: t.coef * t.rate,
                    ..*t
                });
            }
            if t.power > 0 {
                terms.push(Term {
                    coef: t.coef * t.power as f64,
                    power: t.power - 1,
                    rate: t.rate,
                });
            }
        }
        Self::from_terms(terms)
    }
}

impl fmt::Display for QuasiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if t.coef.im == 0.0 {
                write!(f, "{}", t.coef.re)?;
            } else {
                write!(f, "({}{:+}i)", t.coef.re, t.coef.im)?;
            }
            if t.power > 0 {
                write!(f, "*t^{}", t.power)?;
            }
            if t.rate != Complex64::new(0.0, 0.0) {
                if t.rate.im == 0.0 {
                    write!(f, "*exp({}t)", t.rate.re)?;
                } else {
                    write!(f, "*exp(({}{:+}i)t)", t.rate.re, t.rate.im)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Interpolation {
    Linear,
    #[default]
    Cubic,
}

/// Sampled profile with linear or natural-cubic-spline interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct Tabulated {
    knots: Vec<f64>,
    values: Vec<f64>,
    kind: Interpolation,
    /// Spline second derivatives at the knots (cubic only).
    second: Vec<f64>,
}

impl Tabulated {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, kind: Interpolation) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(QbmError::InvalidParameter(format!(
                "table has {} times but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.len() < 2 {
            return Err(QbmError::InvalidParameter(
                "table needs at least two samples".into(),
            ));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(QbmError::InvalidParameter(
                "table times must be strictly increasing".into(),
            ));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(QbmError::InvalidParameter(
                "table contains non-finite entries".into(),
            ));
        }
        let second = match kind {
            Interpolation::Linear => Vec::new(),
            Interpolation::Cubic => natural_spline_second_derivatives(&knots, &values),
        };
        Ok(Tabulated {
            knots,
            values,
            kind,
            second,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    pub fn kind(&self) -> Interpolation {
        self.kind
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.knots.len();
        match self.knots.partition_point(|&k| k <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    /// Derivative of the interpolant of the given order at `t`; segments are
    /// extended past the end knots.
    pub fn eval_derivative(&self, t: f64, order: u8) -> f64 {
        let i = self.segment(t);
        let (t0, t1) = (self.knots[i], self.knots[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let h = t1 - t0;
        match self.kind {
            Interpolation::Linear => match order {
                0 => y0 + (y1 - y0) * (t - t0) / h,
                1 => (y1 - y0) / h,
                _ => 0.0,
            },
            Interpolation::Cubic => {
                let (m0, m1) = (self.second[i], self.second[i + 1]);
                let a = (t1 - t) / h;
                let b = 1.0 - a;
                match order {
                    0 => {
                        a * y0
                            + b * y1
                            + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0
                    }
                    1 => {
                        (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0
                            + (3.0 * b * b - 1.0) / 6.0 * h * m1
                    }
                    2 => a * m0 + b * m1,
                    3 => (m1 - m0) / h,
                    _ => 0.0,
                }
            }
        }
    }
}

fn natural_spline_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior equations, M_0 = M_{n-1} = 0.
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut upper = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for j in 0..k {
        let i = j + 1;
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[j] = (h0 + h1) / 3.0;
        upper[j] = h1 / 6.0;
        rhs[j] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    }
    for j in 1..k {
        let lower = (x[j + 1] - x[j]) / 6.0;
        let w = lower / diag[j - 1];
        diag[j] -= w * upper[j - 1];
        rhs[j] -= w * rhs[j - 1];
    }
    let mut sol = vec![0.0; k];
    sol[k - 1] = rhs[k - 1] / diag[k - 1];
    for j in (0..k - 1).rev() {
        sol[j] = (rhs[j] - upper[j] * sol[j + 1]) / diag[j];
    }
    m[1..=k].copy_from_slice(&sol);
    m
}

/// A scalar function of time, differentiable in closed form.
#[derive(Clone, Debug, PartialEq)]
pub enum TimeFn {
    Quasi(QuasiPoly),
    Table { table: Arc<Tabulated>, order: u8 },
    Sum(Arc<TimeFn>, Arc<TimeFn>),
    Product(Arc<TimeFn>, Arc<TimeFn>),
    Scaled(f64, Arc<TimeFn>),
}

impl Default for TimeFn {
    fn default() -> Self {
        TimeFn::zero()
    }
}

impl From<QuasiPoly> for TimeFn {
    fn from(q: QuasiPoly) -> Self {
        TimeFn::Quasi(q)
    }
}

impl From<Tabulated> for TimeFn {
    fn from(t: Tabulated) -> Self {
        TimeFn::Table {
            table: Arc::new(t),
            order: 0,
        }
    }
}

impl TimeFn {
    pub fn zero() -> Self {
        TimeFn::Quasi(QuasiPoly::zero())
    }

    pub fn constant(c: f64) -> Self {
        TimeFn::Quasi(QuasiPoly::constant(c))
    }

    pub fn exp(c: f64, rate: f64) -> Self {
        TimeFn::Quasi(QuasiPoly::exp(c, rate))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFn::Quasi(q) => q.eval(t),
            TimeFn::Table { table, order } => table.eval_derivative(t, *order),
            TimeFn::Sum(a, b) => a.eval(t) + b.eval(t),
            TimeFn::Product(a, b) => a.eval(t) * b.eval(t),
            TimeFn::Scaled(c, a) => c * a.eval(t),
        }
    }

    pub fn as_quasi(&self) -> Option<&QuasiPoly> {
        match self {
            TimeFn::Quasi(q) => Some(q),
            _ => None,
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.as_quasi().and_then(QuasiPoly::as_constant)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, TimeFn::Quasi(q) if q.is_zero())
    }

    /// Intersection of the domains of all tabulated leaves; `None` when unbounded.
    pub fn domain(&self) -> Option<(f64, f64)> {
        match self {
            TimeFn::Quasi(_) => None,
            TimeFn::Table { table, .. } => Some(table.domain()),
            TimeFn::Scaled(_, a) => a.domain(),
            TimeFn::Sum(a, b) | TimeFn::Product(a, b) => intersect(a.domain(), b.domain()),
        }
    }

    pub fn add(&self, other: &TimeFn) -> TimeFn {
        match (self, other) {
            (TimeFn::Quasi(a), TimeFn::Quasi(b)) => TimeFn::Quasi(a.add(b)),
            _ if other.is_zero() => self.clone(),
            _ if self.is_zero() => other.clone(),
            _ => TimeFn::Sum(Arc::new(self.clone()), Arc::new(other.clone())),
        }
    }

    pub fn sub(&self, other: &TimeFn) -> TimeFn {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> TimeFn {
        match self {
            TimeFn::Quasi(q) => TimeFn::Quasi(q.scale(c)),
            _ if c == 0.0 => TimeFn::zero(),
            _ if c == 1.0 => self.clone(),
            _ => TimeFn::Scaled(c, Arc::new(self.clone())),
        }
    }

    pub fn mul(&self, other: &TimeFn) -> TimeFn {
        match (self, other) {
            (TimeFn::Quasi(a), TimeFn::Quasi(b)) => TimeFn::Quasi(a.mul(b)),
            _ if self.is_zero() || other.is_zero() => TimeFn::zero(),
            (TimeFn::Quasi(a), _) if a.as_constant().is_some() => {
                other.scale(a.as_constant().unwrap())
            }
            (_, TimeFn::Quasi(b)) if b.as_constant().is_some() => {
                self.scale(b.as_constant().unwrap())
            }
            _ => TimeFn::Product(Arc::new(self.clone()), Arc::new(other.clone())),
        }
    }

    pub fn derivative(&self) -> TimeFn {
        match self {
            TimeFn::Quasi(q) => TimeFn::Quasi(q.derivative()),
            TimeFn::Table { table, order } => {
                let max_order = match table.kind() {
                    Interpolation::Linear => 1,
                    Interpolation::Cubic => 3,
                };
                if *order >= max_order {
                    TimeFn::zero()
                } else {
                    TimeFn::Table {
                        table: Arc::clone(table),
                        order: order + 1,
                    }
                }
            }
            TimeFn::Sum(a, b) => a.derivative().add(&b.derivative()),
            TimeFn::Product(a, b) => a.derivative().mul(b).add(&a.mul(&b.derivative())),
            TimeFn::Scaled(c, a) => a.derivative().scale(*c),
        }
    }
}

fn intersect(a: Option<(f64, f64)>, b: Option<(f64, f64)>) -> Option<(f64, f64)> {
    match (a, b) {
        (None, d) | (d, None) => d,
        (Some((a0, a1)), Some((b0, b1))) => Some((a0.max(b0), a1.min(b1))),
    }
}

impl fmt::Display for TimeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeFn::Quasi(q) => write!(f, "{q}"),
            TimeFn::Table { table, order } => {
                let (a, b) = table.domain();
                write!(f, "table[{a}, {b}]")?;
                for _ in 0..*order {
                    write!(f, "'")?;
                }
                Ok(())
            }
            TimeFn::Sum(a, b) => write!(f, "({a}) + ({b})"),
            TimeFn::Product(a, b) => write!(f, "({a}) * ({b})"),
            TimeFn::Scaled(c, a) => write!(f, "{c} * ({a})"),
        }
    }
}
