//! Physical parameters and the time-dependent coefficients `p, q, r, s` of
//! the master equation
//!
//! ```text
//! Z_t = -(x/m) Z_y + p(t) y Z_x + q(t) (x Z)_x + r(t) Z_xx + s(t) Z_xy
//! ```

use std::fmt;
use std::path::Path;

use crate::error::{QbmError, Result};
use crate::time_fn::{Interpolation, Tabulated, TimeFn};

/// Parses a profile spec: `const:<value>`, `exp:<rate>` (meaning `e^(rate t)`)
/// or `table:<path>` (two columns, time then value). Relative table paths are
/// resolved against `base_dir`.
pub fn parse_profile(spec: &str, base_dir: Option<&Path>, kind: Interpolation) -> Result<TimeFn> {
    let (tag, arg) = spec.split_once(':').ok_or_else(|| {
        QbmError::InvalidParameter(format!("profile `{spec}` lacks a `kind:` prefix"))
    })?;
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| QbmError::InvalidParameter(format!("`{s}` is not a finite number")))
    };
    match tag.trim() {
        "const" => Ok(TimeFn::constant(number(arg)?)),
        "exp" => Ok(TimeFn::exp(1.0, number(arg)?)),
        "table" => {
            let path = Path::new(arg.trim());
            let path = match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path.to_path_buf(),
            };
            let text = std::fs::read_to_string(&path)
                .map_err(|e| QbmError::Io(format!("{}: {e}", path.display())))?;
            Ok(parse_table(&text, kind)?.into())
        }
        other => Err(QbmError::InvalidParameter(format!(
            "unknown profile kind `{other}`"
        ))),
    }
}

/// Two-column decimal text (comma or whitespace separated); `#` starts a comment.
pub fn parse_table(text: &str, kind: Interpolation) -> Result<Tabulated> {
    let mut knots = Vec::new();
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if cols.len() != 2 {
            return Err(QbmError::Parse {
                line: idx + 1,
                msg: format!("expected 2 columns, found {}", cols.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| QbmError::Parse {
                line: idx + 1,
                msg: format!("`{s}` is not a number"),
            })
        };
        knots.push(parse(cols[0])?);
        values.push(parse(cols[1])?);
    }
    Tabulated::new(knots, values, kind)
}

/// Mass, Planck constant and the four coefficient profiles of the master equation.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    m: f64,
    hbar: f64,
    p: TimeFn,
    q: TimeFn,
    r: TimeFn,
    s: TimeFn,
    domain: (f64, f64),
}

impl CoefficientSet {
    /// Builds a set from the `p, q, r, s` profiles directly. The domain is the
    /// intersection of the tabulated profiles' ranges (unbounded if none).
    pub fn new(m: f64, hbar: f64, p: TimeFn, q: TimeFn, r: TimeFn, s: TimeFn) -> Result<Self> {
        check_positive("m", m)?;
        check_positive("hbar", hbar)?;
        let mut domain = (f64::NEG_INFINITY, f64::INFINITY);
        for f in [&p, &q, &r, &s] {
            if let Some((a, b)) = f.domain() {
                domain = (domain.0.max(a), domain.1.min(b));
            }
        }
        if !(domain.0 < domain.1) {
            return Err(QbmError::InvalidParameter(
                "coefficient profiles share no common time domain".into(),
            ));
        }
        Ok(CoefficientSet {
            m,
            hbar,
            p,
            q,
            r,
            s,
            domain,
        })
    }

    /// Constant coefficients with `hbar = 1`.
    pub fn constant(m: f64, p: f64, q: f64, r: f64, s: f64) -> Result<Self> {
        Self::new(
            m,
            1.0,
            TimeFn::constant(p),
            TimeFn::constant(q),
            TimeFn::constant(r),
            TimeFn::constant(s),
        )
    }

    /// Maps physical profiles to `p = m Omega^2`, `q = 2 Gamma`,
    /// `r = hbar m Gamma h`, `s = hbar Gamma f`.
    pub fn from_physical(
        m: f64,
        hbar: f64,
        omega2: &TimeFn,
        gamma: &TimeFn,
        h: &TimeFn,
        f: &TimeFn,
    ) -> Result<Self> {
        check_positive("m", m)?;
        check_positive("hbar", hbar)?;
        let p = omega2.scale(m);
        let q = gamma.scale(2.0);
        let r = gamma.mul(h).scale(hbar * m);
        let s = gamma.mul(f).scale(hbar);
        Self::new(m, hbar, p, q, r, s)
    }

    /// Restricts evaluation to `[t_min, t_max]` (intersected with the profiles' own range).
    pub fn with_domain(mut self, t_min: f64, t_max: f64) -> Result<Self> {
        let d = (self.domain.0.max(t_min), self.domain.1.min(t_max));
        if !(d.0 < d.1) {
            return Err(QbmError::InvalidParameter(format!(
                "domain [{t_min}, {t_max}] does not overlap the profile range"
            )));
        }
        self.domain = d;
        Ok(self)
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn p(&self) -> &TimeFn {
        &self.p
    }

    pub fn q(&self) -> &TimeFn {
        &self.q
    }

    pub fn r(&self) -> &TimeFn {
        &self.r
    }

    pub fn s(&self) -> &TimeFn {
        &self.s
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let (a, b) = self.domain;
        if t < a || t > b || t.is_nan() {
            return Err(QbmError::Domain {
                t,
                t_min: a,
                t_max: b,
            });
        }
        Ok(())
    }

    /// `(p, q, r, s)` at time `t`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64, f64, f64)> {
        self.check_time(t)?;
        Ok((
            self.p.eval(t),
            self.q.eval(t),
            self.r.eval(t),
            self.s.eval(t),
        ))
    }

    /// Values of all four profiles if every one of them is constant.
    pub fn constants(&self) -> Result<ConstantCoefficients> {
        let get = |f: &TimeFn, name| f.as_constant().ok_or(QbmError::NotConstant(name));
        Ok(ConstantCoefficients {
            m: self.m,
            hbar: self.hbar,
            p: get(&self.p, "p")?,
            q: get(&self.q, "q")?,
            r: get(&self.r, "r")?,
            s: get(&self.s, "s")?,
        })
    }

    /// `lambda = sqrt(4p - m q^2)` for constant coefficients.
    pub fn lambda_const(&self) -> Result<f64> {
        self.constants()?.lambda()
    }
}

impl fmt::Display for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "m={}, hbar={}, p={}, q={}, r={}, s={}",
            self.m, self.hbar, self.p, self.q, self.r, self.s
        )
    }
}

/// Plain numbers for the constant-coefficient case.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantCoefficients {
    pub m: f64,
    pub hbar: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl ConstantCoefficients {
    pub fn discriminant(&self) -> f64 {
        4.0 * self.p - self.m * self.q * self.q
    }

    pub fn lambda(&self) -> Result<f64> {
        let d = self.discriminant();
        if !(d > 0.0) {
            return Err(QbmError::Overdamped { discriminant: d });
        }
        Ok(d.sqrt())
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(QbmError::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )));
    }
    Ok(())
}
