//! Lie point symmetries of the master equation in the closed class
//!
//! ```text
//! X = xi_t d_t + xi_x(t) d_x + xi_y(t) d_y + (alpha(t) x + beta(t) y + gamma(t)) Z d_Z
//! ```
//!
//! with constant `xi_t`. Brackets are computed on the coefficient profiles,
//! never by differencing fields.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::coefficients::CoefficientSet;
use crate::error::{QbmError, Result};
use crate::fields::{sample2d, Field2D};
use crate::master_solver::Trajectory2D;
use crate::time_fn::TimeFn;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct PointGenerator {
    pub name: String,
    pub xi_t: f64,
    pub xi_x: TimeFn,
    pub xi_y: TimeFn,
    pub alpha: TimeFn,
    pub beta: TimeFn,
    pub gamma: TimeFn,
}

/// Coefficient values of a generator at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorValues {
    pub xi_t: f64,
    pub xi_x: f64,
    pub xi_y: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl GeneratorValues {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.xi_t, self.xi_x, self.xi_y, self.alpha, self.beta, self.gamma,
        ]
    }
}

impl PointGenerator {
    pub fn named(name: impl Into<String>) -> Self {
        PointGenerator {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn eval(&self, t: f64) -> GeneratorValues {
        GeneratorValues {
            xi_t: self.xi_t,
            xi_x: self.xi_x.eval(t),
            xi_y: self.xi_y.eval(t),
            alpha: self.alpha.eval(t),
            beta: self.beta.eval(t),
            gamma: self.gamma.eval(t),
        }
    }

    /// True when only the `Z d_Z` part is present.
    pub fn is_pure_z(&self) -> bool {
        self.xi_t == 0.0
            && self.xi_x.is_zero()
            && self.xi_y.is_zero()
            && self.alpha.is_zero()
            && self.beta.is_zero()
    }

    pub fn is_zero(&self) -> bool {
        self.is_pure_z() && self.gamma.is_zero()
    }

    fn has_spatial_or_z_part(&self) -> bool {
        !(self.xi_x.is_zero()
            && self.xi_y.is_zero()
            && self.alpha.is_zero()
            && self.beta.is_zero()
            && self.gamma.is_zero())
    }

    pub fn scale(&self, c: f64) -> PointGenerator {
        PointGenerator {
            name: format!("{c}*{}", self.name),
            xi_t: c * self.xi_t,
            xi_x: self.xi_x.scale(c),
            xi_y: self.xi_y.scale(c),
            alpha: self.alpha.scale(c),
            beta: self.beta.scale(c),
            gamma: self.gamma.scale(c),
        }
    }

    pub fn add(&self, other: &PointGenerator) -> PointGenerator {
        PointGenerator {
            name: format!("{}+{}", self.name, other.name),
            xi_t: self.xi_t + other.xi_t,
            xi_x: self.xi_x.add(&other.xi_x),
            xi_y: self.xi_y.add(&other.xi_y),
            alpha: self.alpha.add(&other.alpha),
            beta: self.beta.add(&other.beta),
            gamma: self.gamma.add(&other.gamma),
        }
    }
}

impl fmt::Display for PointGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: xi_t={}, xi_x={}, xi_y={}, alpha={}, beta={}, gamma={}",
            self.name, self.xi_t, self.xi_x, self.xi_y, self.alpha, self.beta, self.gamma
        )
    }
}

/// The six constant-coefficient generators, transcribed as printed.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantGenerators {
    pub lambda: f64,
    pub y1: PointGenerator,
    pub yz: PointGenerator,
    pub x1: PointGenerator,
    pub x2: PointGenerator,
    pub x3: PointGenerator,
    pub x4: PointGenerator,
}

impl ConstantGenerators {
    /// In the order `Y1, YZ, X1, X2, X3, X4`.
    pub fn all(&self) -> Vec<PointGenerator> {
        vec![
            self.y1.clone(),
            self.yz.clone(),
            self.x1.clone(),
            self.x2.clone(),
            self.x3.clone(),
            self.x4.clone(),
        ]
    }
}

/// Generators for constant `p, q, r, s` with `lambda = sqrt(4p - m q^2)`:
///
/// ```text
/// Y1 = d_t,  YZ = Z d_Z
/// X1 = e^{(l-q)t/2} [m(l-q) d_x + 2 d_y]
/// X2 = e^{-(l+q)t/2} [m(l+q) d_x - 2 d_y]
/// X3 = e^{-(l-q)t/2} [2rm(q-l) d_x + 4(r+sqm) d_y + (2mq(l-q) x + m^2 q (l^2-q^2) y) Z d_Z]
/// X4 = e^{(l+q)t/2} [2rm(l+q) d_x + (r+sqm) d_y + (-2mq(l+q) x + m^2 q (l^2-q^2) y) Z d_Z]
/// ```
pub fn constant_generators(cs: &CoefficientSet) -> Result<ConstantGenerators> {
    let c = cs.constants()?;
    let l = c.lambda()?;
    let (m, q, r, s) = (c.m, c.q, c.r, c.s);
    let e = |k: f64, coef: f64| TimeFn::exp(coef, k);

    let y1 = PointGenerator {
        xi_t: 1.0,
        ..PointGenerator::named("Y1")
    };
    let yz = PointGenerator {
        gamma: TimeFn::constant(1.0),
        ..PointGenerator::named("YZ")
    };

    let k1 = (l - q) / 2.0;
    let x1 = PointGenerator {
        xi_x: e(k1, m * (l - q)),
        xi_y: e(k1, 2.0),
        ..PointGenerator::named("X1")
    };

    let k2 = -(l + q) / 2.0;
    let x2 = PointGenerator {
        xi_x: e(k2, m * (l + q)),
        xi_y: e(k2, -2.0),
        ..PointGenerator::named("X2")
    };

    let k3 = -(l - q) / 2.0;
    let x3 = PointGenerator {
        xi_x: e(k3, 2.0 * r * m * (q - l)),
        xi_y: e(k3, 4.0 * (r + s * q * m)),
        alpha: e(k3, 2.0 * m * q * (l - q)),
        beta: e(k3, m * m * q * (l * l - q * q)),
        ..PointGenerator::named("X3")
    };

    let k4 = (l + q) / 2.0;
    let x4 = PointGenerator {
        xi_x: e(k4, 2.0 * r * m * (l + q)),
        xi_y: e(k4, r + s * q * m),
        alpha: e(k4, -2.0 * m * q * (l + q)),
        beta: e(k4, m * m * q * (l * l - q * q)),
        ..PointGenerator::named("X4")
    };

    Ok(ConstantGenerators {
        lambda: l,
        y1,
        yz,
        x1,
        x2,
        x3,
        x4,
    })
}

/// `xi_t^a * d/dt(f_b)`
fn transport(xi_t: f64, f: &TimeFn) -> TimeFn {
    if xi_t == 0.0 {
        TimeFn::zero()
    } else {
        f.derivative().scale(xi_t)
    }
}

/// `a(g_b)` evaluated on the gamma slot: `xi_t^a gamma_b' + xi_x^a alpha_b + xi_y^a beta_b`.
fn gamma_action(a: &PointGenerator, b: &PointGenerator) -> TimeFn {
    transport(a.xi_t, &b.gamma)
        .add(&a.xi_x.mul(&b.alpha))
        .add(&a.xi_y.mul(&b.beta))
}

/// Commutator `[a, b] = ab - ba`, closed form within the class.
pub fn lie_bracket(a: &PointGenerator, b: &PointGenerator) -> PointGenerator {
    let comp = |fa: &TimeFn, fb: &TimeFn| transport(a.xi_t, fb).sub(&transport(b.xi_t, fa));
    PointGenerator {
        name: format!("[{},{}]", a.name, b.name),
        xi_t: 0.0,
        xi_x: comp(&a.xi_x, &b.xi_x),
        xi_y: comp(&a.xi_y, &b.xi_y),
        alpha: comp(&a.alpha, &b.alpha),
        beta: comp(&a.beta, &b.beta),
        gamma: gamma_action(a, b).sub(&gamma_action(b, a)),
    }
}

/// Coefficients of the commutator of the characteristic operator
/// `Q = g - xi_t d_t - xi_x d_x - xi_y d_y` with the master-equation operator.
/// A generator in the class is a symmetry exactly when every component
/// vanishes for all `t`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct DeterminingDefect {
    /// Coefficient of `Z_xx`.
    pub d_xx: f64,
    /// Coefficient of `Z_xy`.
    pub d_xy: f64,
    /// Constant, x- and y-proportional parts of the `Z_x` coefficient.
    pub d_x: f64,
    pub d_x_x: f64,
    pub d_x_y: f64,
    /// Coefficient of `Z_y`.
    pub d_y: f64,
    /// Constant, x- and y-proportional parts of the `Z` coefficient.
    pub d_z: f64,
    pub d_z_x: f64,
    pub d_z_y: f64,
}

impl DeterminingDefect {
    pub fn max_abs(&self) -> f64 {
        [
            self.d_xx, self.d_xy, self.d_x, self.d_x_x, self.d_x_y, self.d_y, self.d_z, self.d_z_x,
            self.d_z_y,
        ]
        .iter()
        .fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn determining_defect(
    g: &PointGenerator,
    cs: &CoefficientSet,
    t: f64,
) -> Result<DeterminingDefect> {
    let (p, q, r, s) = cs.eval(t)?;
    let d = |f: &TimeFn| f.derivative().eval(t);
    let (dp, dq, dr, ds) = (d(cs.p()), d(cs.q()), d(cs.r()), d(cs.s()));
    let m = cs.m();
    let v = g.eval(t);
    let (a, b, al, be) = (v.xi_x, v.xi_y, v.alpha, v.beta);
    let xt = g.xi_t;
    Ok(DeterminingDefect {
        d_xx: xt * dr,
        d_xy: xt * ds,
        d_x: d(&g.xi_x) + 2.0 * r * al + s * be + p * b + q * a,
        d_x_x: xt * dq,
        d_x_y: xt * dp,
        d_y: d(&g.xi_y) + s * al - a / m,
        d_z: -d(&g.gamma) + xt * dq,
        d_z_x: -d(&g.alpha) - be / m + q * al,
        d_z_y: -d(&g.beta) + p * al,
    })
}

/// Fraction of the grid extent a pulled-back point may move.
pub const MAX_SHIFT_FRACTION: f64 = 0.1;

/// Applies the one-parameter flow of `g` with parameter `eps` to a solution.
///
/// For `xi_t = 0` the flow at fixed `t` is closed form: the new value at
/// `(x, y)` is `Z(t, x', y') exp(eps (alpha x' + beta y' + gamma) + eps^2 (alpha xi_x + beta xi_y) / 2)`
/// with `x' = x - eps xi_x(t)`, `y' = y - eps xi_y(t)`, sampled bicubically.
/// Pulled-back points that leave the grid read zero. A pure time
/// translation re-stamps snapshots (constant coefficients only).
pub fn push_forward(g: &PointGenerator, eps: f64, traj: &Trajectory2D) -> Result<Trajectory2D> {
    if eps == 0.0 {
        return Ok(traj.clone());
    }
    let cs = traj.coefficients();
    if g.xi_t != 0.0 {
        if g.has_spatial_or_z_part() {
            return Err(QbmError::Unsupported(
                "flows mixing time translation with other parts".into(),
            ));
        }
        cs.constants()?;
        let shift = eps * g.xi_t;
        let mut snaps = Vec::with_capacity(traj.snapshots().len());
        for f in traj.snapshots() {
            let t = f.t + shift;
            cs.check_time(t)?;
            snaps.push(Field2D { t, ..f.clone() });
        }
        return Trajectory2D::new(snaps, cs.clone());
    }

    let grid = traj.grid();
    let x_allowed = MAX_SHIFT_FRACTION * (grid.x.max() - grid.x.min());
    let y_allowed = MAX_SHIFT_FRACTION * (grid.y.max() - grid.y.min());
    for f in traj.snapshots() {
        let v = g.eval(f.t);
        for (axis, shift, allowed, extent) in [
            (
                "x",
                (eps * v.xi_x).abs(),
                x_allowed,
                grid.x.max() - grid.x.min(),
            ),
            (
                "y",
                (eps * v.xi_y).abs(),
                y_allowed,
                grid.y.max() - grid.y.min(),
            ),
        ] {
            if shift > allowed {
                return Err(QbmError::Coverage {
                    axis,
                    shift,
                    allowed,
                    required_margin: shift / MAX_SHIFT_FRACTION - extent,
                });
            }
        }
    }

    let xs = grid.x.coords();
    let ys = grid.y.coords();
    let mut snaps = Vec::with_capacity(traj.snapshots().len());
    for f in traj.snapshots() {
        let v = g.eval(f.t);
        let second = 0.5 * eps * eps * (v.alpha * v.xi_x + v.beta * v.xi_y);
        let mut out = Field2D::zeros(grid, f.t);
        for (i, x) in xs.iter().enumerate() {
            for (j, y) in ys.iter().enumerate() {
                let xp = x - eps * v.xi_x;
                let yp = y - eps * v.xi_y;
                let base = if grid.x.contains(xp) && grid.y.contains(yp) {
                    sample2d(f, xp, yp)?
                } else {
                    0.0
                };
                let factor = (eps * (v.alpha * xp + v.beta * yp + v.gamma) + second).exp();
                out.values[[i, j]] = base * factor;
            }
        }
        if out.values.iter().any(|z| !z.is_finite()) {
            return Err(QbmError::BlowUp { t: f.t });
        }
        snaps.push(out);
    }
    Trajectory2D::new(snaps, cs.clone())
}

#[derive(Clone, Debug, PartialEq)]
pub enum BracketStatus {
    /// The bracket vanishes identically.
    Zero,
    /// The bracket is a combination of the input generators.
    InSpan,
    /// A combination of the inputs plus a pure `gamma(t) Z d_Z` remainder.
    InSpanPlusZ {
        remainder: Vec<f64>,
        constant: bool,
    },
    Unresolved {
        residual: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    /// Expansion coefficients over the input generators.
    pub coefficients: Vec<f64>,
    /// Whether the bracket itself has only a `Z d_Z` part.
    pub pure_z: bool,
    pub status: BracketStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraTable {
    pub names: Vec<String>,
    pub sample_times: Vec<f64>,
    pub entries: Vec<BracketEntry>,
}

impl AlgebraTable {
    pub fn entry(&self, i: usize, j: usize) -> &BracketEntry {
        self.entries
            .iter()
            .find(|e| e.i == i && e.j == j)
            .expect("table covers all pairs")
    }

    pub fn unresolved(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(e.status, BracketStatus::Unresolved { .. }))
            .count()
    }

    /// Aligned text rendering: one line per bracket.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let width = self.names.iter().map(|n| n.len()).max().unwrap_or(1);
        for e in &self.entries {
            let lhs = format!(
                "[{:>w$}, {:>w$}]",
                self.names[e.i],
                self.names[e.j],
                w = width
            );
            let rhs = match &e.status {
                BracketStatus::Zero => "0".to_string(),
                BracketStatus::Unresolved { residual } => {
                    format!("unresolved (residual {residual:.3e})")
                }
                status => {
                    let mut terms: Vec<String> = e
                        .coefficients
                        .iter()
                        .zip(&self.names)
                        .filter(|(c, _)| **c != 0.0)
                        .map(|(c, n)| format!("{c:+.12e} {n}"))
                        .collect();
                    if let BracketStatus::InSpanPlusZ { constant, .. } = status {
                        terms.push(if *constant {
                            "+ const Z dZ".to_string()
                        } else {
                            "+ gamma(t) Z dZ".to_string()
                        });
                    }
                    terms.join(" ")
                }
            };
            let tag = if e.pure_z { "  [pure Z dZ]" } else { "" };
            out.push_str(&format!("{lhs} = {rhs}{tag}\n"));
        }
        out
    }
}

fn sample_vector(g: &PointGenerator, times: &[f64], with_gamma: bool) -> Vec<f64> {
    let mut v = vec![g.xi_t];
    for f in [&g.xi_x, &g.xi_y, &g.alpha, &g.beta] {
        v.extend(times.iter().map(|&t| f.eval(t)));
    }
    if with_gamma {
        v.extend(times.iter().map(|&t| g.gamma.eval(t)));
    }
    v
}

fn least_squares(columns: &[Vec<f64>], target: &[f64]) -> (Vec<f64>, f64) {
    let rows = target.len();
    let a = DMatrix::from_fn(rows, columns.len(), |r, c| columns[c][r]);
    let b = DVector::from_column_slice(target);
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(&b, 1e-12)
        .expect("SVD with both factors computed");
    let resid = (&a * &x - &b).amax();
    (x.iter().copied().collect(), resid)
}

/// Least squares that prefers a single column when one fits to `tol`, so a
/// bracket proportional to one input is reported as such even when the
/// inputs are linearly dependent. Round-off coefficients are zeroed.
fn sparse_fit(columns: &[Vec<f64>], target: &[f64], tol: f64) -> (Vec<f64>, f64) {
    let mut best: Option<(usize, f64, f64)> = None;
    for (k, col) in columns.iter().enumerate() {
        let nn: f64 = col.iter().map(|v| v * v).sum();
        if nn == 0.0 {
            continue;
        }
        let c = col.iter().zip(target).map(|(a, b)| a * b).sum::<f64>() / nn;
        let res = col
            .iter()
            .zip(target)
            .fold(0.0f64, |m, (a, b)| m.max((c * a - b).abs()));
        if res <= tol && best.is_none_or(|(_, _, r)| res < r) {
            best = Some((k, c, res));
        }
    }
    if let Some((k, c, res)) = best {
        let mut x = vec![0.0; columns.len()];
        x[k] = c;
        return (x, res);
    }
    let (mut x, res) = least_squares(columns, target);
    let big = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for v in &mut x {
        if v.abs() <= 1e-12 * big {
            *v = 0.0;
        }
    }
    (x, res)
}

/// Expresses every bracket `[g_i, g_j]`, `i < j`, in the span of the inputs,
/// allowing a pure `Z d_Z` remainder, by matching coefficient profiles at
/// `sample_times`.
pub fn algebra_table(gens: &[PointGenerator], sample_times: &[f64]) -> AlgebraTable {
    let full: Vec<Vec<f64>> = gens
        .iter()
        .map(|g| sample_vector(g, sample_times, true))
        .collect();
    let no_gamma: Vec<Vec<f64>> = gens
        .iter()
        .map(|g| sample_vector(g, sample_times, false))
        .collect();
    let mut entries = Vec::new();
    for i in 0..gens.len() {
        for j in i + 1..gens.len() {
            let br = lie_bracket(&gens[i], &gens[j]);
            let pure_z = br.is_pure_z();
            let target = sample_vector(&br, sample_times, true);
            let scale = target.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let tol = 1e-9 * scale;
            let (coefficients, status) = if target.iter().all(|v| *v == 0.0) {
                (vec![0.0; gens.len()], BracketStatus::Zero)
            } else {
                let (c, res) = sparse_fit(&full, &target, tol);
                if res <= tol {
                    (c, BracketStatus::InSpan)
                } else {
                    let partial = sample_vector(&br, sample_times, false);
                    let (c, res) = sparse_fit(&no_gamma, &partial, tol);
                    if res <= tol {
                        let remainder: Vec<f64> = sample_times
                            .iter()
                            .map(|&t| {
                                br.gamma.eval(t)
                                    - gens
                                        .iter()
                                        .zip(&c)
                                        .map(|(g, ci)| ci * g.gamma.eval(t))
                                        .sum::<f64>()
                            })
                            .collect();
                        let r0 = remainder[0];
                        let constant = remainder.iter().all(|r| (r - r0).abs() <= tol);
                        (
                            c,
                            BracketStatus::InSpanPlusZ {
                                remainder,
                                constant,
                            },
                        )
                    } else {
                        (c, BracketStatus::Unresolved { residual: res })
                    }
                }
            };
            entries.push(BracketEntry {
                i,
                j,
                coefficients,
                pure_z,
                status,
            });
        }
    }
    AlgebraTable {
        names: gens.iter().map(|g| g.name.clone()).collect(),
        sample_times: sample_times.to_vec(),
        entries,
    }
}

/// Evenly spaced sample times on `[t0, t1]`.
pub fn sample_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| t0 + (t1 - t0) * k as f64 / (n - 1).max(1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{gaussian2d, Gaussian2D, Grid2D};
    use crate::master_solver::{evolve, residual2d, SolverConfig};
    use crate::time_fn::QuasiPoly;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cs(m: f64, p: f64, q: f64, r: f64, s: f64) -> CoefficientSet {
        CoefficientSet::constant(m, p, q, r, s).unwrap()
    }

    fn assert_profile(f: &TimeFn, expect: impl Fn(f64) -> f64) {
        for &t in &[0.0, 0.37, 1.0, 2.5] {
            assert_relative_eq!(f.eval(t), expect(t), max_relative = 1e-14, epsilon = 1e-300);
        }
    }

    #[test]
    fn generator_examples_for_unit_oscillator() {
        let g = constant_generators(&cs(1.0, 1.0, 0.0, 0.3, 0.2)).unwrap();
        assert_eq!(g.lambda, 2.0);
        assert_profile(&g.x1.xi_x, |t| 2.0 * t.exp());
        assert_profile(&g.x1.xi_y, |t| 2.0 * t.exp());
        assert_profile(&g.x2.xi_x, |t| 2.0 * (-t).exp());
        assert_profile(&g.x2.xi_y, |t| -2.0 * (-t).exp());
        assert!(g.x1.alpha.is_zero() && g.x1.gamma.is_zero());
        assert_eq!(g.yz.xi_t, 0.0);
        assert!(
            g.yz.xi_x.is_zero()
                && g.yz.xi_y.is_zero()
                && g.yz.alpha.is_zero()
                && g.yz.beta.is_zero()
        );
        assert_eq!(g.yz.gamma.as_constant(), Some(1.0));
        assert_eq!(g.y1.xi_t, 1.0);
    }

    #[test]
    fn x3_x4_match_printed_expressions() {
        let (m, p, q, r, s) = (1.3, 2.0, 0.4, 0.07, 0.11);
        let g = constant_generators(&cs(m, p, q, r, s)).unwrap();
        let l = (4.0 * p - m * q * q).sqrt();
        for &t in &[0.0, 0.8] {
            let e3 = (-(l - q) / 2.0 * t).exp();
            let v = g.x3.eval(t);
            assert_relative_eq!(v.xi_x, e3 * 2.0 * r * m * (q - l), max_relative = 1e-14);
            assert_relative_eq!(v.xi_y, e3 * 4.0 * (r + s * q * m), max_relative = 1e-14);
            assert_relative_eq!(v.alpha, e3 * 2.0 * m * q * (l - q), max_relative = 1e-14);
            assert_relative_eq!(
                v.beta,
                e3 * m * m * q * (l * l - q * q),
                max_relative = 1e-14
            );
            assert_eq!(v.gamma, 0.0);

            let e4 = ((l + q) / 2.0 * t).exp();
            let v = g.x4.eval(t);
            assert_relative_eq!(v.xi_x, e4 * 2.0 * r * m * (l + q), max_relative = 1e-14);
            assert_relative_eq!(v.xi_y, e4 * (r + s * q * m), max_relative = 1e-14);
            assert_relative_eq!(v.alpha, e4 * -2.0 * m * q * (l + q), max_relative = 1e-14);
            assert_relative_eq!(
                v.beta,
                e4 * m * m * q * (l * l - q * q),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn overdamped_coefficients_have_no_generators() {
        assert!(matches!(
            constant_generators(&cs(4.0, 1.0, 1.0, 0.1, 0.1)),
            Err(QbmError::Overdamped { .. })
        ));
    }

    #[test]
    fn bracket_examples() {
        let g = constant_generators(&cs(1.0, 1.5, 0.3, 0.05, 0.02)).unwrap();
        let l = g.lambda;
        assert!(lie_bracket(&g.yz, &g.x1).is_zero());
        assert!(lie_bracket(&g.x1, &g.x2).is_zero());

        let b = lie_bracket(&g.y1, &g.x1);
        let rate = (l - 0.3) / 2.0;
        for &t in &[0.0, 0.5, 1.0] {
            assert_relative_eq!(
                b.xi_x.eval(t),
                rate * g.x1.xi_x.eval(t),
                max_relative = 1e-14
            );
            assert_relative_eq!(
                b.xi_y.eval(t),
                rate * g.x1.xi_y.eval(t),
                max_relative = 1e-14
            );
        }

        let b13 = lie_bracket(&g.x1, &g.x3);
        assert!(b13.is_pure_z());
        assert!(
            b13.xi_x.is_zero() && b13.xi_y.is_zero() && b13.alpha.is_zero() && b13.beta.is_zero()
        );
        // Hand expansion: gamma = xi_x^1 alpha^3 + xi_y^1 beta^3 = 4 m^2 q lambda (lambda - q), constant.
        let (m, q) = (1.0, 0.3);
        assert_relative_eq!(
            b13.gamma.as_constant().unwrap(),
            4.0 * m * m * q * l * (l - q),
            max_relative = 1e-13
        );
    }

    #[test]
    fn determining_defects_of_printed_generators() {
        let c = cs(1.0, 1.0, 0.0, 0.05, 0.02);
        let g = constant_generators(&c).unwrap();
        for t in [0.0, 0.5] {
            assert_eq!(determining_defect(&g.y1, &c, t).unwrap().max_abs(), 0.0);
            assert_eq!(determining_defect(&g.yz, &c, t).unwrap().max_abs(), 0.0);
            // With q = 0, m = 1, p = 1: X1 = e^t (2 d_x + 2 d_y) leaves
            // xi_x' + p xi_y + q xi_x = 4 e^t in the Z_x coefficient.
            let d = determining_defect(&g.x1, &c, t).unwrap();
            assert_relative_eq!(d.d_x, 4.0 * t.exp(), max_relative = 1e-14);
            assert_eq!(d.d_y, 0.0);
        }
        // The oscillator's phase-space translation along the classical flow is a symmetry.
        let osc = PointGenerator {
            xi_x: QuasiPoly::cos(1.0, 1.0).into(),
            xi_y: QuasiPoly::sin(1.0, 1.0).into(),
            ..PointGenerator::named("osc")
        };
        for t in [0.0, 0.3, 1.1] {
            assert!(determining_defect(&osc, &c, t).unwrap().max_abs() < 1e-15);
        }
    }

    fn random_generator(seed: &[f64; 12], name: &str) -> PointGenerator {
        let qp =
            |a: f64, k: f64| TimeFn::from(QuasiPoly::exp(a, k).add(&QuasiPoly::monomial(a * k, 1)));
        PointGenerator {
            name: name.into(),
            xi_t: seed[0],
            xi_x: qp(seed[1], seed[2]),
            xi_y: qp(seed[3], seed[4]),
            alpha: qp(seed[5], seed[6]),
            beta: QuasiPoly::cos(seed[7], seed[8]).into(),
            gamma: qp(seed[9], seed[10]).add(&TimeFn::constant(seed[11])),
        }
    }

    proptest! {
        #[test]
        fn bracket_is_antisymmetric_exactly(
            a in proptest::array::uniform12(-2.0f64..2.0),
            b in proptest::array::uniform12(-2.0f64..2.0),
        ) {
            let (ga, gb) = (random_generator(&a, "a"), random_generator(&b, "b"));
            let ab = lie_bracket(&ga, &gb);
            let ba = lie_bracket(&gb, &ga);
            for t in sample_times(0.0, 1.0, 7) {
                let (u, v) = (ab.eval(t).as_array(), ba.eval(t).as_array());
                for k in 0..6 {
                    prop_assert_eq!(u[k], -v[k]);
                }
            }
        }

        #[test]
        fn jacobi_identity(
            a in proptest::array::uniform12(-1.0f64..1.0),
            b in proptest::array::uniform12(-1.0f64..1.0),
            c in proptest::array::uniform12(-1.0f64..1.0),
        ) {
            let (ga, gb, gc) = (random_generator(&a, "a"), random_generator(&b, "b"), random_generator(&c, "c"));
            let j1 = lie_bracket(&lie_bracket(&ga, &gb), &gc);
            let j2 = lie_bracket(&lie_bracket(&gb, &gc), &ga);
            let j3 = lie_bracket(&lie_bracket(&gc, &ga), &gb);
            for t in sample_times(0.0, 1.0, 20) {
                let (u, v, w) = (j1.eval(t).as_array(), j2.eval(t).as_array(), j3.eval(t).as_array());
                for k in 0..6 {
                    let scale = 1.0 + u[k].abs() + v[k].abs() + w[k].abs();
                    prop_assert!((u[k] + v[k] + w[k]).abs() <= 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn table_over_yz_alone_is_empty_and_abelian() {
        let g = constant_generators(&cs(1.0, 1.0, 0.0, 0.05, 0.02)).unwrap();
        let t = algebra_table(std::slice::from_ref(&g.yz), &sample_times(0.0, 1.0, 5));
        assert!(t.entries.is_empty());
        let t = algebra_table(&[g.yz.clone(), g.yz.scale(2.0)], &sample_times(0.0, 1.0, 5));
        assert_eq!(t.entry(0, 1).status, BracketStatus::Zero);
    }

    #[test]
    fn table_resolves_weyl_heisenberg_pattern() {
        let c = cs(1.0, 1.0, 0.2, 0.05, 0.02);
        let g = constant_generators(&c).unwrap();
        let gens = g.all();
        let table = algebra_table(&gens, &sample_times(0.0, 1.0, 9));
        // indices: 0 Y1, 1 YZ, 2 X1, 3 X2, 4 X3, 5 X4
        for i in 2..6 {
            for j in i + 1..6 {
                assert!(table.entry(i, j).pure_z, "[{i},{j}]");
            }
        }
        let e = table.entry(2, 4);
        assert_eq!(e.status, BracketStatus::InSpan);
        assert!(e.coefficients[1].abs() > 0.0);
        let l = g.lambda;
        for (k, rate) in [
            (2, (l - 0.2) / 2.0),
            (3, -(l + 0.2) / 2.0),
            (4, -(l - 0.2) / 2.0),
            (5, (l + 0.2) / 2.0),
        ] {
            let e = table.entry(0, k);
            assert_eq!(e.status, BracketStatus::InSpan);
            assert_relative_eq!(e.coefficients[k], rate, epsilon = 1e-10);
        }
        assert!(table.to_text().contains("[Y1, X1]"));
    }

    fn evolved(n: usize) -> Trajectory2D {
        evolved_with(n, 0.01, 5)
    }

    fn evolved_with(n: usize, dt: f64, stride: usize) -> Trajectory2D {
        let grid = Grid2D::square(-6.0, 6.0, n).unwrap();
        let f0 = gaussian2d(
            grid,
            &Gaussian2D {
                x0: 0.0,
                y0: 0.0,
                sx: 1.0,
                sy: 1.0,
                rho: 0.0,
                amp: 1.0,
            },
        )
        .unwrap();
        let c = cs(1.0, 1.0, 0.0, 0.05, 0.02);
        evolve(
            &f0,
            &c,
            &SolverConfig {
                dt,
                t_end: 0.3,
                snapshot_stride: stride,
                cfl_safety: 0.4,
            },
        )
        .unwrap()
    }

    #[test]
    fn push_forward_identity_and_scaling() {
        let traj = evolved(41);
        let g = constant_generators(traj.coefficients()).unwrap();
        assert_eq!(push_forward(&g.x1, 0.0, &traj).unwrap(), traj);
        let scaled = push_forward(&g.yz, 0.3, &traj).unwrap();
        for (a, b) in traj.snapshots().iter().zip(scaled.snapshots()) {
            for (u, v) in a.values.iter().zip(b.values.iter()) {
                assert!((v - u * 0.3f64.exp()).abs() <= 1e-15 * u.abs().max(1e-300) * 4.0);
            }
        }
        let shifted = push_forward(&g.y1, 0.25, &traj).unwrap();
        assert_eq!(shifted.times()[0], 0.25);
    }

    #[test]
    fn push_forward_reports_coverage() {
        let traj = evolved(41);
        let g = constant_generators(traj.coefficients()).unwrap();
        match push_forward(&g.x1, 2.0, &traj) {
            Err(QbmError::Coverage {
                required_margin, ..
            }) => assert!(required_margin > 0.0),
            other => panic!("expected coverage error, got {other:?}"),
        }
    }

    #[test]
    fn flows_compose() {
        let traj = evolved(61);
        let osc = PointGenerator {
            xi_x: QuasiPoly::cos(1.0, 1.0).into(),
            xi_y: QuasiPoly::sin(1.0, 1.0).into(),
            alpha: TimeFn::constant(0.0),
            gamma: TimeFn::constant(0.2),
            ..PointGenerator::named("osc")
        };
        let twice = push_forward(&osc, 0.1, &push_forward(&osc, 0.15, &traj).unwrap()).unwrap();
        let once = push_forward(&osc, 0.25, &traj).unwrap();
        let diff = twice
            .snapshots()
            .iter()
            .zip(once.snapshots())
            .map(|(a, b)| {
                (&a.values - &b.values)
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()))
            })
            .fold(0.0f64, f64::max);
        assert!(diff < 2e-3, "diff {diff}");
    }

    #[test]
    fn true_symmetry_residual_excess_is_second_order() {
        let osc = PointGenerator {
            xi_x: QuasiPoly::cos(1.0, 1.0).into(),
            xi_y: QuasiPoly::sin(1.0, 1.0).into(),
            ..PointGenerator::named("osc")
        };
        let excess = |n: usize| {
            let traj = evolved_with(n, 1e-3, 10);
            let moved = push_forward(&osc, 0.3, &traj).unwrap();
            residual2d(&moved).unwrap() - residual2d(&traj).unwrap()
        };
        let ratio = excess(61) / excess(121);
        assert!((3.2..4.8).contains(&ratio), "ratio {ratio}");
    }
}
