//! Point symmetries of the rescaled reduced equation
//! `U_T = U_vv - v R U_v + q U`:
//!
//! ```text
//! Y = alpha d_T + (alpha' v / 2 + beta) d_v + F(T, v) U d_U
//! F = phi + (2 v beta R + v^2 R alpha' - 2 v beta' + v^2 alpha R' - v^2 alpha'' / 2) / 4
//! beta'' = (R' + R^2) beta
//! alpha''' = 4 alpha' (R' + R^2) + 2 alpha (R' + R^2)'
//! ```
//!
//! The printed formula for `phi` has unbalanced parentheses; both readings
//! are built and judged by whether the induced map sends numerical
//! solutions to numerical solutions.

use ndarray::Array1;
use num_complex::Complex64;

use super::{
    convergence_order, residual1d_with_margin, rhs1d, solve_reduced, ReducedCoefficients,
    Trajectory1D, Verdict,
};
use crate::error::{QbmError, Result};
use crate::fields::{Field1D, Grid1D};
use crate::master_solver::SolverConfig;
use crate::ode::{self, OdeSolution};
use crate::time_fn::TimeFn;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhiReading {
    /// `phi0 + alpha (q + R/2) - alpha'/4`
    Linear,
    /// `phi0 + alpha (q + R/2) - alpha alpha'/4`
    Product,
}

impl PhiReading {
    pub const ALL: [PhiReading; 2] = [PhiReading::Linear, PhiReading::Product];

    pub fn as_str(&self) -> &'static str {
        match self {
            PhiReading::Linear => "phi0 + alpha*(q + R/2) - alpha'/4",
            PhiReading::Product => "phi0 + alpha*(q + R/2) - alpha*alpha'/4",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSymmetry {
    pub alpha: TimeFn,
    pub beta: TimeFn,
    pub phi0: f64,
}

/// Values of `alpha, beta` and their derivatives at one time.
struct Jet {
    a: f64,
    da: f64,
    dda: f64,
    b: f64,
    db: f64,
    q: f64,
    r: f64,
    dr: f64,
}

impl ReducedSymmetry {
    fn jet(&self, rc: &ReducedCoefficients, t: f64) -> Jet {
        let da = self.alpha.derivative();
        Jet {
            a: self.alpha.eval(t),
            da: da.eval(t),
            dda: da.derivative().eval(t),
            b: self.beta.eval(t),
            db: self.beta.derivative().eval(t),
            q: rc.reaction.eval(t),
            r: rc.drift.eval(t),
            dr: rc.drift.derivative().eval(t),
        }
    }

    fn phi_of(&self, j: &Jet, reading: PhiReading) -> f64 {
        let base = self.phi0 + j.a * (j.q + 0.5 * j.r);
        match reading {
            PhiReading::Linear => base - 0.25 * j.da,
            PhiReading::Product => base - 0.25 * j.a * j.da,
        }
    }

    fn f_of(&self, j: &Jet, reading: PhiReading, v: f64) -> f64 {
        self.phi_of(j, reading)
            + 0.25
                * (2.0 * v * j.b * j.r + v * v * j.r * j.da - 2.0 * v * j.db + v * v * j.a * j.dr
                    - 0.5 * v * v * j.dda)
    }

    pub fn phi(&self, rc: &ReducedCoefficients, reading: PhiReading, t: f64) -> f64 {
        self.phi_of(&self.jet(rc, t), reading)
    }

    pub fn f(&self, rc: &ReducedCoefficients, reading: PhiReading, t: f64, v: f64) -> f64 {
        self.f_of(&self.jet(rc, t), reading, v)
    }

    /// `alpha' v / 2 + beta`
    pub fn xi_v(&self, t: f64, v: f64) -> f64 {
        0.5 * self.alpha.derivative().eval(t) * v + self.beta.eval(t)
    }
}

/// Largest substitution residuals of the `beta` and `alpha` equations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileResiduals {
    pub beta_eq: f64,
    pub alpha_eq: f64,
}

pub fn check_symmetry_profiles(
    rs: &ReducedSymmetry,
    rc: &ReducedCoefficients,
    times: &[f64],
) -> ProfileResiduals {
    let r = &rc.drift;
    let omega = r.derivative().add(&r.mul(r));
    let domega = omega.derivative();
    let (a1, a3) = (
        rs.alpha.derivative(),
        rs.alpha.derivative().derivative().derivative(),
    );
    let b2 = rs.beta.derivative().derivative();
    let mut out = ProfileResiduals {
        beta_eq: 0.0,
        alpha_eq: 0.0,
    };
    for &t in times {
        let w = omega.eval(t);
        out.beta_eq = out.beta_eq.max((b2.eval(t) - w * rs.beta.eval(t)).abs());
        let lhs = a3.eval(t);
        let rhs = 4.0 * a1.eval(t) * w + 2.0 * rs.alpha.eval(t) * domega.eval(t);
        out.alpha_eq = out.alpha_eq.max((lhs - rhs).abs());
    }
    out
}

/// `F U - alpha U_T - (alpha' v/2 + beta) U_v` for each snapshot, with `U_T`
/// taken from the discrete right-hand side. End nodes are set to zero.
pub fn apply_characteristic(
    rs: &ReducedSymmetry,
    rc: &ReducedCoefficients,
    reading: PhiReading,
    traj: &Trajectory1D,
) -> Result<Trajectory1D> {
    let grid = traj.grid();
    let n = grid.n();
    let h = grid.spacing();
    let vs = grid.coords();
    let mut snaps = Vec::with_capacity(traj.snapshots().len());
    for u in traj.snapshots() {
        let t = u.t;
        let j = rs.jet(rc, t);
        let (s, r, qt) = rc.eval(t);
        let ut = rhs1d(&u.values, &grid, s, r, qt);
        let mut out = Array1::from_elem(n, Complex64::new(0.0, 0.0));
        for i in 1..n - 1 {
            let v = vs[i];
            let uv = (u.values[i + 1] - u.values[i - 1]) / (2.0 * h);
            let xi = 0.5 * j.da * v + j.b;
            out[i] = u.values[i] * rs.f_of(&j, reading, v) - ut[i] * j.a - uv * xi;
        }
        snaps.push(Field1D::new(grid, t, out)?);
    }
    Trajectory1D::new(snaps)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedSymmetrySetup {
    pub grid: Grid1D,
    /// Width of the Gaussian initial profile.
    pub sigma: f64,
    pub config: SolverConfig,
}

impl ReducedSymmetrySetup {
    fn refined(&self) -> ReducedSymmetrySetup {
        ReducedSymmetrySetup {
            grid: self.grid.refined(),
            sigma: self.sigma,
            config: SolverConfig {
                dt: self.config.dt / 4.0,
                snapshot_stride: self.config.snapshot_stride * 2,
                ..self.config
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReadingVerdict {
    pub reading: PhiReading,
    /// Residual of the transformed solution, coarse then fine.
    pub residuals: [f64; 2],
    /// Transformed over untransformed residual on each level.
    pub ratios: [f64; 2],
    pub order: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSymmetryReport {
    pub profiles: ProfileResiduals,
    pub original_residuals: [f64; 2],
    pub readings: Vec<ReadingVerdict>,
    /// Readings whose transformed residual converges.
    pub preserving: Vec<PhiReading>,
    pub verdict: Verdict,
}

const PROFILE_TOLERANCE: f64 = 1e-8;

/// Transforms a numerical solution of the rescaled reduced equation with
/// each reading of `phi` and measures the residual under refinement.
pub fn reduced_symmetry(
    rs: &ReducedSymmetry,
    rc: &ReducedCoefficients,
    setup: &ReducedSymmetrySetup,
) -> Result<ReducedSymmetryReport> {
    let t_end = setup.config.t_end;
    let probe: Vec<f64> = (0..=16).map(|k| t_end * k as f64 / 16.0).collect();
    for &t in &probe {
        let s = rc.diffusion.eval(t);
        if (s - 1.0).abs() > 1e-12 {
            return Err(QbmError::InvalidParameter(format!(
                "the rescaled equation has unit diffusion; S = {s} at T = {t}"
            )));
        }
    }
    let profiles = check_symmetry_profiles(rs, rc, &probe);
    if profiles.alpha_eq > PROFILE_TOLERANCE || profiles.beta_eq > PROFILE_TOLERANCE {
        return Err(QbmError::InvalidParameter(format!(
            "alpha or beta do not solve their equations (residuals {:.3e}, {:.3e})",
            profiles.alpha_eq, profiles.beta_eq
        )));
    }

    let levels = [*setup, setup.refined()];
    let mut original = [0.0; 2];
    let mut transformed = [[0.0; 2]; 2];
    for (l, lv) in levels.iter().enumerate() {
        let sig2 = lv.sigma * lv.sigma;
        let u0 = Field1D::from_fn(lv.grid, 0.0, |v| {
            Complex64::new((-v * v / (2.0 * sig2)).exp(), 0.0)
        })?;
        let traj = solve_reduced(&u0, rc, &lv.config)?;
        original[l] = residual1d_with_margin(&traj, rc, 2)?;
        for (k, reading) in PhiReading::ALL.iter().enumerate() {
            let moved = apply_characteristic(rs, rc, *reading, &traj)?;
            transformed[k][l] = residual1d_with_margin(&moved, rc, 2)?;
        }
    }
    let readings: Vec<ReadingVerdict> = PhiReading::ALL
        .iter()
        .enumerate()
        .map(|(k, reading)| {
            let res = transformed[k];
            let order = convergence_order(res[0], res[1]);
            ReadingVerdict {
                reading: *reading,
                residuals: res,
                ratios: [res[0] / original[0], res[1] / original[1]],
                order,
                verdict: Verdict::from_order(order),
            }
        })
        .collect();
    let preserving: Vec<PhiReading> = readings
        .iter()
        .filter(|r| r.verdict == Verdict::Converged)
        .map(|r| r.reading)
        .collect();
    let verdict = if preserving.is_empty() {
        Verdict::Defect
    } else {
        Verdict::Converged
    };
    Ok(ReducedSymmetryReport {
        profiles,
        original_residuals: original,
        readings,
        preserving,
        verdict,
    })
}

fn integral(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        quadrature::integrate(f, a, b, 1e-14).integral
    }
}

/// `beta0 L + beta1 L integral_0^T L^-2` with `L = exp(integral_0^T R)`.
pub fn riccati_beta(r: &TimeFn, beta0: f64, beta1: f64, t: f64) -> f64 {
    let log_l = |u: f64| integral(|s| r.eval(s), 0.0, u);
    let l = log_l(t).exp();
    let inv_sq = integral(|u| (-2.0 * log_l(u)).exp(), 0.0, t);
    l * (beta0 + beta1 * inv_sq)
}

/// RK4 solution of `beta'' = (R' + R^2) beta` with the data of
/// [`riccati_beta`]: `beta(0) = beta0`, `beta'(0) = R(0) beta0 + beta1`.
pub fn beta_numeric(r: &TimeFn, beta0: f64, beta1: f64, t1: f64, dt: f64) -> Result<OdeSolution> {
    if !(dt > 0.0) {
        return Err(QbmError::InvalidParameter(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let omega = r.derivative().add(&r.mul(r));
    let y0 = [beta0, r.eval(0.0) * beta0 + beta1];
    ode::integrate(
        |t, y| vec![y[1], omega.eval(t) * y[0]],
        &y0,
        0.0,
        t1,
        dt,
        |t, y| {
            if y.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(QbmError::BlowUp { t })
            }
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time_fn::QuasiPoly;
    use approx::assert_relative_eq;

    fn rc(r: f64, q: f64) -> ReducedCoefficients {
        ReducedCoefficients::new(
            TimeFn::constant(1.0),
            TimeFn::constant(r),
            TimeFn::constant(q),
        )
    }

    #[test]
    fn scaling_generator_has_unit_f() {
        let rs = ReducedSymmetry {
            alpha: TimeFn::zero(),
            beta: TimeFn::zero(),
            phi0: 1.0,
        };
        let c = rc(0.5, 0.3);
        for reading in PhiReading::ALL {
            for (t, v) in [(0.0, 0.0), (0.4, 2.0), (1.0, -3.0)] {
                assert_eq!(rs.f(&c, reading, t, v), 1.0);
            }
        }
    }

    #[test]
    fn free_beta_is_linear() {
        for t in [0.0, 0.3, 1.0] {
            assert_relative_eq!(
                riccati_beta(&TimeFn::zero(), 1.5, -0.5, t),
                1.5 - 0.5 * t,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn constant_drift_beta_matches_exponentials() {
        // beta0 e^{cT} + (beta1 / 2c)(e^{cT} - e^{-cT}); the printed form
        // beta0 e^{cT} - (beta1 / 2c) e^{-cT} differs by a multiple of e^{cT}.
        let c = 0.5;
        for t in [0.0f64, 0.4, 1.0] {
            let want = 1.2 * (c * t).exp() + 0.7 / (2.0 * c) * ((c * t).exp() - (-c * t).exp());
            assert_relative_eq!(
                riccati_beta(&TimeFn::constant(c), 1.2, 0.7, t),
                want,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn riccati_matches_numeric_for_time_dependent_drift() {
        let r: TimeFn = QuasiPoly::sin(0.8, 2.0)
            .add(&QuasiPoly::constant(0.3))
            .into();
        let sol = beta_numeric(&r, 0.9, -0.4, 1.0, 1e-3).unwrap();
        for (t, y) in sol.times.iter().zip(&sol.states).step_by(50) {
            assert!((y[0] - riccati_beta(&r, 0.9, -0.4, *t)).abs() < 1e-9);
        }
    }

    #[test]
    fn profile_check_flags_wrong_alpha() {
        let c = rc(0.5, 0.3);
        let good = ReducedSymmetry {
            alpha: TimeFn::constant(1.0).add(&TimeFn::exp(0.5, 1.0)),
            beta: TimeFn::exp(1.0, 0.5),
            phi0: 0.0,
        };
        let p = check_symmetry_profiles(&good, &c, &[0.0, 0.5, 1.0]);
        assert!(p.alpha_eq < 1e-12 && p.beta_eq < 1e-12);
        let bad = ReducedSymmetry {
            alpha: TimeFn::exp(1.0, 0.7),
            ..good
        };
        assert!(check_symmetry_profiles(&bad, &c, &[0.5]).alpha_eq > 1e-3);
    }

    fn setup(n: usize) -> ReducedSymmetrySetup {
        let grid = Grid1D::new(-8.0, 8.0, n).unwrap();
        let h = grid.spacing();
        ReducedSymmetrySetup {
            grid,
            sigma: 1.0,
            config: SolverConfig {
                dt: 0.1 * h * h,
                t_end: 0.5,
                snapshot_stride: 5,
                cfl_safety: 0.4,
            },
        }
    }

    #[test]
    fn linear_reading_preserves_solutions() {
        let c = rc(0.5, 0.3);
        let rs = ReducedSymmetry {
            alpha: TimeFn::constant(1.0).add(&TimeFn::exp(0.5, 1.0)),
            beta: TimeFn::exp(1.0, 0.5),
            phi0: 0.2,
        };
        let report = reduced_symmetry(&rs, &c, &setup(81)).unwrap();
        assert_eq!(report.preserving, vec![PhiReading::Linear], "{report:?}");
        assert_eq!(report.verdict, Verdict::Converged);
    }

    #[test]
    fn unit_diffusion_is_required() {
        let c = ReducedCoefficients::new(TimeFn::constant(2.0), TimeFn::zero(), TimeFn::zero());
        let rs = ReducedSymmetry {
            alpha: TimeFn::zero(),
            beta: TimeFn::zero(),
            phi0: 1.0,
        };
        assert!(matches!(
            reduced_symmetry(&rs, &c, &setup(41)),
            Err(QbmError::InvalidParameter(_))
        ));
    }
}
