//! Invariant reduction of the master equation to one space dimension.
//!
//! For constant coefficients the solution is sought as `Z = U(t, w)` with
//! the affine invariant `w = y - 2x / (m (lambda - q))`, and `U` solves
//!
//! ```text
//! U_t = S U_ww - w R U_w + qt U
//! ```
//!
//! The printed constant-coefficient coefficients are used verbatim; the
//! residual of the reconstructed 2D field under refinement decides whether
//! they are consistent.

mod reduced_symmetry;
mod schrodinger;

pub use reduced_symmetry::{
    apply_characteristic, beta_numeric, check_symmetry_profiles, reduced_symmetry, riccati_beta,
    PhiReading, ProfileResiduals, ReadingVerdict, ReducedSymmetry, ReducedSymmetryReport,
    ReducedSymmetrySetup,
};
pub use schrodinger::{
    free_schrodinger, map_coordinates, reduced_residual, schrodinger_map, verify_roundtrip,
    FreeWave, RoundtripLevel, RoundtripReport, RoundtripWindow,
};

use ndarray::Array1;
use num_complex::Complex64;

use crate::coefficients::CoefficientSet;
use crate::error::{QbmError, Result};
use crate::fields::{Field1D, Field2D, Grid1D, Grid2D};
use crate::master_solver::{residual2d, step_plan, uniform_spacing, SolverConfig, Trajectory2D};
use crate::time_fn::TimeFn;

/// Lowest measured convergence order accepted as "the residual vanishes".
pub const MIN_ORDER: f64 = 1.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    Defect,
}

impl Verdict {
    pub fn from_order(order: f64) -> Verdict {
        if order >= MIN_ORDER {
            Verdict::Converged
        } else {
            Verdict::Defect
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::Defect => "defect",
        }
    }
}

/// `log2(coarse / fine)`; zero residuals on both levels count as converged.
pub fn convergence_order(coarse: f64, fine: f64) -> f64 {
    if coarse == 0.0 && fine == 0.0 {
        f64::INFINITY
    } else {
        (coarse / fine).log2()
    }
}

fn lambda_minus_q(cs: &CoefficientSet) -> Result<(f64, f64, f64)> {
    let c = cs.constants()?;
    let l = c.lambda()?;
    let d = l - c.q;
    if d.abs() <= 1e-12 * l.abs().max(1.0) {
        return Err(QbmError::DegenerateReduction(format!(
            "lambda = q = {}",
            c.q
        )));
    }
    Ok((l, c.q, d))
}

/// `(y m (lambda - q) - 2x) / (m (lambda - q))`
pub fn invariant_w(cs: &CoefficientSet, t: f64, x: f64, y: f64) -> Result<f64> {
    cs.check_time(t)?;
    let (_, _, d) = lambda_minus_q(cs)?;
    let m = cs.m();
    Ok((y * m * d - 2.0 * x) / (m * d))
}

/// Gradient `(w_x, w_y)` of the invariant.
pub fn invariant_gradient(cs: &CoefficientSet) -> Result<(f64, f64)> {
    let (_, _, d) = lambda_minus_q(cs)?;
    Ok((-2.0 / (cs.m() * d), 1.0))
}

/// Coefficients of `U_t = S U_ww - w R U_w + qt U`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedCoefficients {
    /// `S`
    pub diffusion: TimeFn,
    /// `R`
    pub drift: TimeFn,
    /// `qt`
    pub reaction: TimeFn,
}

impl ReducedCoefficients {
    pub fn new(diffusion: TimeFn, drift: TimeFn, reaction: TimeFn) -> Self {
        ReducedCoefficients {
            diffusion,
            drift,
            reaction,
        }
    }

    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        (
            self.diffusion.eval(t),
            self.drift.eval(t),
            self.reaction.eval(t),
        )
    }

    /// True when the diffusion is identically zero.
    pub fn degenerate_diffusion(&self) -> bool {
        self.diffusion.is_zero()
    }
}

/// `S = 2(-2r + s m (lambda - q)) / (m^2 (lambda - q)^2)`, `R = (lambda + q)/2`, `qt = 2q`.
pub fn reduced_from_constants(cs: &CoefficientSet) -> Result<ReducedCoefficients> {
    let (l, q, d) = lambda_minus_q(cs)?;
    let c = cs.constants()?;
    let m = c.m;
    let s_bar = 2.0 * (-2.0 * c.r + c.s * m * d) / (m * m * d * d);
    Ok(ReducedCoefficients::new(
        TimeFn::constant(s_bar),
        TimeFn::constant((l + q) / 2.0),
        TimeFn::constant(2.0 * q),
    ))
}

/// What substituting `Z = U(t, w)` into the master equation actually
/// produces, next to the printed reduced coefficients. `x_mismatch` is the
/// coefficient of `x U_w` left over; it vanishes only when the invariant
/// belongs to a true symmetry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReductionConsistency {
    pub x_mismatch: f64,
    pub diffusion_printed: f64,
    pub diffusion_substituted: f64,
    pub drift_printed: f64,
    pub drift_substituted: f64,
    pub reaction_printed: f64,
    pub reaction_substituted: f64,
}

pub fn reduction_consistency(cs: &CoefficientSet) -> Result<ReductionConsistency> {
    let (_, q, d) = lambda_minus_q(cs)?;
    let c = cs.constants()?;
    let m = c.m;
    let kappa = 2.0 / (m * d);
    let printed = reduced_from_constants(cs)?;
    let (sp, rp, qp) = printed.eval(0.0);
    Ok(ReductionConsistency {
        x_mismatch: c.p * kappa * kappa + q * kappa + 1.0 / m,
        diffusion_printed: sp,
        diffusion_substituted: c.r * kappa * kappa - c.s * kappa,
        drift_printed: rp,
        drift_substituted: c.p * kappa,
        reaction_printed: qp,
        reaction_substituted: q,
    })
}

/// Snapshots of a reduced solution on a fixed 1D grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory1D {
    snapshots: Vec<Field1D>,
}

impl Trajectory1D {
    pub fn new(snapshots: Vec<Field1D>) -> Result<Self> {
        let first = snapshots
            .first()
            .ok_or_else(|| QbmError::InvalidTrajectory("no snapshots".into()))?;
        for pair in snapshots.windows(2) {
            if pair[1].grid != first.grid {
                return Err(QbmError::InvalidTrajectory(
                    "snapshots on different grids".into(),
                ));
            }
            if !(pair[1].t > pair[0].t) {
                return Err(QbmError::InvalidTrajectory(
                    "snapshot times not increasing".into(),
                ));
            }
        }
        Ok(Trajectory1D { snapshots })
    }

    pub fn snapshots(&self) -> &[Field1D] {
        &self.snapshots
    }

    pub fn grid(&self) -> Grid1D {
        self.snapshots[0].grid
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|f| f.t).collect()
    }

    pub fn last(&self) -> &Field1D {
        self.snapshots.last().expect("non-empty")
    }
}

pub(crate) fn rhs1d(
    u: &Array1<Complex64>,
    grid: &Grid1D,
    s: f64,
    r: f64,
    qt: f64,
) -> Array1<Complex64> {
    let n = u.len();
    let h = grid.spacing();
    let (inv_h2, inv_2h) = (1.0 / (h * h), 0.5 / h);
    let ws = grid.coords();
    let mut out = Array1::from_elem(n, Complex64::new(0.0, 0.0));
    for i in 1..n - 1 {
        let uww = (u[i + 1] - u[i] * 2.0 + u[i - 1]) * inv_h2;
        let uw = (u[i + 1] - u[i - 1]) * inv_2h;
        out[i] = uww * s - uw * (ws[i] * r) + u[i] * qt;
    }
    out
}

/// Explicit stability bound of the 1D scheme at time `t`.
pub fn admissible_dt_1d(grid: &Grid1D, rc: &ReducedCoefficients, t: f64, safety: f64) -> f64 {
    let (s, r, qt) = rc.eval(t);
    let h = grid.spacing();
    let wmax = grid.min().abs().max(grid.max().abs());
    let mut limit = f64::INFINITY;
    for (coef, lim) in [(2.0 * s.abs(), h * h), (r.abs() * wmax, h), (qt.abs(), 2.0)] {
        if coef > 0.0 {
            limit = limit.min(lim / coef);
        }
    }
    safety * limit
}

fn check_direction(rc: &ReducedCoefficients, t: f64) -> Result<()> {
    let s = rc.diffusion.eval(t);
    if s < 0.0 {
        return Err(QbmError::IllPosed { s, t });
    }
    Ok(())
}

/// Evolves the reduced equation from `u0.t` to `config.t_end` with RK4 and
/// centred differences; end nodes are held fixed.
pub fn solve_reduced(
    u0: &Field1D,
    rc: &ReducedCoefficients,
    config: &SolverConfig,
) -> Result<Trajectory1D> {
    config.validate()?;
    let grid = u0.grid;
    if grid.n() < 3 {
        return Err(QbmError::InvalidGrid("need at least 3 nodes".into()));
    }
    let t0 = u0.t;
    let (n, dt) = step_plan(t0, config);
    let mut snaps = vec![u0.clone()];
    let mut u = u0.values.clone();
    for k in 0..n {
        let t = t0 + k as f64 * dt;
        for tt in [t, t + 0.5 * dt, t + dt] {
            check_direction(rc, tt)?;
        }
        for tt in [t, t + dt] {
            let adm = admissible_dt_1d(&grid, rc, tt, config.cfl_safety);
            if dt > adm {
                return Err(QbmError::StepSize {
                    dt,
                    admissible: adm,
                    t: tt,
                });
            }
        }
        let f = |v: &Array1<Complex64>, tt: f64| {
            let (s, r, qt) = rc.eval(tt);
            rhs1d(v, &grid, s, r, qt)
        };
        let k1 = f(&u, t);
        let k2 = f(&(&u + &(&k1 * Complex64::from(0.5 * dt))), t + 0.5 * dt);
        let k3 = f(&(&u + &(&k2 * Complex64::from(0.5 * dt))), t + 0.5 * dt);
        let k4 = f(&(&u + &(&k3 * Complex64::from(dt))), t + dt);
        let w = Complex64::from(dt / 6.0);
        u = &u + &((&k1 + &(&k2 * 2.0) + &(&k3 * 2.0) + &k4) * w);
        let t_next = if k + 1 == n {
            config.t_end
        } else {
            t0 + (k + 1) as f64 * dt
        };
        if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(QbmError::BlowUp { t: t_next });
        }
        if (k + 1) % config.snapshot_stride == 0 {
            snaps.push(Field1D::new(grid, t_next, u.clone())?);
        }
    }
    Trajectory1D::new(snaps)
}

/// Largest centred-difference residual of the reduced equation over nodes
/// at least `margin` away from the ends.
pub(crate) fn residual1d_with_margin(
    traj: &Trajectory1D,
    rc: &ReducedCoefficients,
    margin: usize,
) -> Result<f64> {
    let dt = uniform_spacing(&traj.times())?;
    let snaps = traj.snapshots();
    let grid = traj.grid();
    let n = grid.n();
    if n < 2 * margin + 1 {
        return Err(QbmError::InvalidGrid(format!(
            "{n} nodes leave no interior"
        )));
    }
    let mut worst: f64 = 0.0;
    for k in 1..snaps.len() - 1 {
        let (s, r, qt) = rc.eval(snaps[k].t);
        let rhs = rhs1d(&snaps[k].values, &grid, s, r, qt);
        for i in margin..n - margin {
            let ut = (snaps[k + 1].values[i] - snaps[k - 1].values[i]) / (2.0 * dt);
            worst = worst.max((ut - rhs[i]).norm());
        }
    }
    Ok(worst)
}

/// Largest centred-difference residual of the reduced equation at interior nodes.
pub fn residual1d(traj: &Trajectory1D, rc: &ReducedCoefficients) -> Result<f64> {
    residual1d_with_margin(traj, rc, 1)
}

/// Output of [`reconstruct`].
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub trajectory: Trajectory2D,
    /// `max |Im U| / max |Re U|` over the sampled points.
    pub imag_ratio: f64,
    /// Set when `imag_ratio` reaches `1e-8`.
    pub imag_flag: bool,
}

pub const IMAG_TOLERANCE: f64 = 1e-8;

/// Lifts a reduced solution to the plane: `Z(t, x, y) = Re U(t, w(x, y))`.
pub fn reconstruct(
    utraj: &Trajectory1D,
    cs: &CoefficientSet,
    grid2d: Grid2D,
) -> Result<Reconstruction> {
    let (wx, wy) = invariant_gradient(cs)?;
    let w_of = |x: f64, y: f64| wx * x + wy * y;
    let corners = [
        w_of(grid2d.x.min(), grid2d.y.min()),
        w_of(grid2d.x.min(), grid2d.y.max()),
        w_of(grid2d.x.max(), grid2d.y.min()),
        w_of(grid2d.x.max(), grid2d.y.max()),
    ];
    let need_min = corners.iter().copied().fold(f64::INFINITY, f64::min);
    let need_max = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let g1 = utraj.grid();
    if need_min < g1.min() || need_max > g1.max() {
        return Err(QbmError::RangeCoverage {
            axis: "w",
            need_min,
            need_max,
            have_min: g1.min(),
            have_max: g1.max(),
        });
    }
    let xs = grid2d.x.coords();
    let ys = grid2d.y.coords();
    let (mut max_re, mut max_im) = (0.0f64, 0.0f64);
    let mut snaps = Vec::with_capacity(utraj.snapshots().len());
    for u in utraj.snapshots() {
        cs.check_time(u.t)?;
        let mut f = Field2D::zeros(grid2d, u.t);
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                let w = w_of(x, y).clamp(g1.min(), g1.max());
                let v = u.sample(w)?;
                max_re = max_re.max(v.re.abs());
                max_im = max_im.max(v.im.abs());
                f.values[[i, j]] = v.re;
            }
        }
        snaps.push(f);
    }
    let imag_ratio = if max_im == 0.0 { 0.0 } else { max_im / max_re };
    Ok(Reconstruction {
        trajectory: Trajectory2D::new(snaps, cs.clone())?,
        imag_ratio,
        imag_flag: imag_ratio >= IMAG_TOLERANCE,
    })
}

/// `T(t) = integral_0^t S(u) du`, requiring `S > 0` on the way.
pub fn rescale_time(s: &TimeFn, t: f64) -> Result<f64> {
    let check = |u: f64| -> Result<()> {
        let v = s.eval(u);
        if !(v > 0.0) {
            return Err(QbmError::Monotonicity { s: v, t: u });
        }
        Ok(())
    };
    check(0.0)?;
    check(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    const PROBES: usize = 64;
    for k in 1..PROBES {
        check(t * k as f64 / PROBES as f64)?;
    }
    let worst = std::cell::Cell::new(None);
    let out = quadrature::integrate(
        |u| {
            let v = s.eval(u);
            if !(v > 0.0) && worst.get().is_none() {
                worst.set(Some((v, u)));
            }
            v
        },
        0.0,
        t,
        1e-13,
    );
    if let Some((v, u)) = worst.get() {
        return Err(QbmError::Monotonicity { s: v, t: u });
    }
    Ok(out.integral)
}

/// Discretisation of one run of the reduction pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineSetup {
    pub grid2d: Grid2D,
    pub w_grid: Grid1D,
    /// Width of the Gaussian initial profile `exp(-w^2 / (2 sigma^2))`.
    pub sigma: f64,
    pub config: SolverConfig,
}

impl PipelineSetup {
    /// Both grids refined, `dt / 4` and twice the stride, so snapshot
    /// spacing halves with the mesh.
    pub fn refined(&self) -> PipelineSetup {
        PipelineSetup {
            grid2d: self.grid2d.refined(),
            w_grid: self.w_grid.refined(),
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
pub struct PipelineRun {
    pub reduced: Trajectory1D,
    pub reconstruction: Reconstruction,
    pub residual2d: f64,
    pub residual1d: f64,
}

pub fn run_pipeline(
    cs: &CoefficientSet,
    rc: &ReducedCoefficients,
    setup: &PipelineSetup,
) -> Result<PipelineRun> {
    if !(setup.sigma > 0.0) {
        return Err(QbmError::InvalidParameter(format!(
            "sigma must be positive, got {}",
            setup.sigma
        )));
    }
    let sig2 = setup.sigma * setup.sigma;
    let u0 = Field1D::from_fn(setup.w_grid, 0.0, |w| {
        Complex64::new((-w * w / (2.0 * sig2)).exp(), 0.0)
    })?;
    let reduced = solve_reduced(&u0, rc, &setup.config)?;
    let reconstruction = reconstruct(&reduced, cs, setup.grid2d)?;
    let r2 = residual2d(&reconstruction.trajectory)?;
    let r1 = residual1d(&reduced, rc)?;
    Ok(PipelineRun {
        reduced,
        reconstruction,
        residual2d: r2,
        residual1d: r1,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionReport {
    pub s_bar: f64,
    pub residuals: [f64; 2],
    pub reduced_residuals: [f64; 2],
    pub order: f64,
    pub imag_ratio: f64,
    pub consistency: ReductionConsistency,
    pub verdict: Verdict,
}

/// Runs the pipeline at `setup` and its refinement and measures how fast
/// the reconstructed 2D residual falls.
pub fn verify_reduction(
    cs: &CoefficientSet,
    setup: &PipelineSetup,
) -> Result<(ReductionReport, [PipelineRun; 2])> {
    let rc = reduced_from_constants(cs)?;
    let coarse = run_pipeline(cs, &rc, setup)?;
    let fine = run_pipeline(cs, &rc, &setup.refined())?;
    let order = convergence_order(coarse.residual2d, fine.residual2d);
    let report = ReductionReport {
        s_bar: rc.diffusion.eval(0.0),
        residuals: [coarse.residual2d, fine.residual2d],
        reduced_residuals: [coarse.residual1d, fine.residual1d],
        order,
        imag_ratio: coarse
            .reconstruction
            .imag_ratio
            .max(fine.reconstruction.imag_ratio),
        consistency: reduction_consistency(cs)?,
        verdict: Verdict::from_order(order),
    };
    Ok((report, [coarse, fine]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::constant_generators;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cs(m: f64, p: f64, q: f64, r: f64, s: f64) -> CoefficientSet {
        CoefficientSet::constant(m, p, q, r, s).unwrap()
    }

    #[test]
    fn invariant_examples() {
        let c = cs(1.0, 1.0, 0.0, 0.05, 0.02);
        assert_eq!(invariant_w(&c, 0.0, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(invariant_w(&c, 0.0, 1.0, 0.0).unwrap(), -1.0);
        let c2 = cs(1.7, 2.3, 0.4, 0.05, 0.02);
        assert_eq!(invariant_w(&c2, 0.3, 0.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_invariant() {
        // m = 1, p = 0.5, q = 1 gives lambda = 1 = q.
        let c = cs(1.0, 0.5, 1.0, 0.05, 0.02);
        assert!(matches!(
            invariant_w(&c, 0.0, 1.0, 1.0),
            Err(QbmError::DegenerateReduction(_))
        ));
        assert!(matches!(
            reduced_from_constants(&c),
            Err(QbmError::DegenerateReduction(_))
        ));
    }

    proptest! {
        #[test]
        fn invariant_is_affine(x1 in -5.0f64..5.0, y1 in -5.0f64..5.0, x2 in -5.0f64..5.0, y2 in -5.0f64..5.0) {
            let c = cs(1.3, 2.0, 0.3, 0.05, 0.02);
            let w = |x, y| invariant_w(&c, 0.0, x, y).unwrap();
            let lhs = w(x1 + x2, y1 + y2) + w(0.0, 0.0);
            let rhs = w(x1, y1) + w(x2, y2);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn invariant_is_annihilated_by_x1_not_x3() {
        let (m, q, r, s) = (1.2, 0.3, 0.05, 0.02);
        let c = cs(m, 1.5, q, r, s);
        let g = constant_generators(&c).unwrap();
        let (wx, wy) = invariant_gradient(&c).unwrap();
        let l = g.lambda;
        for t in [0.0, 0.7] {
            let v1 = g.x1.eval(t);
            assert!((wx * v1.xi_x + wy * v1.xi_y).abs() < 1e-12);
            // Along the printed X3 the invariant moves at (8r + 4sqm) e^{-(l-q)t/2}.
            let v3 = g.x3.eval(t);
            let expect = (8.0 * r + 4.0 * s * q * m) * (-(l - q) * t / 2.0).exp();
            assert_relative_eq!(wx * v3.xi_x + wy * v3.xi_y, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn reduced_coefficient_examples() {
        // r = 0, s = 1, m = 1, lambda - q = 2: p = 1, q = 0.
        let rc = reduced_from_constants(&cs(1.0, 1.0, 0.0, 0.0, 1.0)).unwrap();
        assert_eq!(rc.eval(0.0), (1.0, 1.0, 0.0));
        // 2r = s m (lambda - q)
        let rc = reduced_from_constants(&cs(1.0, 1.0, 0.0, 0.2, 0.2)).unwrap();
        assert!(rc.degenerate_diffusion());
    }

    fn gaussian_u0(grid: Grid1D, sigma: f64) -> Field1D {
        Field1D::from_fn(grid, 0.0, |w| {
            Complex64::new((-w * w / (2.0 * sigma * sigma)).exp(), 0.0)
        })
        .unwrap()
    }

    fn config(dt: f64, t_end: f64, stride: usize) -> SolverConfig {
        SolverConfig {
            dt,
            t_end,
            snapshot_stride: stride,
            cfl_safety: 0.4,
        }
    }

    #[test]
    fn pure_reaction_is_exponential() {
        let grid = Grid1D::new(-3.0, 3.0, 31).unwrap();
        let u0 = gaussian_u0(grid, 1.0);
        let rc = ReducedCoefficients::new(TimeFn::zero(), TimeFn::zero(), TimeFn::constant(0.7));
        let tr = solve_reduced(&u0, &rc, &config(0.01, 0.5, 10)).unwrap();
        let last = tr.last();
        for i in 1..grid.n() - 1 {
            assert_relative_eq!(
                last.values[i].re,
                u0.values[i].re * (0.35f64).exp(),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn constants_are_steady() {
        let grid = Grid1D::new(-3.0, 3.0, 31).unwrap();
        let u0 = Field1D::from_fn(grid, 0.0, |_| Complex64::new(1.0, 0.0)).unwrap();
        let rc =
            ReducedCoefficients::new(TimeFn::constant(0.3), TimeFn::constant(1.1), TimeFn::zero());
        let tr = solve_reduced(&u0, &rc, &config(0.01, 0.5, 10)).unwrap();
        assert!(tr.last().values.iter().all(|v| (*v - 1.0).norm() < 1e-14));
    }

    #[test]
    fn heat_kernel_widening() {
        // U = (1 + 2t)^{-1/2} exp(-w^2 / (2 (1 + 2t)))
        let exact =
            |t: f64, w: f64| (1.0 + 2.0 * t).powf(-0.5) * (-w * w / (2.0 * (1.0 + 2.0 * t))).exp();
        let rc = ReducedCoefficients::new(TimeFn::constant(1.0), TimeFn::zero(), TimeFn::zero());
        let err = |n: usize| {
            let grid = Grid1D::new(-10.0, 10.0, n).unwrap();
            let h = grid.spacing();
            let tr =
                solve_reduced(&gaussian_u0(grid, 1.0), &rc, &config(0.2 * h * h, 0.5, 1)).unwrap();
            let last = tr.last();
            grid.coords()
                .iter()
                .zip(last.values.iter())
                .map(|(w, u)| (u.re - exact(last.t, *w)).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(81) / err(161);
        assert!((3.2..4.8).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn negative_diffusion_is_rejected() {
        let grid = Grid1D::new(-3.0, 3.0, 31).unwrap();
        let rc = ReducedCoefficients::new(TimeFn::constant(-0.1), TimeFn::zero(), TimeFn::zero());
        assert!(matches!(
            solve_reduced(&gaussian_u0(grid, 1.0), &rc, &config(0.001, 0.1, 10)),
            Err(QbmError::IllPosed { .. })
        ));
    }

    #[test]
    fn solver_is_linear() {
        let grid = Grid1D::new(-4.0, 4.0, 41).unwrap();
        let rc = ReducedCoefficients::new(
            TimeFn::constant(0.2),
            TimeFn::constant(0.5),
            TimeFn::constant(0.1),
        );
        let a = Field1D::from_fn(grid, 0.0, |w| Complex64::new((-w * w).exp(), 0.3 * w)).unwrap();
        let b = gaussian_u0(grid, 0.7);
        let sum = Field1D::new(
            grid,
            0.0,
            &a.values * Complex64::from(2.0) + &b.values * Complex64::new(0.0, -1.5),
        )
        .unwrap();
        let cfg = config(0.005, 0.3, 5);
        let (ta, tb, ts) = (
            solve_reduced(&a, &rc, &cfg).unwrap(),
            solve_reduced(&b, &rc, &cfg).unwrap(),
            solve_reduced(&sum, &rc, &cfg).unwrap(),
        );
        for ((fa, fb), fs) in ta
            .snapshots()
            .iter()
            .zip(tb.snapshots())
            .zip(ts.snapshots())
        {
            for i in 0..grid.n() {
                let want = fa.values[i] * 2.0 + fb.values[i] * Complex64::new(0.0, -1.5);
                assert!((fs.values[i] - want).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn reconstruct_constant_and_node_transfer() {
        let c = cs(1.0, 1.0, 0.0, 0.05, 0.02);
        let g1 = Grid1D::new(-20.0, 20.0, 41).unwrap();
        let g2 = Grid2D::square(-2.0, 2.0, 5).unwrap();
        let snaps: Vec<Field1D> = (0..3)
            .map(|k| {
                Field1D::from_fn(g1, k as f64 * 0.1, |w| Complex64::new(1.0 + w * w, 0.0)).unwrap()
            })
            .collect();
        let rec = reconstruct(&Trajectory1D::new(snaps).unwrap(), &c, g2).unwrap();
        assert!(!rec.imag_flag);
        // w = y - x takes integer values on this grid, which are 1D nodes.
        let f = &rec.trajectory.snapshots()[1];
        for (i, x) in g2.x.coords().iter().enumerate() {
            for (j, y) in g2.y.coords().iter().enumerate() {
                let w = y - x;
                assert_eq!(f.values[[i, j]], 1.0 + w * w);
            }
        }
        let flat = vec![Field1D::from_fn(g1, 0.0, |_| Complex64::new(2.5, 0.0)).unwrap()];
        let rec = reconstruct(&Trajectory1D::new(flat).unwrap(), &c, g2).unwrap();
        assert!(rec.trajectory.snapshots()[0]
            .values
            .iter()
            .all(|v| *v == 2.5));
    }

    #[test]
    fn reconstruct_reports_w_range() {
        let c = cs(1.0, 1.0, 0.0, 0.05, 0.02);
        let g1 = Grid1D::new(-1.0, 1.0, 11).unwrap();
        let g2 = Grid2D::square(-2.0, 2.0, 5).unwrap();
        let tr = Trajectory1D::new(vec![Field1D::from_fn(g1, 0.0, |_| {
            Complex64::new(1.0, 0.0)
        })
        .unwrap()])
        .unwrap();
        match reconstruct(&tr, &c, g2) {
            Err(QbmError::RangeCoverage {
                need_min, need_max, ..
            }) => {
                assert_eq!((need_min, need_max), (-4.0, 4.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rescale_examples() {
        assert_relative_eq!(
            rescale_time(&TimeFn::constant(1.0), 0.8).unwrap(),
            0.8,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            rescale_time(&TimeFn::constant(2.0), 0.8).unwrap(),
            1.6,
            max_relative = 1e-12
        );
        let t: f64 = 1.3;
        assert!((rescale_time(&TimeFn::exp(1.0, 1.0), t).unwrap() - (t.exp() - 1.0)).abs() < 1e-10);
        assert!(matches!(
            rescale_time(
                &TimeFn::constant(1.0).sub(&TimeFn::exp(1.0, 1.0).scale(0.5)),
                1.0
            ),
            Err(QbmError::Monotonicity { .. })
        ));
    }

    #[test]
    fn rescale_is_increasing_with_derivative_s() {
        let s = TimeFn::constant(1.0).add(&TimeFn::exp(0.5, -2.0));
        let mut prev = 0.0;
        for k in 1..=10 {
            let t = 0.1 * k as f64;
            let v = rescale_time(&s, t).unwrap();
            assert!(v > prev);
            prev = v;
            let h = 1e-4;
            let d =
                (rescale_time(&s, t + h).unwrap() - rescale_time(&s, t - h).unwrap()) / (2.0 * h);
            assert!((d - s.eval(t)).abs() < 1e-7);
        }
    }
}
