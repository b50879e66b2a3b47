//! Explicit method-of-lines solver for the master equation.
//!
//! Space: second-order centred differences, with `(xZ)_x` expanded as
//! `Z + x Z_x` and `Z_xy` taken from the four-point cross stencil. The
//! outermost ring of nodes has zero right-hand side, so boundary values are
//! held at their initial values. Time: classical RK4.

use ndarray::{Array2, Axis, Zip};
use rayon::prelude::*;

use crate::coefficients::CoefficientSet;
use crate::error::{QbmError, Result};
use crate::fields::{integrate2d_weighted, Field2D, Grid2D};
use crate::ode;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub cfl_safety: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-3,
            t_end: 1.0,
            snapshot_stride: 10,
            cfl_safety: 0.4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(QbmError::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end >= 0.0) {
            return Err(QbmError::InvalidParameter(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(QbmError::InvalidParameter(
                "snapshot_stride must be at least 1".into(),
            ));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(QbmError::InvalidParameter(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        Ok(())
    }
}

/// Snapshots of one solution on a fixed grid, with strictly increasing times.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory2D {
    snapshots: Vec<Field2D>,
    coefficients: CoefficientSet,
}

impl Trajectory2D {
    pub fn new(snapshots: Vec<Field2D>, coefficients: CoefficientSet) -> Result<Self> {
        let first = snapshots
            .first()
            .ok_or_else(|| QbmError::InvalidTrajectory("no snapshots".into()))?;
        for w in snapshots.windows(2) {
            if w[1].grid != first.grid {
                return Err(QbmError::InvalidTrajectory(
                    "snapshots use different grids".into(),
                ));
            }
            if !(w[1].t > w[0].t) {
                return Err(QbmError::InvalidTrajectory(format!(
                    "times not strictly increasing: {} then {}",
                    w[0].t, w[1].t
                )));
            }
        }
        Ok(Trajectory2D {
            snapshots,
            coefficients,
        })
    }

    pub fn snapshots(&self) -> &[Field2D] {
        &self.snapshots
    }

    pub fn coefficients(&self) -> &CoefficientSet {
        &self.coefficients
    }

    pub fn grid(&self) -> Grid2D {
        self.snapshots[0].grid
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|f| f.t).collect()
    }

    pub fn last(&self) -> &Field2D {
        self.snapshots.last().unwrap()
    }

    /// Nodewise `a * self + b * other`; both trajectories must share times and grid.
    pub fn combine(&self, a: f64, other: &Trajectory2D, b: f64) -> Result<Trajectory2D> {
        if self.snapshots.len() != other.snapshots.len() {
            return Err(QbmError::InvalidTrajectory("snapshot counts differ".into()));
        }
        let mut out = Vec::with_capacity(self.snapshots.len());
        for (f, g) in self.snapshots.iter().zip(&other.snapshots) {
            if f.t != g.t {
                return Err(QbmError::InvalidTrajectory("snapshot times differ".into()));
            }
            out.push(f.combine(a, g, b)?);
        }
        Trajectory2D::new(out, self.coefficients.clone())
    }
}

fn check_rhs_grid(grid: &Grid2D) -> Result<()> {
    let (nx, ny) = grid.shape();
    if nx < 5 || ny < 5 {
        return Err(QbmError::InvalidGrid(format!(
            "need at least 5x5 nodes, got {nx}x{ny}"
        )));
    }
    Ok(())
}

/// Right-hand side of the master equation at interior nodes; zero on the boundary ring.
pub fn spatial_rhs(f: &Field2D, cs: &CoefficientSet, t: f64) -> Result<Field2D> {
    check_rhs_grid(&f.grid)?;
    let (p, q, r, s) = cs.eval(t)?;
    let values = rhs_values(&f.values, &f.grid, cs.m(), p, q, r, s);
    Ok(Field2D {
        grid: f.grid,
        t: f.t,
        values,
    })
}

fn rhs_values(
    z: &Array2<f64>,
    grid: &Grid2D,
    m: f64,
    p: f64,
    q: f64,
    r: f64,
    s: f64,
) -> Array2<f64> {
    let (nx, ny) = z.dim();
    let hx = grid.x.spacing();
    let hy = grid.y.spacing();
    let xs = grid.x.coords();
    let ys = grid.y.coords();
    let (inv2hx, inv2hy) = (0.5 / hx, 0.5 / hy);
    let invhx2 = 1.0 / (hx * hx);
    let inv4hxhy = 0.25 / (hx * hy);
    let mut out = Array2::zeros((nx, ny));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .filter(|(i, _)| *i > 0 && *i + 1 < nx)
        .for_each(|(i, mut row)| {
            let x = xs[i];
            for j in 1..ny - 1 {
                let y = ys[j];
                let c = z[[i, j]];
                let zx = (z[[i + 1, j]] - z[[i - 1, j]]) * inv2hx;
                let zy = (z[[i, j + 1]] - z[[i, j - 1]]) * inv2hy;
                let zxx = (z[[i + 1, j]] - 2.0 * c + z[[i - 1, j]]) * invhx2;
                let zxy = (z[[i + 1, j + 1]] - z[[i + 1, j - 1]] - z[[i - 1, j + 1]]
                    + z[[i - 1, j - 1]])
                    * inv4hxhy;
                row[j] = -(x / m) * zy + p * y * zx + q * (c + x * zx) + r * zxx + s * zxy;
            }
        });
    out
}

/// Largest stable step: `safety * min` of the explicit limits of each term
/// (advection `h/|c|`, diffusion `h^2/(2|c|)`, reaction `2/|q|`).
pub fn admissible_dt(grid: &Grid2D, cs: &CoefficientSet, t: f64, safety: f64) -> Result<f64> {
    let (p, q, r, s) = cs.eval(t)?;
    let hx = grid.x.spacing();
    let hy = grid.y.spacing();
    let xmax = grid.x.min().abs().max(grid.x.max().abs());
    let ymax = grid.y.min().abs().max(grid.y.max().abs());
    let mut limit = f64::INFINITY;
    let mut bound = |coef: f64, lim: f64| {
        if coef > 0.0 {
            limit = limit.min(lim / coef);
        }
    };
    bound(xmax / cs.m(), hy);
    bound(p.abs() * ymax + q.abs() * xmax, hx);
    bound(2.0 * r.abs(), hx * hx);
    bound(2.0 * s.abs(), hx.min(hy).powi(2));
    bound(q.abs(), 2.0);
    Ok(safety * limit)
}

/// One RK4 step of size `dt`; the stability bound is checked at both ends.
pub fn step(f: &Field2D, cs: &CoefficientSet, t: f64, dt: f64, cfl_safety: f64) -> Result<Field2D> {
    check_rhs_grid(&f.grid)?;
    if dt == 0.0 {
        return Ok(f.clone());
    }
    for tt in [t, t + dt] {
        let adm = admissible_dt(&f.grid, cs, tt, cfl_safety)?;
        if dt > adm {
            return Err(QbmError::StepSize {
                dt,
                admissible: adm,
                t: tt,
            });
        }
    }
    rk4_unchecked(f, cs, t, dt)
}

fn rk4_unchecked(f: &Field2D, cs: &CoefficientSet, t: f64, dt: f64) -> Result<Field2D> {
    let m = cs.m();
    let grid = f.grid;
    let rhs = |z: &Array2<f64>, tt: f64| -> Result<Array2<f64>> {
        let (p, q, r, s) = cs.eval(tt)?;
        Ok(rhs_values(z, &grid, m, p, q, r, s))
    };
    let z = &f.values;
    let k1 = rhs(z, t)?;
    let k2 = rhs(&(z + &(&k1 * (0.5 * dt))), t + 0.5 * dt)?;
    let k3 = rhs(&(z + &(&k2 * (0.5 * dt))), t + 0.5 * dt)?;
    let k4 = rhs(&(z + &(&k3 * dt)), t + dt)?;
    let mut out = z.clone();
    Zip::from(&mut out)
        .and(&k1)
        .and(&k2)
        .and(&k3)
        .and(&k4)
        .for_each(|o, &a, &b, &c, &d| *o += dt / 6.0 * (a + 2.0 * b + 2.0 * c + d));
    Ok(Field2D {
        grid,
        t: t + dt,
        values: out,
    })
}

/// Number of RK4 steps and their uniform length for a run. The step count is
/// a multiple of the stride, so stored snapshots are equally spaced.
pub fn step_plan(t0: f64, config: &SolverConfig) -> (usize, f64) {
    let span = config.t_end - t0;
    if span <= 0.0 {
        return (0, 0.0);
    }
    let stride = config.snapshot_stride;
    let chunks = ode::step_count(0.0, span, config.dt * stride as f64);
    let n = chunks * stride;
    (n, span / n as f64)
}

/// Evolves `f0` from `f0.t` to `config.t_end`, storing every `stride`-th step.
pub fn evolve(f0: &Field2D, cs: &CoefficientSet, config: &SolverConfig) -> Result<Trajectory2D> {
    config.validate()?;
    check_rhs_grid(&f0.grid)?;
    let t0 = f0.t;
    let (n, dt) = step_plan(t0, config);
    let mut snaps = vec![f0.clone()];
    let mut cur = f0.clone();
    for k in 0..n {
        let t = t0 + k as f64 * dt;
        let mut next = step(&cur, cs, t, dt, config.cfl_safety)?;
        next.t = if k + 1 == n {
            config.t_end
        } else {
            t0 + (k + 1) as f64 * dt
        };
        if next.values.iter().any(|v| !v.is_finite()) {
            return Err(QbmError::BlowUp { t: next.t });
        }
        if (k + 1) % config.snapshot_stride == 0 {
            snaps.push(next.clone());
        }
        cur = next;
    }
    Trajectory2D::new(snaps, cs.clone())
}

/// Checks that snapshot times are equally spaced; returns the spacing.
pub(crate) fn uniform_spacing(times: &[f64]) -> Result<f64> {
    if times.len() < 3 {
        return Err(QbmError::InvalidTrajectory(format!(
            "need at least 3 snapshots, got {}",
            times.len()
        )));
    }
    let span = times[times.len() - 1] - times[0];
    let dt = span / (times.len() - 1) as f64;
    for (k, t) in times.iter().enumerate() {
        if (t - (times[0] + k as f64 * dt)).abs() > 1e-9 * span.abs().max(1.0) {
            return Err(QbmError::InvalidTrajectory(format!(
                "snapshot {k} at t = {t} breaks uniform spacing {dt}"
            )));
        }
    }
    Ok(dt)
}

/// Max over interior nodes and interior snapshots of `|Z_t - rhs(Z)|`, with
/// `Z_t` from centred differences between neighbouring snapshots.
pub fn residual2d(traj: &Trajectory2D) -> Result<f64> {
    let dt = uniform_spacing(&traj.times())?;
    check_rhs_grid(&traj.grid())?;
    let snaps = traj.snapshots();
    let (nx, ny) = traj.grid().shape();
    let mut worst: f64 = 0.0;
    for k in 1..snaps.len() - 1 {
        let rhs = spatial_rhs(&snaps[k], traj.coefficients(), snaps[k].t)?;
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                let zt = (snaps[k + 1].values[[i, j]] - snaps[k - 1].values[[i, j]]) / (2.0 * dt);
                worst = worst.max((zt - rhs.values[[i, j]]).abs());
            }
        }
    }
    Ok(worst)
}

/// Unnormalised phase-space moments `integral of w(x,y) Z`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Moments {
    pub mass: f64,
    pub x: f64,
    pub y: f64,
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Moments {
    pub fn of_field(f: &Field2D) -> Moments {
        Moments {
            mass: integrate2d_weighted(f, |_, _| 1.0),
            x: integrate2d_weighted(f, |x, _| x),
            y: integrate2d_weighted(f, |_, y| y),
            xx: integrate2d_weighted(f, |x, _| x * x),
            xy: integrate2d_weighted(f, |x, y| x * y),
            yy: integrate2d_weighted(f, |_, y| y * y),
        }
    }

    fn to_vec(self) -> Vec<f64> {
        vec![self.mass, self.x, self.y, self.xx, self.xy, self.yy]
    }

    fn from_slice(v: &[f64]) -> Moments {
        Moments {
            mass: v[0],
            x: v[1],
            y: v[2],
            xx: v[3],
            xy: v[4],
            yy: v[5],
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.mass, self.x, self.y, self.xx, self.xy, self.yy]
    }
}

/// Right-hand side of the closed moment system. Multiplying the master
/// equation by a test function `g` and integrating by parts (decaying data)
/// gives `d<g>/dt = <(x/m) g_y - (p y + q x) g_x + r g_xx + s g_xy>`.
pub fn moment_rates(mo: &Moments, m: f64, p: f64, q: f64, r: f64, s: f64) -> Moments {
    Moments {
        mass: 0.0,
        x: -p * mo.y - q * mo.x,
        y: mo.x / m,
        xx: -2.0 * p * mo.xy - 2.0 * q * mo.xx + 2.0 * r * mo.mass,
        xy: mo.xx / m - p * mo.yy - q * mo.xy + s * mo.mass,
        yy: 2.0 * mo.xy / m,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentTrajectory {
    pub times: Vec<f64>,
    pub moments: Vec<Moments>,
}

impl MomentTrajectory {
    pub fn last(&self) -> Moments {
        *self.moments.last().unwrap()
    }
}

/// Integrates the moment system with RK4 from `t0` to `t1`.
pub fn moment_oracle(
    cs: &CoefficientSet,
    initial: Moments,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<MomentTrajectory> {
    if !(dt > 0.0) {
        return Err(QbmError::InvalidParameter(format!(
            "dt must be positive, got {dt}"
        )));
    }
    cs.check_time(t0)?;
    cs.check_time(t1)?;
    let m = cs.m();
    let sol = ode::integrate(
        |t, y| {
            let (p, q, r, s) = (
                cs.p().eval(t),
                cs.q().eval(t),
                cs.r().eval(t),
                cs.s().eval(t),
            );
            moment_rates(&Moments::from_slice(y), m, p, q, r, s).to_vec()
        },
        &initial.to_vec(),
        t0,
        t1,
        dt,
        |_, _| Ok::<(), QbmError>(()),
    )?;
    Ok(MomentTrajectory {
        times: sol.times,
        moments: sol.states.iter().map(|v| Moments::from_slice(v)).collect(),
    })
}
