//! Ermakov-Pinney equation `rho'' = omega2(T) rho + K / rho^3`, its linear
//! companion `sigma'' = omega2(T) sigma`, and Pinney's superposition
//! `rho = sqrt(a sigma1^2 + 2 b sigma1 sigma2 + c sigma2^2)` with
//! `K = (ac - b^2) W^2`.

use crate::error::{QbmError, Result};
use crate::ode;
use crate::time_fn::TimeFn;

pub const RHO_FLOOR: f64 = 1e-8;
pub const WRONSKIAN_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct ErmakovProblem {
    /// `R' + R^2`
    pub omega2: TimeFn,
    pub k: f64,
    pub rho0: f64,
    pub drho0: f64,
}

impl ErmakovProblem {
    pub fn new(omega2: TimeFn, k: f64, rho0: f64, drho0: f64) -> Result<Self> {
        if !(rho0 > 0.0) {
            return Err(QbmError::InvalidParameter(format!(
                "rho0 must be positive, got {rho0}"
            )));
        }
        if !k.is_finite() || !drho0.is_finite() {
            return Err(QbmError::InvalidParameter(
                "K and rho'(0) must be finite".into(),
            ));
        }
        Ok(ErmakovProblem {
            omega2,
            k,
            rho0,
            drho0,
        })
    }

    /// Builds `omega2 = R' + R^2` from a drift profile.
    pub fn from_drift(r: &TimeFn, k: f64, rho0: f64, drho0: f64) -> Result<Self> {
        ErmakovProblem::new(r.derivative().add(&r.mul(r)), k, rho0, drho0)
    }
}

/// A sampled scalar solution with its first derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct Sampled {
    pub times: Vec<f64>,
    pub value: Vec<f64>,
    pub deriv: Vec<f64>,
}

impl Sampled {
    fn from_solution(sol: ode::OdeSolution) -> Self {
        Sampled {
            value: sol.component(0),
            deriv: sol.component(1),
            times: sol.times,
        }
    }
}

fn check_step(dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(QbmError::InvalidParameter(format!(
            "dt must be positive, got {dt}"
        )));
    }
    Ok(())
}

/// RK4 from `t0` to `t1`; stops with a singularity error once `rho` drops below [`RHO_FLOOR`].
pub fn integrate_ep(prob: &ErmakovProblem, t0: f64, t1: f64, dt: f64) -> Result<Sampled> {
    check_step(dt)?;
    let (w, k) = (&prob.omega2, prob.k);
    let sol = ode::integrate(
        |t, y| vec![y[1], w.eval(t) * y[0] + k / (y[0] * y[0] * y[0])],
        &[prob.rho0, prob.drho0],
        t0,
        t1,
        dt,
        |t, y| {
            if !(y[0] >= RHO_FLOOR) {
                Err(QbmError::Singularity {
                    t,
                    floor: RHO_FLOOR,
                })
            } else {
                Ok(())
            }
        },
    )?;
    Ok(Sampled::from_solution(sol))
}

/// Fundamental pair of the linear companion, with data `(1, 0)` and `(0, 1)` at `t0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearBasis {
    pub sigma1: Sampled,
    pub sigma2: Sampled,
    /// Wronskian from the initial data.
    pub wronskian: f64,
    /// Largest `|W(T) - W(t0)|` along the run.
    pub max_drift: f64,
}

impl LinearBasis {
    pub fn times(&self) -> &[f64] {
        &self.sigma1.times
    }
}

pub fn linear_basis(omega2: &TimeFn, t0: f64, t1: f64, dt: f64) -> Result<LinearBasis> {
    check_step(dt)?;
    let f = |t: f64, y: &[f64]| {
        let w = omega2.eval(t);
        vec![y[1], w * y[0], y[3], w * y[2]]
    };
    let sol = ode::integrate(f, &[1.0, 0.0, 0.0, 1.0], t0, t1, dt, |t, y| {
        let drift = (y[0] * y[3] - y[1] * y[2] - 1.0).abs();
        if drift > WRONSKIAN_TOLERANCE {
            Err(QbmError::Accuracy { drift, t })
        } else {
            Ok(())
        }
    })?;
    let max_drift = sol
        .states
        .iter()
        .map(|y| (y[0] * y[3] - y[1] * y[2] - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(LinearBasis {
        sigma1: Sampled {
            times: sol.times.clone(),
            value: sol.component(0),
            deriv: sol.component(1),
        },
        sigma2: Sampled {
            times: sol.times.clone(),
            value: sol.component(2),
            deriv: sol.component(3),
        },
        wronskian: 1.0,
        max_drift,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PinneySolution {
    pub rho: Sampled,
    pub k: f64,
}

/// `rho = sqrt(a s1^2 + 2 b s1 s2 + c s2^2)`, `K = (ac - b^2) W^2`.
pub fn pinney_superposition(basis: &LinearBasis, a: f64, b: f64, c: f64) -> Result<PinneySolution> {
    let (s1, s2) = (&basis.sigma1, &basis.sigma2);
    let n = s1.times.len();
    let mut value = Vec::with_capacity(n);
    let mut deriv = Vec::with_capacity(n);
    for i in 0..n {
        let (u, du, v, dv) = (s1.value[i], s1.deriv[i], s2.value[i], s2.deriv[i]);
        let form = a * u * u + 2.0 * b * u * v + c * v * v;
        if !(form > 0.0) {
            return Err(QbmError::NonPositiveForm {
                t: s1.times[i],
                value: form,
            });
        }
        let rho = form.sqrt();
        value.push(rho);
        deriv.push((a * u * du + b * (du * v + u * dv) + c * v * dv) / rho);
    }
    let w = basis.wronskian;
    Ok(PinneySolution {
        rho: Sampled {
            times: s1.times.clone(),
            value,
            deriv,
        },
        k: (a * c - b * b) * w * w,
    })
}

/// Quadratic-form coefficients reproducing `rho(t0) = rho0`, `rho'(t0) = drho0`
/// for the given `K` on a basis with unit Wronskian.
pub fn pinney_from_initial(k: f64, rho0: f64, drho0: f64) -> Result<(f64, f64, f64)> {
    if !(rho0 > 0.0) {
        return Err(QbmError::InvalidParameter(format!(
            "rho0 must be positive, got {rho0}"
        )));
    }
    let a = rho0 * rho0;
    let b = rho0 * drho0;
    Ok((a, b, (k + b * b) / a))
}

/// `alpha = rho^2`.
pub fn alpha_from_rho(rho: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = rho.iter().position(|r| !(*r > 0.0)) {
        return Err(QbmError::InvalidParameter(format!(
            "rho[{i}] = {} is not positive",
            rho[i]
        )));
    }
    Ok(rho.iter().map(|r| r * r).collect())
}

/// Largest finite-difference residual of
/// `alpha''' = 4 alpha' omega2 + 2 alpha omega2'` on uniformly sampled `alpha`,
/// at nodes two or more steps from the ends.
pub fn alpha_equation_residual(times: &[f64], alpha: &[f64], omega2: &TimeFn) -> Result<f64> {
    let n = times.len();
    if n < 5 || alpha.len() != n {
        return Err(QbmError::InvalidParameter(
            "need at least 5 matching samples".into(),
        ));
    }
    let h = (times[n - 1] - times[0]) / (n - 1) as f64;
    let dw = omega2.derivative();
    let mut worst: f64 = 0.0;
    for i in 2..n - 2 {
        let d3 = (alpha[i + 2] - 2.0 * alpha[i + 1] + 2.0 * alpha[i - 1] - alpha[i - 2])
            / (2.0 * h * h * h);
        let d1 = (alpha[i + 1] - alpha[i - 1]) / (2.0 * h);
        let t = times[i];
        worst = worst.max((d3 - 4.0 * d1 * omega2.eval(t) - 2.0 * alpha[i] * dw.eval(t)).abs());
    }
    Ok(worst)
}

/// `(alpha alpha'' - alpha'^2 / 2 - 2 alpha^2 omega2) / 2` along the samples,
/// with derivatives by centred differences. Constant and equal to `K` when
/// `alpha = rho^2` and `rho` solves the Ermakov-Pinney equation.
pub fn alpha_first_integral(times: &[f64], alpha: &[f64], omega2: &TimeFn) -> Result<Vec<f64>> {
    let n = times.len();
    if n < 3 || alpha.len() != n {
        return Err(QbmError::InvalidParameter(
            "need at least 3 matching samples".into(),
        ));
    }
    let h = (times[n - 1] - times[0]) / (n - 1) as f64;
    Ok((1..n - 1)
        .map(|i| {
            let d1 = (alpha[i + 1] - alpha[i - 1]) / (2.0 * h);
            let d2 = (alpha[i + 1] - 2.0 * alpha[i] + alpha[i - 1]) / (h * h);
            let a = alpha[i];
            0.5 * (a * d2 - 0.5 * d1 * d1 - 2.0 * a * a * omega2.eval(times[i]))
        })
        .collect())
}

/// `(rho sigma' - sigma rho')^2 + K (sigma / rho)^2` along matching samples.
pub fn ermakov_invariant(rho: &Sampled, sigma: &Sampled, k: f64) -> Vec<f64> {
    (0..rho.value.len())
        .map(|i| {
            let (r, dr, s, ds) = (rho.value[i], rho.deriv[i], sigma.value[i], sigma.deriv[i]);
            let w = r * ds - s * dr;
            w * w + k * (s / r) * (s / r)
        })
        .collect()
}

/// Largest deviation of a sequence from its first entry.
pub fn spread(values: &[f64]) -> f64 {
    let v0 = values.first().copied().unwrap_or(0.0);
    values.iter().map(|v| (v - v0).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn max_dev(a: &[f64], b: impl Fn(usize) -> f64) -> f64 {
        a.iter()
            .enumerate()
            .map(|(i, v)| (v - b(i)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn free_forced_solution() {
        let p = ErmakovProblem::new(TimeFn::zero(), 1.0, 1.0, 0.0).unwrap();
        let sol = integrate_ep(&p, 0.0, 1.0, 1e-3).unwrap();
        let err = max_dev(&sol.value, |i| (1.0 + sol.times[i].powi(2)).sqrt());
        assert!(err < 1e-8, "{err}");
        // rho^3 rho'' = 1 for sqrt(1 + T^2)
        for t in [0.0f64, 0.5, 1.0] {
            let rho = (1.0 + t * t).sqrt();
            let ddrho = (1.0 + t * t).powf(-1.5);
            assert_relative_eq!(rho.powi(3) * ddrho, 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn zero_k_matches_linear() {
        let w = TimeFn::exp(0.5, 1.0);
        let p = ErmakovProblem::new(w.clone(), 0.0, 1.3, -0.2).unwrap();
        let rho = integrate_ep(&p, 0.0, 1.0, 1e-3).unwrap();
        let basis = linear_basis(&w, 0.0, 1.0, 1e-3).unwrap();
        let err = max_dev(&rho.value, |i| {
            1.3 * basis.sigma1.value[i] - 0.2 * basis.sigma2.value[i]
        });
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn singularity_is_reported() {
        let p = ErmakovProblem::new(TimeFn::zero(), 0.0, 1.0, -2.0).unwrap();
        match integrate_ep(&p, 0.0, 1.0, 1e-3) {
            Err(QbmError::Singularity { t, .. }) => assert!((t - 0.5).abs() < 2e-3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn basis_examples() {
        let b = linear_basis(&TimeFn::zero(), 0.0, 1.0, 1e-2).unwrap();
        assert!(max_dev(&b.sigma1.value, |_| 1.0) < 1e-15);
        assert!(max_dev(&b.sigma2.value, |i| b.times()[i]) < 1e-14);
        let b = linear_basis(&TimeFn::constant(1.0), 0.0, 1.0, 1e-3).unwrap();
        assert!(max_dev(&b.sigma1.value, |i| b.times()[i].cosh()) < 1e-8);
        assert!(max_dev(&b.sigma2.value, |i| b.times()[i].sinh()) < 1e-8);
        let b = linear_basis(
            &TimeFn::exp(1.0, 0.7).add(&TimeFn::constant(-0.3)),
            0.0,
            1.0,
            1e-3,
        )
        .unwrap();
        assert!(b.max_drift < 1e-8);
    }

    #[test]
    fn coarse_basis_trips_wronskian_check() {
        assert!(matches!(
            linear_basis(&TimeFn::constant(400.0), 0.0, 1.0, 0.05),
            Err(QbmError::Accuracy { .. })
        ));
    }

    #[test]
    fn pinney_examples() {
        let b = linear_basis(&TimeFn::zero(), 0.0, 1.0, 1e-2).unwrap();
        let p = pinney_superposition(&b, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(p.k, 1.0);
        assert!(max_dev(&p.rho.value, |i| (1.0 + b.times()[i].powi(2)).sqrt()) < 1e-14);
        // b^2 = ac
        let p = pinney_superposition(&b, 4.0, 3.0, 2.25).unwrap();
        assert_eq!(p.k, 0.0);
        assert!(max_dev(&p.rho.value, |i| 2.0 + 1.5 * b.times()[i]) < 1e-13);
        assert!(matches!(
            pinney_superposition(&b, 1.0, -1.0, 0.5),
            Err(QbmError::NonPositiveForm { .. })
        ));
    }

    #[test]
    fn pinney_agrees_with_direct_integration() {
        for w2 in [0.0, 1.0] {
            let w = TimeFn::constant(w2);
            let (k, rho0, drho0) = (1.0, 1.0, 0.0);
            let direct = integrate_ep(
                &ErmakovProblem::new(w.clone(), k, rho0, drho0).unwrap(),
                0.0,
                1.0,
                1e-3,
            )
            .unwrap();
            let (a, b, c) = pinney_from_initial(k, rho0, drho0).unwrap();
            let basis = linear_basis(&w, 0.0, 1.0, 1e-3).unwrap();
            let p = pinney_superposition(&basis, a, b, c).unwrap();
            assert_relative_eq!(p.k, k, max_relative = 1e-15);
            assert!(max_dev(&direct.value, |i| p.rho.value[i]) < 1e-6);
        }
    }

    fn ep_residual(a: f64, b: f64, c: f64, dt: f64) -> f64 {
        let w = TimeFn::constant(1.0);
        let basis = linear_basis(&w, 0.0, 1.0, dt).unwrap();
        let p = pinney_superposition(&basis, a, b, c).unwrap();
        let r = &p.rho.value;
        (1..r.len() - 1)
            .map(|i| {
                let dd = (r[i + 1] - 2.0 * r[i] + r[i - 1]) / (dt * dt);
                (dd - r[i] - p.k / r[i].powi(3)).abs()
            })
            .fold(0.0, f64::max)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn pinney_residual_is_second_order(a in 0.5f64..2.0, b in -0.4f64..0.4, c in 0.5f64..2.0) {
            let ratio = ep_residual(a, b, c, 0.02) / ep_residual(a, b, c, 0.01);
            prop_assert!((3.5..4.5).contains(&ratio), "ratio {}", ratio);
        }
    }

    #[test]
    fn alpha_examples() {
        let a = alpha_from_rho(&[1.0; 9]).unwrap();
        let times: Vec<f64> = (0..9).map(|i| i as f64 * 0.1).collect();
        assert_eq!(
            alpha_equation_residual(&times, &a, &TimeFn::zero()).unwrap(),
            0.0
        );
        let rho = [0.5, 1.0, 2.0];
        let scaled: Vec<f64> = rho.iter().map(|r| 3.0 * r).collect();
        let lhs = alpha_from_rho(&scaled).unwrap();
        let rhs = alpha_from_rho(&rho).unwrap();
        for (l, r) in lhs.iter().zip(&rhs) {
            assert_relative_eq!(*l, 9.0 * r, max_relative = 1e-15);
        }
        assert!(alpha_from_rho(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn alpha_from_ermakov_solves_third_order_equation() {
        let w = TimeFn::constant(0.25).add(&TimeFn::exp(0.1, 1.0));
        let res = |dt: f64, k: f64| {
            let p = ErmakovProblem::new(w.clone(), k, 1.0, 0.3).unwrap();
            let s = integrate_ep(&p, 0.0, 1.0, dt).unwrap();
            let a = alpha_from_rho(&s.value).unwrap();
            let fi = alpha_first_integral(&s.times, &a, &w).unwrap();
            (alpha_equation_residual(&s.times, &a, &w).unwrap(), fi)
        };
        for k in [-0.5, 0.0, 1.0] {
            let (r1, _) = res(0.02, k);
            let (r2, fi) = res(0.01, k);
            assert!(r2 < r1 / 3.0 || r2 < 1e-9, "K = {k}: {r1} {r2}");
            assert!(fi.iter().all(|v| (v - k).abs() < 1e-3), "K = {k}");
        }
    }

    #[test]
    fn ermakov_invariant_is_constant() {
        let w = TimeFn::constant(1.0).add(&TimeFn::exp(-0.3, 2.0));
        let p = ErmakovProblem::new(w.clone(), 0.8, 1.2, 0.1).unwrap();
        let rho = integrate_ep(&p, 0.0, 1.0, 1e-3).unwrap();
        let basis = linear_basis(&w, 0.0, 1.0, 1e-3).unwrap();
        for sigma in [&basis.sigma1, &basis.sigma2] {
            assert!(spread(&ermakov_invariant(&rho, sigma, p.k)) < 1e-6);
        }
    }
}
