//! Map between the constant-coefficient reduced equation
//!
//! ```text
//! s_bar U_ww - ((lambda + q)/2) w U_w + 2q U - U_t = 0
//! ```
//!
//! and the free Schrödinger equation `-(hbar / 2M) Psi_chichi = i hbar^2 Psi_tau`,
//! through `U = e^{2qt} Psi(tau, chi)`, `w = sqrt(2Ms/hbar) chi e^{(lambda+q)t/2}`
//! and `d tau = -i hbar e^{-(lambda+q)t} dt`. Since `tau` is complex, only
//! closed-form wave families are used.

use num_complex::Complex64;

use super::{convergence_order, reduced_from_constants, Verdict};
use crate::coefficients::CoefficientSet;
use crate::error::{QbmError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FreeWave {
    /// `amp exp(i k chi + omega tau)`, `omega = -i k^2 / (2 M hbar)`
    PlaneWave { amp: Complex64, k: f64 },
    /// Spreading packet, equal to `amp exp(-(chi - chi0)^2 / (2 sigma^2) + i k0 (chi - chi0))` at `tau = 0`.
    Gaussian {
        amp: Complex64,
        chi0: f64,
        sigma: f64,
        k0: f64,
    },
}

impl FreeWave {
    pub fn name(&self) -> &'static str {
        match self {
            FreeWave::PlaneWave { .. } => "plane-wave",
            FreeWave::Gaussian { .. } => "gaussian-packet",
        }
    }
}

/// Evaluates a closed-form solution of the free equation at complex `tau`.
pub fn free_schrodinger(
    wave: &FreeWave,
    mass: f64,
    hbar: f64,
    tau: Complex64,
    chi: f64,
) -> Result<Complex64> {
    if !(mass > 0.0 && hbar > 0.0) {
        return Err(QbmError::InvalidParameter(format!(
            "need M > 0 and hbar > 0, got {mass}, {hbar}"
        )));
    }
    // Psi_tau = D Psi_chichi
    let d = Complex64::new(0.0, 1.0 / (2.0 * mass * hbar));
    let i = Complex64::i();
    match *wave {
        FreeWave::PlaneWave { amp, k } => {
            let omega = -d * k * k;
            Ok(amp * (i * k * chi + omega * tau).exp())
        }
        FreeWave::Gaussian {
            amp,
            chi0,
            sigma,
            k0,
        } => {
            if !(sigma > 0.0) {
                return Err(QbmError::InvalidParameter(format!(
                    "sigma must be positive, got {sigma}"
                )));
            }
            let sig2 = sigma * sigma;
            let var = sig2 + 2.0 * d * tau;
            if var.norm() <= 1e-12 * sig2 {
                return Err(QbmError::SingularEvaluation(format!(
                    "focal point at tau = {tau}"
                )));
            }
            let centre = Complex64::new(chi0, sig2 * k0);
            let dx = chi - centre;
            Ok(amp
                * (-0.5 * sig2 * k0 * k0).exp()
                * (sig2 / var).sqrt()
                * (-dx * dx / (2.0 * var)).exp())
        }
    }
}

/// `(tau, chi)` for the reduced-equation point `(t, w)`.
pub fn map_coordinates(
    cs: &CoefficientSet,
    mass: f64,
    tau0: Complex64,
    t: f64,
    w: f64,
) -> Result<(Complex64, f64)> {
    let c = cs.constants()?;
    let l = c.lambda()?;
    let nu = l + c.q;
    if nu.abs() <= 1e-12 {
        return Err(QbmError::InvalidMap("lambda + q = 0".into()));
    }
    if !(c.s > 0.0) {
        return Err(QbmError::InvalidMap(format!(
            "s = {} under the square root",
            c.s
        )));
    }
    if !(mass > 0.0) {
        return Err(QbmError::InvalidParameter(format!(
            "M must be positive, got {mass}"
        )));
    }
    let hbar = c.hbar;
    let tau = tau0 + Complex64::new(0.0, hbar / nu) * ((-nu * t).exp() - 1.0);
    let chi = w * (hbar / (2.0 * mass * c.s)).sqrt() * (-0.5 * nu * t).exp();
    Ok((tau, chi))
}

/// `U(t, w) = e^{2qt} Psi(tau(t), chi(t, w))`
pub fn schrodinger_map(
    wave: &FreeWave,
    cs: &CoefficientSet,
    mass: f64,
    tau0: Complex64,
    t: f64,
    w: f64,
) -> Result<Complex64> {
    let (tau, chi) = map_coordinates(cs, mass, tau0, t, w)?;
    let c = cs.constants()?;
    Ok((2.0 * c.q * t).exp() * free_schrodinger(wave, mass, c.hbar, tau, chi)?)
}

/// Rectangle in `(t, w)` sampled with `nt x nw` nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundtripWindow {
    pub t0: f64,
    pub t1: f64,
    pub w0: f64,
    pub w1: f64,
    pub nt: usize,
    pub nw: usize,
}

impl RoundtripWindow {
    fn validate(&self) -> Result<()> {
        if !(self.t1 > self.t0 && self.w1 > self.w0 && self.nt >= 3 && self.nw >= 3) {
            return Err(QbmError::InvalidGrid(format!(
                "bad roundtrip window {self:?}"
            )));
        }
        Ok(())
    }

    pub fn refined(&self) -> RoundtripWindow {
        RoundtripWindow {
            nt: 2 * self.nt - 1,
            nw: 2 * self.nw - 1,
            ..*self
        }
    }

    fn t(&self, k: usize) -> f64 {
        self.t0 + (self.t1 - self.t0) * k as f64 / (self.nt - 1) as f64
    }

    fn w(&self, j: usize) -> f64 {
        self.w0 + (self.w1 - self.w0) * j as f64 / (self.nw - 1) as f64
    }
}

/// Largest centred-difference residual of the printed reduced equation for
/// samples of `u` on the window, and the largest `|u|` seen.
pub fn reduced_residual(
    cs: &CoefficientSet,
    window: &RoundtripWindow,
    u: impl Fn(f64, f64) -> Result<Complex64>,
) -> Result<(f64, f64)> {
    window.validate()?;
    let rc = reduced_from_constants(cs)?;
    let (s_bar, drift, reaction) = rc.eval(0.0);
    let (nt, nw) = (window.nt, window.nw);
    let ht = (window.t1 - window.t0) / (nt - 1) as f64;
    let hw = (window.w1 - window.w0) / (nw - 1) as f64;
    let mut vals = vec![Complex64::new(0.0, 0.0); nt * nw];
    let mut max_abs: f64 = 0.0;
    for k in 0..nt {
        for j in 0..nw {
            let v = u(window.t(k), window.w(j))?;
            max_abs = max_abs.max(v.norm());
            vals[k * nw + j] = v;
        }
    }
    let at = |k: usize, j: usize| vals[k * nw + j];
    let mut worst: f64 = 0.0;
    for k in 1..nt - 1 {
        for j in 1..nw - 1 {
            let w = window.w(j);
            let uww = (at(k, j + 1) - at(k, j) * 2.0 + at(k, j - 1)) / (hw * hw);
            let uw = (at(k, j + 1) - at(k, j - 1)) / (2.0 * hw);
            let ut = (at(k + 1, j) - at(k - 1, j)) / (2.0 * ht);
            let r = uww * s_bar - uw * (drift * w) + at(k, j) * reaction - ut;
            worst = worst.max(r.norm());
        }
    }
    Ok((worst, max_abs))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundtripLevel {
    pub nt: usize,
    pub nw: usize,
    pub residual: f64,
    pub max_abs_u: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundtripReport {
    pub wave: &'static str,
    pub mass: f64,
    pub tau0: Complex64,
    pub s_bar: f64,
    /// Coefficient `(s_bar hbar / s - 1) / (2M)` of `Psi_chichi` left after
    /// substituting the map into the reduced equation; the map is exact
    /// only when it vanishes.
    pub consistency_defect: f64,
    pub levels: [RoundtripLevel; 2],
    pub order: f64,
    /// Residual on the finer level.
    pub plateau: f64,
    pub verdict: Verdict,
}

/// Samples the mapped wave at two refinement levels and measures the
/// convergence of the reduced-equation residual.
pub fn verify_roundtrip(
    wave: &FreeWave,
    cs: &CoefficientSet,
    mass: f64,
    tau0: Complex64,
    window: &RoundtripWindow,
) -> Result<RoundtripReport> {
    let c = cs.constants()?;
    let s_bar = reduced_from_constants(cs)?.diffusion.eval(0.0);
    let u = |t: f64, w: f64| schrodinger_map(wave, cs, mass, tau0, t, w);
    let mut levels = Vec::with_capacity(2);
    for win in [*window, window.refined()] {
        let (residual, max_abs_u) = reduced_residual(cs, &win, u)?;
        levels.push(RoundtripLevel {
            nt: win.nt,
            nw: win.nw,
            residual,
            max_abs_u,
        });
    }
    let order = convergence_order(levels[0].residual, levels[1].residual);
    Ok(RoundtripReport {
        wave: wave.name(),
        mass,
        tau0,
        s_bar,
        consistency_defect: (s_bar * c.hbar / c.s - 1.0) / (2.0 * mass),
        levels: [levels[0], levels[1]],
        order,
        plateau: levels[1].residual,
        verdict: Verdict::from_order(order),
    })
}
