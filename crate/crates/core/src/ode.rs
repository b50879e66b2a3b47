//! Classical fourth-order Runge-Kutta for small ODE systems.

/// One RK4 step of `y' = f(t, y)`.
pub fn rk4_step<F>(f: &mut F, t: f64, y: &[f64], dt: f64) -> Vec<f64>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    let n = y.len();
    let k1 = f(t, y);
    let y2: Vec<f64> = (0..n).map(|i| y[i] + 0.5 * dt * k1[i]).collect();
    let k2 = f(t + 0.5 * dt, &y2);
    let y3: Vec<f64> = (0..n).map(|i| y[i] + 0.5 * dt * k2[i]).collect();
    let k3 = f(t + 0.5 * dt, &y3);
    let y4: Vec<f64> = (0..n).map(|i| y[i] + dt * k3[i]).collect();
    let k4 = f(t + dt, &y4);
    (0..n)
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Uniform step count covering `[t0, t1]` with steps no longer than `dt`.
pub fn step_count(t0: f64, t1: f64, dt: f64) -> usize {
    let span = t1 - t0;
    if span <= 0.0 {
        return 0;
    }
    ((span / dt) - 1e-9).ceil().max(1.0) as usize
}

/// A sampled ODE solution at uniformly spaced times.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl OdeSolution {
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }

    pub fn last(&self) -> &[f64] {
        self.states
            .last()
            .expect("solution has at least the initial state")
    }
}

/// Integrates from `t0` to `t1`, recording every step. `check` runs after each
/// step and may abort the integration.
pub fn integrate<F, C, E>(
    mut f: F,
    y0: &[f64],
    t0: f64,
    t1: f64,
    dt: f64,
    mut check: C,
) -> Result<OdeSolution, E>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
    C: FnMut(f64, &[f64]) -> Result<(), E>,
{
    let n = step_count(t0, t1, dt);
    let h = if n == 0 { 0.0 } else { (t1 - t0) / n as f64 };
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(t0);
    states.push(y0.to_vec());
    let mut y = y0.to_vec();
    for k in 0..n {
        let t = t0 + k as f64 * h;
        y = rk4_step(&mut f, t, &y, h);
        let t_next = if k + 1 == n {
            t1
        } else {
            t0 + (k + 1) as f64 * h
        };
        check(t_next, &y)?;
        times.push(t_next);
        states.push(y.clone());
    }
    Ok(OdeSolution { times, states })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_fourth_order() {
        let run = |dt: f64| {
            let sol = integrate(
                |_, y| vec![-y[0]],
                &[1.0],
                0.0,
                1.0,
                dt,
                |_, _| Ok::<(), ()>(()),
            )
            .unwrap();
            (sol.last()[0] - (-1.0f64).exp()).abs()
        };
        let ratio = run(0.1) / run(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn step_count_covers_span() {
        assert_eq!(step_count(0.0, 1.0, 1e-3), 1000);
        assert_eq!(step_count(0.0, 1.0, 0.3), 4);
        assert_eq!(step_count(0.0, 0.0, 0.1), 0);
    }
}
