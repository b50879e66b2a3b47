//! Local four-point cubic (Lagrange) interpolation on uniform axes.

/// Stencil start index and weights for nodes `start..start + 4`.
///
/// `u` is the fractional node coordinate `(x - x_min) / h` on an axis with
/// `n >= 4` nodes. Queries that land on a node (to rounding) return a unit
/// weight on that node so interpolation is exact there.
pub(crate) fn cubic_stencil(u: f64, n: usize) -> (usize, [f64; 4]) {
    debug_assert!(n >= 4);
    let nearest = u.round();
    let tol = 8.0 * f64::EPSILON * u.abs().max(1.0);
    if (u - nearest).abs() <= tol && nearest >= 0.0 && (nearest as usize) < n {
        let k = nearest as usize;
        let start = k.saturating_sub(1).min(n - 4);
        let mut w = [0.0; 4];
        w[k - start] = 1.0;
        return (start, w);
    }
    let base = (u.floor().max(0.0) as usize).clamp(1, n - 3);
    let start = base - 1;
    let s = u - base as f64;
    (start, lagrange4(s))
}

/// Weights for nodes at offsets -1, 0, 1, 2 evaluated at offset `s`.
fn lagrange4(s: f64) -> [f64; 4] {
    let sm1 = s - 1.0;
    let sm2 = s - 2.0;
    let sp1 = s + 1.0;
    [
        -s * sm1 * sm2 / 6.0,
        sp1 * sm1 * sm2 / 2.0,
        -sp1 * s * sm2 / 2.0,
        sp1 * s * sm1 / 6.0,
    ]
}
