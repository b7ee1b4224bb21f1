//! Adaptive Gauss-Kronrod quadrature for the exponential-sum integrands that
//! arise from two-photon detection densities.

use crate::error::{Error, Result};

// 7-point Gauss / 15-point Kronrod pair on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let fsum = f(mid - dx) + f(mid + dx);
        kronrod += WGK[i] * fsum;
        if i % 2 == 1 {
            gauss += WG[i / 2] * fsum;
        }
    }
    kronrod *= half;
    gauss *= half;
    ((kronrod), (kronrod - gauss).abs())
}

/// Integrates `f` over [a, b], subdividing until the per-interval error
/// estimates sum below `max(abs_tol, rel_tol * |integral|)`.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_INTERVALS: usize = 4096;
    // (a, b, value, error), kept as a worst-first work list.
    let (v0, e0) = gk15(&mut f, a, b);
    let mut intervals = vec![(a, b, v0, e0)];
    loop {
        let total: f64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        let tol = abs_tol.max(rel_tol * total.abs());
        if err <= tol {
            return Ok(total);
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureNoConverge { err, tol });
        }
        let (worst_idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty interval list");
        let (lo, hi, _, _) = intervals.swap_remove(worst_idx);
        let mid = 0.5 * (lo + hi);
        let left = gk15(&mut f, lo, mid);
        let right = gk15(&mut f, mid, hi);
        intervals.push((lo, mid, left.0, left.1));
        intervals.push((mid, hi, right.0, right.1));
    }
}

/// Integrates `f(t1, t2)` over the ordered wedge 0 <= t1 <= t2 <= horizon by
/// nesting two adaptive passes.
pub fn integrate_ordered_2d(
    f: impl Fn(f64, f64) -> f64,
    horizon: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    let inner_abs = abs_tol / horizon.max(1.0) * 0.1;
    let mut failed = None;
    let outer = integrate(
        |t1| {
            match integrate(|dt| f(t1, t1 + dt), 0.0, horizon - t1, inner_abs, rel_tol * 0.1) {
                Ok(v) => v,
                Err(e) => {
                    failed.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        horizon,
        abs_tol,
        rel_tol,
    );
    match failed {
        Some(e) => Err(e),
        None => outer,
    }
}
