//! Quadrature and one-dimensional search helpers.

use crate::error::{Error, Result};

/// Simpson weights for `steps` (even) intervals of width `h`.
pub fn simpson_weights(steps: usize, h: f64) -> Vec<f64> {
    assert!(steps >= 2 && steps % 2 == 0, "Simpson needs an even step count");
    (0..=steps)
        .map(|k| {
            let w = if k == 0 || k == steps {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

/// Adaptive Simpson integration of `f` over `[a, b]`.
///
/// Subintervals are accepted when the Richardson estimate falls below
/// `max(rel_tol * |whole| , abs_floor)` scaled to the subinterval.
pub fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
    max_depth: u32,
) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // Seed the tolerance from a coarse pass so relative accuracy refers to
    // the size of the integral, not of each panel.
    let coarse = {
        let n = 64;
        let h = (b - a) / n as f64;
        simpson_weights(n, h)
            .iter()
            .enumerate()
            .map(|(k, w)| w * f(a + k as f64 * h))
            .sum::<f64>()
    };
    let tol = (rel_tol * coarse.abs()).max(abs_floor);
    let mut failed = false;
    let value = recurse(f, a, b, fa, fm, fb, whole, tol, max_depth, &mut failed);
    if failed {
        return Err(Error::QuadratureNotConverged(format!(
            "adaptive Simpson on [{a}, {b}] exceeded depth {max_depth}"
        )));
    }
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    failed: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *failed = true;
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, failed)
        + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, failed)
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
///
/// Returns `(argmax, max)`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
