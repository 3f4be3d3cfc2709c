use std::f64::consts::PI;

use rayon::prelude::*;

use crate::blockjacobi::{BlockJacobiOperator, WavePacket};
use crate::error::{Error, Result};
use crate::floquet::bands::MIN_GRID;
use crate::floquet::fiber::build_fiber;
use crate::linalg::{CVector, C64, ZERO};

/// Coefficients below this modulus are dropped from `Q psi`.
pub const COEFF_TOL: f64 = 1e-12;
pub const DEFAULT_Q_GRID: usize = 512;
pub const MAX_Q_GRID: usize = 16384;

/// `(F u)(theta)` with `(F u)_k(theta) = sum_l u_{k + l q} e^{-i l theta}`,
/// stacked as an `m q` vector.
pub fn fourier_transform(q: usize, u: &WavePacket, theta: f64) -> CVector {
    let m = u.m();
    let mut out = CVector::from_element(m * q, ZERO);
    for (site, c, z) in u.entries() {
        if z == ZERO {
            continue;
        }
        let k = site.rem_euclid(q as i64) as usize;
        let l = site.div_euclid(q as i64);
        out[k * m + c] += z * C64::from_polar(1.0, -(l as f64) * theta);
    }
    out
}

/// `|(1/G) sum_theta ||F psi(theta)||^2 - ||psi||^2|` on the uniform grid.
pub fn parseval_check(q: usize, psi: &WavePacket, grid: usize) -> f64 {
    let h = 2.0 * PI / grid as f64;
    let quad: f64 = (0..grid)
        .map(|t| fourier_transform(q, psi, t as f64 * h).norm_squared())
        .sum::<f64>()
        / grid as f64;
    (quad - psi.norm_sqr()).abs()
}

/// Result of applying the asymptotic velocity operator.
#[derive(Debug, Clone)]
pub struct QApplication {
    pub result: WavePacket,
    pub grid: usize,
    /// `||Q_G psi - Q_{G/2} psi||`.
    pub error_estimate: f64,
    /// Squared norm of the dropped coefficients.
    pub tail_mass: f64,
    pub parseval_residual: f64,
}

fn inverse_transform(
    q: usize,
    m: usize,
    samples: &[CVector],
    stride: usize,
    l_centre: i64,
) -> WavePacket {
    let g = samples.len() / stride;
    let lo = l_centre - (g / 2) as i64;
    let twiddle: Vec<C64> = (0..g)
        .map(|s| C64::from_polar(1.0, 2.0 * PI * s as f64 / g as f64))
        .collect();
    let d = m * q;
    let blocks: Vec<Vec<C64>> = (0..g)
        .into_par_iter()
        .map(|i| {
            let l = lo + i as i64;
            let mut acc = vec![ZERO; d];
            for t in 0..g {
                let w = twiddle[(l * t as i64).rem_euclid(g as i64) as usize];
                let s = &samples[t * stride];
                for (a, z) in acc.iter_mut().zip(s.iter()) {
                    *a += w * z;
                }
            }
            acc.iter().map(|z| z / g as f64).collect()
        })
        .collect();
    let data: Vec<C64> = blocks.into_iter().flatten().collect();
    WavePacket::new(m, lo * q as i64, data).expect("whole blocks")
}

/// `Q psi` via the fiber matrices `Q_theta` on a uniform grid of `grid`
/// points (trapezoid rule in `theta`).
pub fn apply_q(op: &BlockJacobiOperator, psi: &WavePacket, grid: usize) -> Result<QApplication> {
    if grid < MIN_GRID || grid % 2 != 0 {
        return Err(Error::GridTooCoarse(format!(
            "Q quadrature needs an even grid of at least {MIN_GRID} points, got {grid}"
        )));
    }
    let (q, m) = (op.q(), op.m());
    if psi.m() != m {
        return Err(Error::DimensionMismatch(format!(
            "packet block size {} differs from operator block size {m}",
            psi.m()
        )));
    }
    let Some((slo, shi)) = psi.support() else {
        return Ok(QApplication {
            result: WavePacket::zero(m),
            grid,
            error_estimate: 0.0,
            tail_mass: 0.0,
            parseval_residual: 0.0,
        });
    };
    let h = 2.0 * PI / grid as f64;
    let samples: Vec<CVector> = (0..grid)
        .into_par_iter()
        .map(|t| {
            let theta = t as f64 * h;
            build_fiber(op, theta).q_matrix() * fourier_transform(q, psi, theta)
        })
        .collect();
    let l_centre = (slo + shi).div_euclid(2).div_euclid(q as i64);
    let fine = inverse_transform(q, m, &samples, 1, l_centre);
    let coarse = inverse_transform(q, m, &samples, 2, l_centre);
    let error_estimate = fine.sub(&coarse).norm();
    let (result, tail_mass) = fine.thresholded(COEFF_TOL);
    Ok(QApplication {
        result,
        grid,
        error_estimate,
        tail_mass,
        parseval_residual: parseval_check(q, psi, grid),
    })
}

/// Doubles the grid from [`DEFAULT_Q_GRID`] until both the error estimate
/// and the Parseval residual are below `tol`.
pub fn apply_q_to_tolerance(op: &BlockJacobiOperator, psi: &WavePacket, tol: f64) -> Result<QApplication> {
    let mut grid = DEFAULT_Q_GRID;
    loop {
        let out = apply_q(op, psi, grid)?;
        if out.error_estimate <= tol && out.parseval_residual <= tol {
            return Ok(out);
        }
        if grid >= MAX_Q_GRID {
            return Err(Error::GridTooCoarse(format!(
                "Q quadrature error {:e} above {tol:e} at the largest grid {grid}",
                out.error_estimate
            )));
        }
        grid *= 2;
    }
}

/// `<psi, f(Q) psi>` by the trapezoid rule over `theta`.
pub fn q_expectation(
    op: &BlockJacobiOperator,
    psi: &WavePacket,
    grid: usize,
    f: impl Fn(f64) -> f64 + Sync,
) -> f64 {
    let h = 2.0 * PI / grid as f64;
    let q = op.q();
    (0..grid)
        .into_par_iter()
        .map(|t| {
            let theta = t as f64 * h;
            let fib = build_fiber(op, theta);
            let coeffs = fib.vectors.adjoint() * fourier_transform(q, psi, theta);
            coeffs
                .iter()
                .zip(&fib.velocities)
                .map(|(c, &v)| c.norm_sqr() * f(v))
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum::<f64>()
        / grid as f64
}
