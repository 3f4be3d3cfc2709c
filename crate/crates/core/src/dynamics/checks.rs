use rayon::prelude::*;
use serde::Serialize;

use crate::blockjacobi::{BlockJacobiOperator, TruncatedOperator, WavePacket};
use crate::dynamics::evolution::required_half_width;
use crate::error::{Error, Result};
use crate::floquet::apply_q;
use crate::linalg::{CVector, C64};
use crate::quad::simpson_weights;

fn position_vector(trunc: &TruncatedOperator, v: &CVector) -> CVector {
    let sites = trunc.row_sites();
    CVector::from_fn(v.len(), |i, _| v[i] * sites[i] as f64)
}

/// `X(t) psi = exp(itJ) X exp(-itJ) psi` on the truncation.
pub fn heisenberg_position(trunc: &TruncatedOperator, psi: &CVector, t: f64) -> CVector {
    let eig = trunc.spectral();
    let forward = eig.propagate(psi, t);
    eig.propagate(&position_vector(trunc, &forward), -t)
}

/// Default half-width for `X(t) psi`: the packet travels out and back, so
/// the front is counted twice.
pub fn heisenberg_half_width(op: &BlockJacobiOperator, t_max: f64, radius: i64) -> i64 {
    required_half_width(2.0 * op.norm_bound(), t_max, radius)
}

#[derive(Debug, Clone, Serialize)]
pub struct BallisticRow {
    pub t: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BallisticReport {
    pub rows: Vec<BallisticRow>,
    pub q_grid: usize,
    pub q_error_estimate: f64,
    pub half_width: i64,
}

impl BallisticReport {
    /// True when the errors do not increase after the first quarter of the
    /// time grid.
    pub fn decreasing_after_transient(&self) -> bool {
        let skip = self.rows.len() / 4;
        self.rows[skip..].windows(2).all(|w| w[1].error <= w[0].error)
    }
}

/// `|| X(t) psi / t - Q psi ||` for each time.
pub fn check_ballistic_limit(
    op: &BlockJacobiOperator,
    psi: &WavePacket,
    times: &[f64],
    q_grid: usize,
    half_width: Option<usize>,
) -> Result<BallisticReport> {
    let qpsi = apply_q(op, psi, q_grid)?;
    if psi.support().is_none() {
        return Ok(BallisticReport {
            rows: times.iter().map(|&t| BallisticRow { t, error: 0.0 }).collect(),
            q_grid,
            q_error_estimate: 0.0,
            half_width: 0,
        });
    }
    let t_max = times.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
    let radius = psi.radius().max(qpsi.result.radius());
    let n = half_width
        .map(|n| n as i64)
        .unwrap_or_else(|| heisenberg_half_width(op, t_max, radius));
    let trunc = op.truncate(n as usize)?;
    let required = required_half_width(trunc.norm(), t_max, radius);
    if n < required {
        return Err(Error::WindowTooSmall { required, actual: n });
    }
    let v = trunc.to_vector(psi)?;
    let target = trunc.to_vector(&qpsi.result)?;
    trunc.spectral();
    let rows = times
        .par_iter()
        .map(|&t| {
            if t == 0.0 {
                return Err(Error::InvalidSpec("ballistic check needs t != 0".into()));
            }
            let xt = heisenberg_position(&trunc, &v, t) / C64::new(t, 0.0);
            Ok(BallisticRow {
                t,
                error: (xt - &target).norm(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BallisticReport {
        rows,
        q_grid,
        q_error_estimate: qpsi.error_estimate,
        half_width: n,
    })
}

/// `|| X(T) psi - X psi - int_0^T A(t) psi dt ||` with composite Simpson
/// quadrature of `A(t) = exp(itJ) A exp(-itJ)` on `quad_steps` intervals.
pub fn check_derivative_identity(
    op: &BlockJacobiOperator,
    psi: &WavePacket,
    t_final: f64,
    quad_steps: usize,
) -> Result<f64> {
    if quad_steps < 2 || quad_steps % 2 != 0 {
        return Err(Error::InvalidSpec(format!(
            "Simpson quadrature needs an even positive step count, got {quad_steps}"
        )));
    }
    if t_final == 0.0 || psi.support().is_none() {
        return Ok(0.0);
    }
    let n = heisenberg_half_width(op, t_final, psi.radius());
    let trunc = op.truncate(n as usize)?;
    derivative_residual_on(&trunc, psi, t_final, quad_steps)
}

pub fn derivative_residual_on(
    trunc: &TruncatedOperator,
    psi: &WavePacket,
    t_final: f64,
    quad_steps: usize,
) -> Result<f64> {
    let v = trunc.to_vector(psi)?;
    let eig = trunc.spectral();
    let a = trunc.current_matrix();
    let h = t_final / quad_steps as f64;
    let weights = simpson_weights(quad_steps, h);
    let integral = weights
        .par_iter()
        .enumerate()
        .map(|(k, &w)| {
            let t = k as f64 * h;
            let forward = eig.propagate(&v, t);
            eig.propagate(&(a * forward), -t) * C64::new(w, 0.0)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(CVector::zeros(v.len()), |acc, x| acc + x);
    let lhs = heisenberg_position(trunc, &v, t_final) - position_vector(trunc, &v);
    Ok((lhs - integral).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockjacobi::BlockSpec;

    #[test]
    fn zero_packet_and_zero_time() {
        let op = BlockJacobiOperator::free_laplacian();
        let rep = check_ballistic_limit(&op, &WavePacket::zero(1), &[10.0, 20.0], 64, None).unwrap();
        assert!(rep.rows.iter().all(|r| r.error == 0.0));
        assert_eq!(check_derivative_identity(&op, &WavePacket::delta(1, 0), 0.0, 64).unwrap(), 0.0);
    }

    #[test]
    fn free_derivative_identity() {
        let op = BlockJacobiOperator::free_laplacian();
        let r = check_derivative_identity(&op, &WavePacket::delta(1, 0), 1.0, 256).unwrap();
        assert!(r < 1e-8, "residual {r}");
    }

    #[test]
    fn free_ballistic_limit() {
        let op = BlockJacobiOperator::free_laplacian();
        let rep = check_ballistic_limit(&op, &WavePacket::delta(1, 0), &[25.0, 50.0, 100.0], 64, None).unwrap();
        assert!(rep.rows[2].error < 0.05);
        assert!(rep.decreasing_after_transient());
    }

    #[test]
    fn period_two_derivative_identity() {
        let op = BlockJacobiOperator::new(BlockSpec::schrodinger(&[1.0, -1.0]).unwrap()).unwrap();
        let r = check_derivative_identity(&op, &WavePacket::delta(1, 0), 1.0, 256).unwrap();
        assert!(r < 1e-6, "residual {r}");
    }
}
