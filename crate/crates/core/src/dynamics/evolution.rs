use rayon::prelude::*;
use serde::Serialize;

use crate::blockjacobi::{BlockJacobiOperator, TruncatedOperator, WavePacket};
use crate::error::{Error, Result};

/// Extra block sites kept beyond the ballistic front.
pub const WINDOW_MARGIN: i64 = 20;
/// Number of outermost block sites on each side counted as leaked mass.
pub const EDGE_SITES: i64 = 10;
/// Samples with more leaked mass than this are rejected.
pub const TAIL_TOL: f64 = 1e-8;

/// `ceil(norm * |t|) + radius + WINDOW_MARGIN`.
pub fn required_half_width(norm: f64, t: f64, radius: i64) -> i64 {
    (norm * t.abs()).ceil() as i64 + radius + WINDOW_MARGIN
}

/// Half-width used for moment trajectories: the margin rule with a 10%
/// larger front and a doubled margin, which keeps the edge mass below
/// [`TAIL_TOL`].
pub fn trajectory_half_width(op: &BlockJacobiOperator, t_max: f64, radius: i64) -> i64 {
    let bound = op.norm_bound();
    let generous = (1.1 * bound * t_max).ceil() as i64 + radius + 2 * WINDOW_MARGIN;
    generous.max(required_half_width(bound, t_max, radius))
}

/// `psi(t) = exp(-i t J) psi` on the truncation.
pub fn evolve(trunc: &TruncatedOperator, psi: &WavePacket, t: f64) -> Result<WavePacket> {
    let radius = psi.radius();
    let required = required_half_width(trunc.norm(), t, radius);
    if trunc.half_width() < required {
        return Err(Error::WindowTooSmall {
            required,
            actual: trunc.half_width(),
        });
    }
    trunc.propagate(psi, t)
}

/// `sum_n |site(n)|^p |psi_n|^2`.
pub fn moment(psi: &WavePacket, p: f64) -> f64 {
    psi.entries()
        .map(|(site, _, z)| {
            let s = site.unsigned_abs() as f64;
            if s == 0.0 { 0.0 } else { s.powf(p) * z.norm_sqr() }
        })
        .sum()
}

/// Mass on the outermost [`EDGE_SITES`] block sites of the window.
pub fn edge_mass(trunc: &TruncatedOperator, psi: &WavePacket) -> f64 {
    let (lo, hi) = trunc.window();
    psi.entries()
        .filter(|(s, _, _)| *s < lo + EDGE_SITES || *s > hi - EDGE_SITES)
        .map(|(_, _, z)| z.norm_sqr())
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentTrajectory {
    pub p: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub truncation_tail: Vec<f64>,
    /// Times dropped because their tail exceeded [`TAIL_TOL`].
    pub rejected: Vec<f64>,
    pub half_width: i64,
}

/// Moments `<psi(t), |X|^p psi(t)>` over `times` on an automatically sized
/// window.
pub fn moment_trajectory(
    op: &BlockJacobiOperator,
    psi: &WavePacket,
    p: f64,
    times: &[f64],
) -> Result<MomentTrajectory> {
    if !(p > 0.0) {
        return Err(Error::InvalidSpec(format!("moment order must be positive, got {p}")));
    }
    let t_max = times.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
    let n = trajectory_half_width(op, t_max, psi.radius());
    let trunc = op.truncate(n as usize)?;
    moment_trajectory_on(&trunc, psi, p, times)
}

pub fn moment_trajectory_on(
    trunc: &TruncatedOperator,
    psi: &WavePacket,
    p: f64,
    times: &[f64],
) -> Result<MomentTrajectory> {
    let samples: Vec<(f64, f64)> = times
        .par_iter()
        .map(|&t| {
            let pt = evolve(trunc, psi, t)?;
            Ok((moment(&pt, p), edge_mass(trunc, &pt)))
        })
        .collect::<Result<_>>()?;
    let mut out = MomentTrajectory {
        p,
        times: Vec::new(),
        values: Vec::new(),
        truncation_tail: Vec::new(),
        rejected: Vec::new(),
        half_width: trunc.half_width(),
    };
    for (&t, (value, tail)) in times.iter().zip(samples) {
        if tail < TAIL_TOL {
            out.times.push(t);
            out.values.push(value);
            out.truncation_tail.push(tail);
        } else {
            out.rejected.push(t);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentEstimate {
    pub beta_plus_hat: f64,
    pub beta_minus_hat: f64,
    pub fit_window: (f64, f64),
    /// RMS residual of the straight-line fit of `log moment / p` against `log t`.
    pub residual: f64,
    /// Slope between consecutive samples, attached to the later time.
    pub running_slopes: Vec<f64>,
}

/// Estimates `beta^+` and `beta^-` as the largest and smallest slope of
/// `log moment / p` between consecutive samples in `log t`.
pub fn exponents_from_trajectory(traj: &MomentTrajectory) -> Result<ExponentEstimate> {
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.values)
        .filter(|(t, v)| **t > 0.0 && **v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln() / traj.p))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidSpec(
            "exponent fit needs at least two accepted positive samples".into(),
        ));
    }
    let slopes: Vec<f64> = pts
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let clamp = |x: f64| x.clamp(0.0, 1.2);
    let plus = clamp(slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let minus = clamp(slopes.iter().copied().fold(f64::INFINITY, f64::min));
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let residual = (pts
        .iter()
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ExponentEstimate {
        beta_plus_hat: plus,
        beta_minus_hat: minus.min(plus),
        fit_window: (pts[0].0.exp(), pts[pts.len() - 1].0.exp()),
        residual,
        running_slopes: slopes,
    })
}

pub fn transport_exponents(
    op: &BlockJacobiOperator,
    psi: &WavePacket,
    p: f64,
    times: &[f64],
) -> Result<(MomentTrajectory, ExponentEstimate)> {
    let traj = moment_trajectory(op, psi, p, times)?;
    let est = exponents_from_trajectory(&traj)?;
    Ok((traj, est))
}

/// `n` geometrically spaced times from `t0` to `t1` inclusive.
pub fn geometric_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t0];
    }
    let r = (t1 / t0).ln() / (n - 1) as f64;
    (0..n).map(|k| t0 * (r * k as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockjacobi::BlockSpec;
    use crate::linalg::C64;
    use proptest::prelude::*;

    /// `J_n(x)` by its power series (small arguments only).
    fn bessel_series(n: u32, x: f64) -> f64 {
        let mut term = (x / 2.0).powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
        let mut sum = term;
        for k in 1..40 {
            term *= -(x * x / 4.0) / (k as f64 * (k + n) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn free_propagator_matches_bessel() {
        let op = BlockJacobiOperator::free_laplacian();
        let trunc = op.truncate(40).unwrap();
        let psi = evolve(&trunc, &WavePacket::delta(1, 0), 0.5).unwrap();
        let want = bessel_series(1, 1.0).abs();
        assert!((want - 0.44005).abs() < 1e-5);
        assert!((psi.scalar(1).norm() - want).abs() < 1e-12);
        assert!((psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_time_is_identity_and_margin_is_enforced() {
        let trunc = BlockJacobiOperator::free_laplacian().truncate(25).unwrap();
        let psi = WavePacket::delta(1, 2);
        assert!(evolve(&trunc, &psi, 0.0).unwrap().sub(&psi).norm() < 1e-14);
        assert!(matches!(
            evolve(&trunc, &psi, 5.0),
            Err(Error::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn moment_examples() {
        assert_eq!(moment(&WavePacket::delta(1, 0), 3.0), 0.0);
        assert!((moment(&WavePacket::delta(1, 5), 2.0) - 25.0).abs() < 1e-14);
        let s = 0.5_f64.sqrt();
        let psi = WavePacket::from_scalars(1, &[(-1, C64::new(s, 0.0)), (1, C64::new(s, 0.0))]);
        assert!((moment(&psi, 1.0) - 1.0).abs() < 1e-14);
        // block convention: scalar 3 with m = 2 lives on block site 1
        assert!((moment(&WavePacket::delta(2, 3), 2.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_shift_leaves_moments_unchanged() {
        let times = [1.0, 3.0, 7.0];
        let psi = WavePacket::delta(1, 0);
        let free = moment_trajectory(&BlockJacobiOperator::free_laplacian(), &psi, 2.0, &times).unwrap();
        let shifted = BlockJacobiOperator::new(BlockSpec::scalar(&[1.0], &[2.5]).unwrap()).unwrap();
        let sh = moment_trajectory(&shifted, &psi, 2.0, &times).unwrap();
        for (a, b) in free.values.iter().zip(&sh.values) {
            assert!((a - b).abs() < 1e-9 * a.max(1.0));
        }
    }

    #[test]
    fn free_second_moment_is_two_t_squared() {
        let times = geometric_times(1.0, 30.0, 6);
        let traj = moment_trajectory(&BlockJacobiOperator::free_laplacian(), &WavePacket::delta(1, 0), 2.0, &times)
            .unwrap();
        assert!(traj.rejected.is_empty());
        for (t, v) in traj.times.iter().zip(&traj.values) {
            assert!((v - 2.0 * t * t).abs() < 1e-8 * t * t);
        }
        let est = exponents_from_trajectory(&traj).unwrap();
        assert!((est.beta_plus_hat - 1.0).abs() < 1e-8);
        assert!(est.beta_minus_hat <= est.beta_plus_hat);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn unitarity_and_time_reversal(
            v in proptest::collection::vec(-2.0f64..2.0, 1..4),
            t in -6.0f64..6.0,
            z in (-1.0f64..1.0, -1.0f64..1.0),
        ) {
            let op = BlockJacobiOperator::new(BlockSpec::schrodinger(&v).unwrap()).unwrap();
            let psi = WavePacket::from_scalars(1, &[(0, C64::new(1.0, 0.0)), (1, C64::new(z.0, z.1))]);
            let n = required_half_width(op.norm_bound(), t, 1) as usize;
            let trunc = op.truncate(n).unwrap();
            let pt = evolve(&trunc, &psi, t).unwrap();
            prop_assert!((pt.norm() - psi.norm()).abs() < 1e-10);
            let back = trunc.propagate(&pt, -t).unwrap();
            prop_assert!(back.sub(&psi).norm() < 1e-10);
        }
    }
}
