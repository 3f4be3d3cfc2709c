use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::blockjacobi::{BlockJacobiOperator, TruncatedOperator, WavePacket};
use crate::dynamics::evolution::WINDOW_MARGIN;
use crate::error::{Error, Result};
use crate::floquet::q_norm;
use crate::linalg::{CVector, C64, ZERO};

#[derive(Debug, Clone, Serialize)]
pub struct CorollaryRecord {
    pub t: f64,
    pub n_star: i64,
    pub k_star: i64,
    pub mass: f64,
    pub threshold_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorollaryReport {
    pub q_norm: f64,
    pub epsilon: f64,
    pub k_max: i64,
    pub c_tilde: f64,
    pub records: Vec<CorollaryRecord>,
}

impl CorollaryReport {
    pub fn all_ok(&self) -> bool {
        self.c_tilde > 0.0 && self.records.iter().all(|r| r.threshold_ok)
    }
}

/// For each `T`, the largest `|<delta_n, exp(-iTJ) delta_k>|^2` over
/// `m(||Q|| - eps) T <= |n| <= m ||Q|| T + m - 1` and `|k| <= K`.
///
/// `c_tilde` is the geometric mean of `mass * T`; a record passes when
/// `mass >= c_tilde / (2T)`.
pub fn corollary_probe(
    op: &BlockJacobiOperator,
    epsilon: f64,
    t_grid: &[f64],
    k_max: i64,
) -> Result<CorollaryReport> {
    if !(epsilon > 0.0) || k_max < 0 {
        return Err(Error::InvalidSpec(format!(
            "corollary probe needs epsilon > 0 and K >= 0, got {epsilon} and {k_max}"
        )));
    }
    let qn = q_norm(op).q_norm;
    let m = op.m() as i64;
    let t_max = t_grid.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
    let k_block = k_max.div_euclid(m) + 1;
    let n = (op.norm_bound() * t_max).ceil() as i64 + k_block + WINDOW_MARGIN;
    let trunc = op.truncate(n as usize)?;
    let eig = trunc.spectral();
    let starts: Vec<(i64, CVector)> = (-k_max..=k_max)
        .map(|k| Ok((k, trunc.to_vector(&WavePacket::delta(op.m(), k))?)))
        .collect::<Result<_>>()?;
    let mut records: Vec<CorollaryRecord> = t_grid
        .par_iter()
        .map(|&t| {
            let lo = ((m as f64) * (qn - epsilon) * t).ceil().max(0.0) as i64;
            let hi = ((m as f64) * qn * t).floor() as i64 + m - 1;
            let mut best = CorollaryRecord {
                t,
                n_star: 0,
                k_star: 0,
                mass: 0.0,
                threshold_ok: false,
            };
            for (k, v) in &starts {
                let psi = eig.propagate(v, t);
                for a in lo..=hi {
                    for nn in [-a, a] {
                        if let Some(i) = trunc.scalar_index(nn) {
                            let mass = psi[i].norm_sqr();
                            if mass > best.mass {
                                best = CorollaryRecord { n_star: nn, k_star: *k, mass, ..best };
                            }
                        }
                    }
                }
            }
            best
        })
        .collect();
    let logs: Vec<f64> = records
        .iter()
        .filter(|r| r.mass > 0.0)
        .map(|r| (r.mass * r.t).ln())
        .collect();
    let c_tilde = if logs.len() == records.len() && !logs.is_empty() {
        (logs.iter().sum::<f64>() / logs.len() as f64).exp()
    } else {
        0.0
    };
    for r in &mut records {
        r.threshold_ok = c_tilde > 0.0 && r.mass >= c_tilde / (2.0 * r.t);
    }
    Ok(CorollaryReport {
        q_norm: qn,
        epsilon,
        k_max,
        c_tilde,
        records,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizationRow {
    pub l: i64,
    pub r: i64,
    pub distance: i64,
    pub sup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizationReport {
    pub rows: Vec<LocalizationRow>,
    /// Least-squares slope of `ln sup` against distance.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub localized: bool,
}

pub const LOCALIZED_SLOPE: f64 = -0.05;
pub const LOCALIZED_R2: f64 = 0.9;

/// Uniform time grid on `[0, t_max]` with step `0.2 pi / norm`.
pub fn default_time_grid(norm: f64, t_max: f64) -> Vec<f64> {
    let step = 0.2 * PI / norm.max(1e-12);
    let n = (t_max / step).ceil() as usize;
    (0..=n).map(|k| k as f64 * t_max / n.max(1) as f64).collect()
}

/// `sup_t |<delta_l, exp(-itJ) delta_r>|` over the grid for each pair of
/// scalar indices, followed by an exponential-decay fit.
pub fn localization_diagnostic(
    trunc: &TruncatedOperator,
    pairs: &[(i64, i64)],
    t_grid: &[f64],
) -> Result<LocalizationReport> {
    let eig = trunc.spectral();
    let (lo, hi) = trunc.window();
    let rows = pairs
        .par_iter()
        .map(|&(l, r)| {
            let (il, ir) = match (trunc.scalar_index(l), trunc.scalar_index(r)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::SupportOutsideWindow {
                        lo: l.min(r).div_euclid(trunc.m() as i64),
                        hi: l.max(r).div_euclid(trunc.m() as i64),
                        window_lo: lo,
                        window_hi: hi,
                    })
                }
            };
            let weights: Vec<C64> = (0..eig.dim())
                .map(|k| eig.entry(il, k) * eig.entry(ir, k).conj())
                .collect();
            let sup = t_grid
                .iter()
                .map(|&t| {
                    weights
                        .iter()
                        .zip(&eig.values)
                        .fold(ZERO, |acc, (w, lam)| acc + w * C64::from_polar(1.0, -lam * t))
                        .norm()
                })
                .fold(0.0, f64::max);
            Ok(LocalizationRow {
                l,
                r,
                distance: (r - l).abs(),
                sup,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.sup > 0.0)
        .map(|r| (r.distance as f64, r.sup.ln()))
        .collect();
    let (slope, intercept, r_squared) = linear_fit(&pts);
    Ok(LocalizationReport {
        rows,
        slope,
        intercept,
        r_squared,
        localized: slope < LOCALIZED_SLOPE && r_squared > LOCALIZED_R2,
    })
}

/// Least-squares line `y = a x + b`; returns `(a, b, R^2)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (0.0, pts.first().map_or(0.0, |p| p.1), 0.0);
    }
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|(_, y)| (y - my).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return (0.0, my, 0.0);
    }
    let a = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (a, my - a * mx, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockjacobi::BlockSpec;

    #[test]
    fn fit_recovers_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 1.5 - 0.3 * k as f64)).collect();
        let (a, b, r2) = linear_fit(&pts);
        assert!((a + 0.3).abs() < 1e-12 && (b - 1.5).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_window_covers_everything() {
        let op = BlockJacobiOperator::free_laplacian();
        let rep = corollary_probe(&op, 2.0, &[5.0, 10.0], 0).unwrap();
        assert!(rep.all_ok());
        // the scan includes n = 0 and every other site
        assert!(rep.records.iter().all(|r| r.mass > 0.0));
    }

    #[test]
    fn free_light_cone_mass() {
        let op = BlockJacobiOperator::free_laplacian();
        let times: Vec<f64> = (1..=5).map(|k| 20.0 * k as f64).collect();
        let rep = corollary_probe(&op, 0.2, &times, 0).unwrap();
        assert!((rep.q_norm - 2.0).abs() < 1e-9);
        assert!(rep.all_ok(), "{rep:?}");
        for r in &rep.records {
            let a = r.n_star.abs() as f64;
            assert!(a >= 1.8 * r.t - 1e-9 && a <= 2.0 * r.t);
        }
    }

    #[test]
    fn periodic_operators_are_not_localized() {
        for spec in [BlockSpec::free_laplacian(), BlockSpec::schrodinger(&[1.0, -1.0]).unwrap()] {
            let op = BlockJacobiOperator::new(spec).unwrap();
            let trunc = op.truncate(150).unwrap();
            let pairs: Vec<(i64, i64)> = (2..=40).map(|d| (0, d)).collect();
            let grid = default_time_grid(trunc.norm(), 40.0);
            let rep = localization_diagnostic(&trunc, &pairs, &grid).unwrap();
            assert!(!rep.localized, "{:?}", (rep.slope, rep.r_squared));
        }
    }
}
