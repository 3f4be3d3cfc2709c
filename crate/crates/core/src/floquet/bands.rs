use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::blockjacobi::BlockJacobiOperator;
use crate::error::{Error, Result};
use crate::floquet::fiber::{build_fiber, FloquetFiber};
use crate::linalg::CMatrix;
use crate::quad::golden_max;

/// Grid points whose smallest eigenvalue gap is below this are flagged.
pub const GAP_TOL: f64 = 1e-8;
pub const MIN_GRID: usize = 16;

/// Band curves on a uniform grid `theta_k = 2 pi k / G`, matched for
/// continuity. `bands[j][k]` is band `j` at grid point `k`.
#[derive(Debug, Clone, Serialize)]
pub struct BandStructure {
    pub q: usize,
    pub theta: Vec<f64>,
    pub bands: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub degenerate: Vec<bool>,
    /// Band `j` leaving the grid after `2 pi - h` continues as band `wrap[j]`
    /// at `theta = 0`.
    pub wrap: Vec<usize>,
}

fn overlap_assignment(prev: &CMatrix, cur: &CMatrix) -> Vec<usize> {
    // greedy: repeatedly take the largest remaining |<prev_j, cur_l>|
    let d = prev.ncols();
    let ov = prev.adjoint() * cur;
    let mut pairs: Vec<(f64, usize, usize)> = (0..d)
        .flat_map(|j| (0..d).map(move |l| (j, l)))
        .map(|(j, l)| (ov[(j, l)].norm_sqr(), j, l))
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut assign = vec![usize::MAX; d];
    let mut used = vec![false; d];
    for (_, j, l) in pairs {
        if assign[j] == usize::MAX && !used[l] {
            assign[j] = l;
            used[l] = true;
        }
    }
    assign
}

fn permute_columns(v: &CMatrix, order: &[usize]) -> CMatrix {
    CMatrix::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, order[c])])
}

pub fn band_structure(op: &BlockJacobiOperator, grid: usize) -> Result<BandStructure> {
    if grid < MIN_GRID {
        return Err(Error::GridTooCoarse(format!(
            "band grid of {grid} points is below the minimum {MIN_GRID}"
        )));
    }
    let h = 2.0 * PI / grid as f64;
    let fibers: Vec<FloquetFiber> = (0..grid)
        .into_par_iter()
        .map(|k| build_fiber(op, k as f64 * h))
        .collect();
    let d = fibers[0].dim();
    let mut order: Vec<Vec<usize>> = Vec::with_capacity(grid);
    order.push((0..d).collect());
    let mut reference = fibers[0].vectors.clone();
    for f in &fibers[1..] {
        let assign = overlap_assignment(&reference, &f.vectors);
        reference = permute_columns(&f.vectors, &assign);
        order.push(assign);
    }
    let wrap = overlap_assignment(&reference, &fibers[0].vectors);

    let degenerate: Vec<bool> = fibers.iter().map(|f| f.min_gap() < GAP_TOL).collect();
    let mut bands = vec![vec![0.0; grid]; d];
    let mut velocities = vec![vec![0.0; grid]; d];
    for (k, f) in fibers.iter().enumerate() {
        for j in 0..d {
            bands[j][k] = f.values[order[k][j]];
            velocities[j][k] = f.velocities[order[k][j]];
        }
    }
    let mut bs = BandStructure {
        q: op.q(),
        theta: (0..grid).map(|k| k as f64 * h).collect(),
        bands,
        velocities,
        degenerate,
        wrap,
    };
    for k in 0..grid {
        if bs.degenerate[k] {
            for j in 0..d {
                bs.velocities[j][k] = bs.fd_velocity(j, k);
            }
        }
    }
    Ok(bs)
}

impl BandStructure {
    pub fn grid(&self) -> usize {
        self.theta.len()
    }

    pub fn num_bands(&self) -> usize {
        self.bands.len()
    }

    fn step(&self) -> f64 {
        2.0 * PI / self.grid() as f64
    }

    /// Value of band `j` at grid index `k`, continued periodically through
    /// the wrap permutation (valid for `|k|` up to a few grids).
    pub fn band_at(&self, j: usize, k: i64) -> f64 {
        let g = self.grid() as i64;
        let mut band = j;
        let mut idx = k;
        while idx >= g {
            band = self.wrap[band];
            idx -= g;
        }
        while idx < 0 {
            band = self.wrap.iter().position(|&w| w == band).expect("permutation");
            idx += g;
        }
        self.bands[band][idx as usize]
    }

    /// Five-point central difference of band `j` at grid index `k`, scaled
    /// by `q`.
    pub fn fd_velocity(&self, j: usize, k: usize) -> f64 {
        let k = k as i64;
        let f = |o: i64| self.band_at(j, k + o);
        let slope = (-f(2) + 8.0 * f(1) - 8.0 * f(-1) + f(-2)) / (12.0 * self.step());
        self.q as f64 * slope
    }

    /// `(min, max)` of each band.
    pub fn band_ranges(&self) -> Vec<(f64, f64)> {
        self.bands
            .iter()
            .map(|b| {
                b.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
            })
            .collect()
    }

    /// Number of sign changes of `lambda_j(theta) - level` around the
    /// circle, summed over bands.
    pub fn level_crossings(&self, level: f64) -> usize {
        let g = self.grid() as i64;
        (0..self.num_bands())
            .map(|j| {
                (0..g)
                    .filter(|&k| {
                        let a = self.band_at(j, k) - level;
                        let b = self.band_at(j, k + 1) - level;
                        (a < 0.0) != (b < 0.0)
                    })
                    .count()
            })
            .sum()
    }
}

/// Location and value of `||Q|| = sup_{j, theta} |q lambda_j'(theta)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QNorm {
    pub q_norm: f64,
    pub argmax_theta: f64,
    pub argmax_band: usize,
}

pub const QNORM_GRID: usize = 512;

pub fn q_norm(op: &BlockJacobiOperator) -> QNorm {
    q_norm_with_grid(op, QNORM_GRID)
}

/// Coarse scan followed by golden-section refinement in the two cells
/// around the best grid point.
pub fn q_norm_with_grid(op: &BlockJacobiOperator, grid: usize) -> QNorm {
    let h = 2.0 * PI / grid as f64;
    let speeds: Vec<(f64, usize)> = (0..grid)
        .into_par_iter()
        .map(|k| build_fiber(op, k as f64 * h).max_speed())
        .collect();
    let (k_best, &(coarse, band)) = speeds
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, &(f64, usize))>, (k, s)| match best {
            Some((_, b)) if b.0 >= s.0 => best,
            _ => Some((k, s)),
        })
        .expect("non-empty grid");
    let centre = k_best as f64 * h;
    let speed = |t: f64| build_fiber(op, t).max_speed().0;
    let (t_ref, v_ref) = golden_max(speed, centre - h, centre + h, 1e-10);
    if v_ref > coarse {
        let theta = t_ref.rem_euclid(2.0 * PI);
        QNorm {
            q_norm: v_ref,
            argmax_theta: theta,
            argmax_band: build_fiber(op, theta).max_speed().1,
        }
    } else {
        QNorm {
            q_norm: coarse,
            argmax_theta: centre,
            argmax_band: band,
        }
    }
}
