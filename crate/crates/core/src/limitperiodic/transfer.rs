use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockjacobi::{BlockJacobiOperator, BlockSpec};
use crate::error::{Error, Result};
use crate::floquet::band_structure;
use crate::linalg::{det2x2, mul2x2, norm2x2, C64, ONE, ZERO};
use crate::quad::adaptive_simpson;

type M2 = [[C64; 2]; 2];

/// Entries are rescaled by an exact power of two once they exceed this.
const RESCALE_AT: f64 = 1.8446744073709552e19; // 2^64

/// `Phi(n, E, w) = T_{n-1} ... T_0` with `T_j = [[E - w_j, -1], [1, 0]]`,
/// stored as `2^k * matrix` so long products do not overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferProduct {
    pub n: usize,
    pub energy: C64,
    /// Rescaled product; the true product is `exp(log_scale) * matrix`.
    pub matrix: M2,
    pub log_scale: f64,
}

impl TransferProduct {
    fn identity(energy: C64) -> Self {
        Self {
            n: 0,
            energy,
            matrix: [[ONE, ZERO], [ZERO, ONE]],
            log_scale: 0.0,
        }
    }

    /// Left-multiplies by the one-step matrix with potential value `w`.
    fn step(&mut self, w: f64) {
        let t = [[self.energy - w, -ONE], [ONE, ZERO]];
        self.matrix = mul2x2(&t, &self.matrix);
        self.n += 1;
        let big = self.matrix.iter().flatten().fold(0.0_f64, |a, z| a.max(z.re.abs()).max(z.im.abs()));
        if big > RESCALE_AT {
            let k = big.log2().floor() as i32;
            let s = 2f64.powi(-k);
            for z in self.matrix.iter_mut().flatten() {
                *z *= s;
            }
            self.log_scale += k as f64 * std::f64::consts::LN_2;
        }
    }

    /// `log ||Phi||` with the spectral norm.
    pub fn log_norm(&self) -> f64 {
        norm2x2(&self.matrix).ln() + self.log_scale
    }

    /// `||Phi||`, possibly `inf` for very long products.
    pub fn norm(&self) -> f64 {
        self.log_norm().exp()
    }

    /// The unscaled product, when it is representable.
    pub fn full_matrix(&self) -> Option<M2> {
        let s = self.log_scale.exp();
        s.is_finite().then(|| self.matrix.map(|row| row.map(|z| z * s)))
    }

    /// `|det Phi - 1| / max(1, ||Phi||^2)`. Roundoff in `det` scales with
    /// `||Phi||^2`, so this is the attainable accuracy measure.
    pub fn det_defect(&self) -> f64 {
        let inv = (-2.0 * self.log_scale).exp();
        let n2 = norm2x2(&self.matrix).powi(2);
        (det2x2(&self.matrix) - inv).norm() / n2.max(inv)
    }

    /// Spectral radius of `Phi` as a logarithm. `det Phi = 1`, so this is
    /// the larger eigenvalue modulus and is `>= 0`.
    pub fn log_spectral_radius(&self) -> f64 {
        let m = &self.matrix;
        let tr = m[0][0] + m[1][1];
        let det = det2x2(m);
        let disc = (tr * tr - det * 4.0).sqrt();
        let rho = ((tr + disc) * 0.5).norm().max(((tr - disc) * 0.5).norm());
        (rho.ln() + self.log_scale).max(0.0)
    }
}

/// `Phi(n, E, w)` from the first `n` entries of `w`.
pub fn transfer_matrix(n: usize, energy: C64, w: &[f64]) -> Result<TransferProduct> {
    if n == 0 {
        return Err(Error::InvalidSpec("transfer matrix needs n >= 1".into()));
    }
    if w.len() < n {
        return Err(Error::WindowTooShort { len: w.len(), needed: n });
    }
    let mut phi = TransferProduct::identity(energy);
    for &wj in &w[..n] {
        phi.step(wj);
    }
    Ok(phi)
}

/// `L(n, E, w) = log ||Phi(n, E, w)|| / n`.
pub fn finite_lyapunov(n: usize, energy: C64, w: &[f64]) -> Result<f64> {
    Ok((transfer_matrix(n, energy, w)?.log_norm() / n as f64).max(0.0))
}

/// `w` repeated to length `n`.
pub fn periodic_window(period: &[f64], n: usize) -> Vec<f64> {
    period.iter().copied().cycle().take(n).collect()
}

/// Finite family of potentials sharing a common period `p`; each member
/// is stored as one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialFamily {
    pub members: Vec<Vec<f64>>,
    pub p: usize,
}

impl PotentialFamily {
    pub fn new(members: Vec<Vec<f64>>) -> Result<Self> {
        let p = members.first().map_or(0, Vec::len);
        if p == 0 {
            return Err(Error::InvalidSpec("potential family needs a non-empty first member".into()));
        }
        if let Some(w) = members.iter().find(|w| w.len() != p) {
            return Err(Error::InvalidSpec(format!(
                "family members must share the period {p}, found length {}",
                w.len()
            )));
        }
        if members.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec("non-finite potential value".into()));
        }
        Ok(Self { members, p })
    }
}

/// `L(n, E, W)`: the average of `L(n, E, w)` over the family, each member
/// extended periodically.
pub fn family_lyapunov(n: usize, energy: C64, family: &PotentialFamily) -> Result<f64> {
    let sum = family
        .members
        .iter()
        .map(|w| finite_lyapunov(n, energy, &periodic_window(w, n)))
        .sum::<Result<f64>>()?;
    Ok(sum / family.members.len() as f64)
}

/// Lyapunov exponent of a periodic potential: `log rho(Phi(p, E, w)) / p`.
pub fn periodic_lyapunov(energy: C64, period: &[f64]) -> Result<f64> {
    let phi = transfer_matrix(period.len(), energy, period)?;
    Ok(phi.log_spectral_radius() / period.len() as f64)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThoulessReport {
    pub z: (f64, f64),
    /// Transfer-matrix side.
    pub lhs: f64,
    /// Density-of-states side.
    pub rhs: f64,
    pub gap: f64,
    /// Change of `rhs` between the `G/2` and `G` point rules.
    pub quadrature_error: f64,
}

pub const THOULESS_MIN_IM: f64 = 0.05;
pub const THOULESS_QUAD_TOL: f64 = 1e-4;

/// Compares `L(z, w)` with `(1 / 2 pi p) int_0^{2 pi} sum_j ln|z - lambda_j(theta)| d theta`,
/// the bands coming from the scalar Floquet fibers on a `grid`-point rule.
pub fn thouless_check(z: C64, period: &[f64], grid: usize) -> Result<ThoulessReport> {
    if z.im < THOULESS_MIN_IM {
        return Err(Error::InvalidSpec(format!(
            "Thouless check needs Im z >= {THOULESS_MIN_IM}, got {}",
            z.im
        )));
    }
    if grid % 2 != 0 {
        return Err(Error::GridTooCoarse(format!("Thouless grid must be even, got {grid}")));
    }
    let lhs = periodic_lyapunov(z, period)?;
    let op = BlockJacobiOperator::new(BlockSpec::schrodinger(period)?)?;
    let bands = band_structure(&op, grid)?;
    let p = period.len() as f64;
    let at = |k: usize| -> f64 { bands.bands.iter().map(|b| (z - b[k]).norm().ln()).sum() };
    let values: Vec<f64> = (0..grid).map(at).collect();
    // periodic trapezoid rule: (1 / 2 pi) int = mean over the grid
    let full = values.iter().sum::<f64>() / (grid as f64 * p);
    let half = values.iter().step_by(2).sum::<f64>() / ((grid / 2) as f64 * p);
    let quadrature_error = (full - half).abs();
    if quadrature_error > THOULESS_QUAD_TOL * full.abs().max(1.0) {
        return Err(Error::QuadratureNotConverged(format!(
            "density-of-states integral changed by {quadrature_error:e} between {} and {grid} points",
            grid / 2
        )));
    }
    Ok(ThoulessReport {
        z: (z.re, z.im),
        lhs,
        rhs: full,
        gap: (lhs - full).abs(),
        quadrature_error,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DtCriterion {
    pub integral: f64,
    pub k: f64,
    pub t: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub n_max: usize,
}

pub const DT_REL_TOL: f64 = 1e-4;

/// `(max_{1 <= n <= T^alpha} ||Phi(n, E + i/T, lambda w)||^2)^{-1}`, with `w`
/// extended periodically.
pub fn dt_integrand(energy: f64, period: &[f64], lambda: f64, t: f64, n_max: usize) -> f64 {
    let mut phi = TransferProduct::identity(C64::new(energy, 1.0 / t));
    let mut log_max = f64::NEG_INFINITY;
    for &w in period.iter().cycle().take(n_max) {
        phi.step(lambda * w);
        log_max = log_max.max(phi.log_norm());
    }
    (-2.0 * log_max).exp()
}

/// `int_{-K}^{K} dt_integrand(E) dE` by adaptive Simpson on panels of width
/// at most `8 / T`, so resonances of width `1/T` are resolved.
pub fn dt_criterion(period: &[f64], lambda: f64, k: f64, t: f64, alpha: f64) -> Result<DtCriterion> {
    if period.is_empty() {
        return Err(Error::InvalidSpec("empty potential".into()));
    }
    if !(k > 0.0 && t > 0.0 && alpha > 0.0 && alpha <= 1.0 && lambda >= 0.0) {
        return Err(Error::InvalidSpec(format!(
            "DT criterion needs K, T > 0, alpha in (0, 1] and lambda >= 0; got K={k}, T={t}, alpha={alpha}, lambda={lambda}"
        )));
    }
    let n_max = (t.powf(alpha).floor() as usize).max(1);
    let panels = ((2.0 * k * t / 8.0).ceil() as usize).max(64);
    let h = 2.0 * k / panels as f64;
    let f = |e: f64| dt_integrand(e, period, lambda, t, n_max);
    let parts = (0..panels)
        .into_par_iter()
        .map(|i| {
            let a = -k + i as f64 * h;
            adaptive_simpson(&f, a, a + h, DT_REL_TOL, 1e-300, 40)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DtCriterion {
        integral: parts.iter().sum(),
        k,
        t,
        alpha,
        lambda,
        n_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(m: &M2) -> [[(f64, f64); 2]; 2] {
        m.map(|r| r.map(|z| (z.re, z.im)))
    }

    #[test]
    fn small_products() {
        let e = C64::new(0.7, 0.2);
        let one = transfer_matrix(1, e, &[0.0]).unwrap().full_matrix().unwrap();
        assert_eq!(mat(&one), mat(&[[e, -ONE], [ONE, ZERO]]));
        let four = transfer_matrix(4, ZERO, &[0.0; 4]).unwrap().full_matrix().unwrap();
        assert_eq!(mat(&four), mat(&[[ONE, ZERO], [ZERO, ONE]]));
        // [[1,-1],[1,0]] [[1,-1],[1,0]] = [[0,-1],[1,-1]]
        let two = transfer_matrix(2, ONE, &[0.0, 0.0]).unwrap().full_matrix().unwrap();
        assert_eq!(mat(&two), [[(0.0, 0.0), (-1.0, 0.0)], [(1.0, 0.0), (-1.0, 0.0)]]);
        // factor order: w_1 on the left
        let w = [0.5, -2.0];
        let got = transfer_matrix(2, ONE, &w).unwrap().full_matrix().unwrap();
        let t0 = [[ONE * 0.5, -ONE], [ONE, ZERO]];
        let t1 = [[ONE * 3.0, -ONE], [ONE, ZERO]];
        assert_eq!(mat(&got), mat(&mul2x2(&t1, &t0)));
    }

    #[test]
    fn errors() {
        assert!(matches!(transfer_matrix(3, ONE, &[0.0; 2]), Err(Error::WindowTooShort { len: 2, needed: 3 })));
        assert!(transfer_matrix(0, ONE, &[]).is_err());
        assert!(PotentialFamily::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(thouless_check(C64::new(0.0, 0.01), &[0.0], 256).is_err());
    }

    #[test]
    fn lyapunov_values() {
        assert_eq!(finite_lyapunov(4, ZERO, &[0.0; 4]).unwrap(), 0.0);
        let exact = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((periodic_lyapunov(C64::new(3.0, 0.0), &[0.0]).unwrap() - exact).abs() < 1e-12);
        let l = finite_lyapunov(20_000, C64::new(3.0, 0.0), &[0.0; 20_000]).unwrap();
        assert!((l - exact).abs() < 1e-3, "{l}");
        let fam = PotentialFamily::new(vec![vec![0.3, -1.0]]).unwrap();
        let w = periodic_window(&[0.3, -1.0], 50);
        let e = C64::new(0.4, 0.1);
        assert_eq!(family_lyapunov(50, e, &fam).unwrap(), finite_lyapunov(50, e, &w).unwrap());
    }

    #[test]
    fn long_products_do_not_overflow() {
        let w = vec![0.0; 10_000];
        let phi = transfer_matrix(10_000, C64::new(3.0, 1.0), &w).unwrap();
        assert!(phi.log_norm().is_finite() && phi.log_norm() > 700.0);
        assert!(phi.full_matrix().is_none());
        assert!(phi.det_defect() < 1e-10);
    }

    #[test]
    fn thouless_free_and_period_two() {
        let r = thouless_check(C64::new(0.0, 3.0), &[0.0], 2048).unwrap();
        assert!(r.gap < 1e-3, "{r:?}");
        let r = thouless_check(C64::new(0.5, 0.2), &[1.0, -1.0], 2048).unwrap();
        assert!(r.gap < 1e-3, "{r:?}");
        let shifted = thouless_check(C64::new(2.5, 0.2), &[3.0, 1.0], 2048).unwrap();
        assert!((shifted.gap - r.gap).abs() < 1e-9);
        assert!((shifted.lhs - r.lhs).abs() < 1e-9);
    }

    #[test]
    fn dt_contrast() {
        let free = dt_criterion(&[0.0], 1.0, 2.0, 100.0, 1.0).unwrap();
        assert!(free.integral >= 0.1, "{free:?}");
        let gap = dt_criterion(&[3.0, -3.0], 1.0, 2.0, 100.0, 1.0).unwrap();
        assert!(gap.integral < 1e-3, "{gap:?}");
        for e in [-1.9, 0.0, 0.3, 2.5] {
            assert!(dt_integrand(e, &[1.0, -0.5], 1.0, 50.0, 50) <= 1.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn unimodular_and_nonnegative(
            n in 1usize..10_000,
            re in -3.0f64..3.0,
            im in 0.0f64..1.0,
            seed in proptest::collection::vec(-2.0f64..2.0, 16),
        ) {
            let w = periodic_window(&seed, n);
            let e = C64::new(re, im);
            let phi = transfer_matrix(n, e, &w).unwrap();
            prop_assert!(phi.det_defect() < 1e-10);
            prop_assert!(phi.log_norm() >= -1e-10);
            prop_assert!(finite_lyapunov(n, e, &w).unwrap() >= -1e-12);
        }

        #[test]
        fn submultiplicative(
            n in 1usize..300,
            m in 1usize..300,
            re in -3.0f64..3.0,
            im in 0.0f64..1.0,
            w in proptest::collection::vec(-2.0f64..2.0, 600),
        ) {
            let e = C64::new(re, im);
            let total = (n + m) as f64 * finite_lyapunov(n + m, e, &w).unwrap();
            let first = n as f64 * finite_lyapunov(n, e, &w).unwrap();
            let second = m as f64 * finite_lyapunov(m, e, &w[n..]).unwrap();
            prop_assert!(total <= first + second + 1e-10);
        }

        #[test]
        fn growth_off_spectrum(
            excess in 0.05f64..3.0,
            sign in prop::bool::ANY,
            w in proptest::collection::vec(-1.0f64..1.0, 1000),
        ) {
            let sup = w.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let e = (2.0 + sup + excess) * if sign { 1.0 } else { -1.0 };
            let l = finite_lyapunov(1000, C64::new(e, 0.0), &w).unwrap();
            prop_assert!(l >= ((e.abs() - sup) / 2.0).ln() - 1e-2);
        }

        #[test]
        fn thouless_shift_covariance(c in -2.0f64..2.0, re in -2.0f64..2.0) {
            let z = C64::new(re, 0.3);
            let a = thouless_check(z, &[0.5, -0.5], 512).unwrap();
            let b = thouless_check(z + c, &[0.5 + c, -0.5 + c], 512).unwrap();
            prop_assert!((a.gap - b.gap).abs() < 1e-8);
        }
    }
}
