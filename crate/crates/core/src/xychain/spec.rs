use serde::{Deserialize, Serialize};

use crate::blockjacobi::{BlockJacobiOperator, BlockSpec};
use crate::error::{Error, Result};
use crate::floquet::q_norm;
use crate::linalg::{CMatrix, C64, ZERO};

/// Periodic couplings of the anisotropic XY chain
/// `H = sum_j mu_j [(1 + gamma_j) X_j X_{j+1} + (1 - gamma_j) Y_j Y_{j+1}] + sum_j nu_j Z_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XYChainSpec {
    pub mu: Vec<f64>,
    pub gamma: Vec<f64>,
    pub nu: Vec<f64>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

fn periodic(v: &[f64], j: i64) -> f64 {
    v[j.rem_euclid(v.len() as i64) as usize]
}

impl XYChainSpec {
    pub fn new(mu: Vec<f64>, gamma: Vec<f64>, nu: Vec<f64>) -> Result<Self> {
        let s = Self { mu, gamma, nu };
        s.validate()?;
        Ok(s)
    }

    /// Constant couplings.
    pub fn constant(mu: f64, gamma: f64, nu: f64) -> Result<Self> {
        Self::new(vec![mu], vec![gamma], vec![nu])
    }

    /// Non-empty, finite sequences. Enough for the spin Hamiltonian.
    pub fn validate_couplings(&self) -> Result<()> {
        if self.mu.is_empty() || self.gamma.is_empty() || self.nu.is_empty() {
            return Err(Error::InvalidSpec("mu, gamma and nu must be non-empty".into()));
        }
        if let Some(x) = self.mu.iter().chain(&self.gamma).chain(&self.nu).find(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec(format!("non-finite coupling {x}")));
        }
        Ok(())
    }

    /// Also requires `mu_j != 0` and `gamma_j != +-1`, so every coupling
    /// block of `M` is invertible.
    pub fn validate(&self) -> Result<()> {
        self.validate_couplings()?;
        if let Some((j, m)) = self.mu.iter().enumerate().find(|(_, m)| m.abs() <= 1e-12) {
            return Err(Error::InvalidSpec(format!("mu[{j}] = {m} vanishes")));
        }
        if let Some((j, g)) = self.gamma.iter().enumerate().find(|(_, g)| (*g * *g - 1.0).abs() <= 1e-12) {
            return Err(Error::InvalidSpec(format!(
                "gamma[{j}] = {g} makes the coupling block singular"
            )));
        }
        Ok(())
    }

    /// Common period `lcm(p_mu, p_gamma, p_nu)`.
    pub fn period(&self) -> usize {
        lcm(lcm(self.mu.len(), self.gamma.len()), self.nu.len())
    }

    pub fn mu_at(&self, j: i64) -> f64 {
        periodic(&self.mu, j)
    }

    pub fn gamma_at(&self, j: i64) -> f64 {
        periodic(&self.gamma, j)
    }

    pub fn nu_at(&self, j: i64) -> f64 {
        periodic(&self.nu, j)
    }

    /// Diagonal block `2 diag(nu_j, -nu_j)`.
    pub fn diagonal_block(&self, j: i64) -> CMatrix {
        let n = self.nu_at(j);
        CMatrix::from_row_slice(2, 2, &[C64::new(2.0 * n, 0.0), ZERO, ZERO, C64::new(-2.0 * n, 0.0)])
    }

    /// Coupling block for the bond `(j, j + 1)`:
    /// `2 [[-mu_j, -mu_j gamma_j], [mu_j gamma_j, mu_j]]`.
    pub fn coupling_block(&self, j: i64) -> CMatrix {
        let (m, g) = (self.mu_at(j), self.gamma_at(j));
        let r = |x: f64| C64::new(2.0 * x, 0.0);
        CMatrix::from_row_slice(2, 2, &[r(-m), r(-m * g), r(m * g), r(m)])
    }

    /// Scaled copy with `(c mu, gamma, c nu)`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            mu: self.mu.iter().map(|x| c * x).collect(),
            gamma: self.gamma.clone(),
            nu: self.nu.iter().map(|x| c * x).collect(),
        }
    }
}

/// The block Jacobi matrix `M` (block size 2, period `lcm` of the three
/// periods) governing `tau_t(C) = exp(-itM) C` for
/// `C = (c_0, c_0^*, c_1, c_1^*, ...)`.
pub fn build_m(spec: &XYChainSpec) -> Result<BlockJacobiOperator> {
    spec.validate()?;
    let q = spec.period() as i64;
    let a = (0..q).map(|j| spec.coupling_block(j)).collect();
    let b = (0..q).map(|j| spec.diagonal_block(j)).collect();
    BlockJacobiOperator::new(BlockSpec::new(a, b)?)
}

/// Scalar row of `c_site` (`dagger = false`) or `c_site^*` within a window
/// starting at block site `lo`.
pub fn row_index(lo: i64, site: i64, dagger: bool) -> usize {
    2 * (site - lo) as usize + dagger as usize
}

/// `v_0 = ||Q||` for the matrix `M`.
pub fn lr_velocity_bound(spec: &XYChainSpec) -> Result<f64> {
    Ok(q_norm(&build_m(spec)?).q_norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(m: &CMatrix) -> [[f64; 2]; 2] {
        [[m[(0, 0)].re, m[(0, 1)].re], [m[(1, 0)].re, m[(1, 1)].re]]
    }

    #[test]
    fn block_entries() {
        let s = XYChainSpec::constant(1.0, 0.0, 0.0).unwrap();
        let m = build_m(&s).unwrap();
        assert_eq!(block(m.a(0)), [[-2.0, 0.0], [0.0, 2.0]]);
        assert_eq!(block(m.b(0)), [[0.0, 0.0], [0.0, 0.0]]);
        let s = XYChainSpec::constant(1.0, 0.5, 1.0).unwrap();
        let m = build_m(&s).unwrap();
        assert_eq!(block(m.a(0)), [[-2.0, -1.0], [1.0, 2.0]]);
        assert_eq!(block(m.b(0)), [[2.0, 0.0], [0.0, -2.0]]);
    }

    #[test]
    fn invalid_specs() {
        assert!(matches!(XYChainSpec::constant(1.0, 1.0, 0.0), Err(Error::InvalidSpec(_))));
        assert!(matches!(XYChainSpec::constant(1.0, -1.0, 0.0), Err(Error::InvalidSpec(_))));
        assert!(matches!(XYChainSpec::constant(0.0, 0.0, 0.0), Err(Error::InvalidSpec(_))));
        let s = XYChainSpec { mu: vec![], gamma: vec![0.0], nu: vec![0.0] };
        assert!(build_m(&s).is_err());
    }

    #[test]
    fn period_is_lcm() {
        let s = XYChainSpec::new(vec![1.0, 2.0], vec![0.0, 0.1, 0.2], vec![0.5; 4]).unwrap();
        assert_eq!(s.period(), 12);
        let m = build_m(&s).unwrap();
        assert_eq!(m.q(), 12);
        assert_eq!(m.a(5)[(0, 0)].re, -2.0 * 2.0);
        assert_eq!(m.a(5)[(0, 1)].re, -2.0 * 2.0 * 0.2);
    }

    #[test]
    fn isotropic_velocity_is_four_mu() {
        let v = lr_velocity_bound(&XYChainSpec::constant(0.5, 0.0, 0.0).unwrap()).unwrap();
        assert!((v - 2.0).abs() < 1e-6);
    }

    #[test]
    fn velocity_scales_linearly() {
        let s = XYChainSpec::new(vec![1.0, 0.7], vec![0.5], vec![1.0, -0.3]).unwrap();
        let v = lr_velocity_bound(&s).unwrap();
        let v3 = lr_velocity_bound(&s.scaled(3.0)).unwrap();
        assert!(v > 0.0);
        assert!((v3 - 3.0 * v).abs() < 1e-8);
    }

    #[test]
    fn spec_json_is_strict() {
        let s: XYChainSpec = serde_json::from_str(r#"{"mu":[0.5],"gamma":[0],"nu":[0]}"#).unwrap();
        assert_eq!(s, XYChainSpec::constant(0.5, 0.0, 0.0).unwrap());
        assert!(serde_json::from_str::<XYChainSpec>(r#"{"mu":[1],"gamma":[0],"nu":[0],"x":1}"#).is_err());
    }
}
