use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{block_spectral_norm, cmul, spectral_norm_power, CMatrix, HermitianEigen, C64, ZERO};
use crate::xychain::spec::XYChainSpec;

pub const MAX_SITES: usize = 12;
/// Above this many sites commutator norms use power iteration instead of SVD.
pub const SVD_SITES: usize = 10;

/// Single-site operators in the basis `(up, down)`, `Z up = up`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Local {
    X,
    Y,
    Z,
    /// `a = [[0, 0], [1, 0]]`, mapping up to down.
    Lower,
    /// `a^* = [[0, 1], [0, 0]]`.
    Raise,
}

impl Local {
    fn matrix(self) -> [[C64; 2]; 2] {
        let o = ZERO;
        let r = |x: f64| C64::new(x, 0.0);
        match self {
            Local::X => [[o, r(1.0)], [r(1.0), o]],
            Local::Y => [[o, C64::new(0.0, -1.0)], [C64::new(0.0, 1.0), o]],
            Local::Z => [[r(1.0), o], [o, r(-1.0)]],
            Local::Lower => [[o, o], [r(1.0), o]],
            Local::Raise => [[o, r(1.0)], [o, o]],
        }
    }
}

/// Exact representation of the XY chain on sites `lo..=hi`. Site `lo` is the
/// most significant bit of the basis index; bit value 0 is spin up.
#[derive(Debug, Clone)]
pub struct SpinChain {
    lo: i64,
    hi: i64,
    h: CMatrix,
    spectral: OnceLock<HermitianEigen>,
}

pub fn build_spin_hamiltonian(spec: &XYChainSpec, lo: i64, hi: i64) -> Result<SpinChain> {
    spec.validate_couplings()?;
    if hi < lo {
        return Err(Error::InvalidSpec(format!("empty chain [{lo}, {hi}]")));
    }
    let sites = (hi - lo + 1) as usize;
    if sites > MAX_SITES {
        return Err(Error::ChainTooLong { sites, limit: MAX_SITES });
    }
    let mut chain = SpinChain {
        lo,
        hi,
        h: CMatrix::zeros(1 << sites, 1 << sites),
        spectral: OnceLock::new(),
    };
    let mut h = CMatrix::zeros(chain.dim(), chain.dim());
    for j in lo..hi {
        let (mu, g) = (spec.mu_at(j), spec.gamma_at(j));
        h += chain.two_site(j, Local::X, Local::X) * C64::new(mu * (1.0 + g), 0.0);
        h += chain.two_site(j, Local::Y, Local::Y) * C64::new(mu * (1.0 - g), 0.0);
    }
    for j in lo..=hi {
        h += chain.local(j, Local::Z) * C64::new(spec.nu_at(j), 0.0);
    }
    chain.h = h;
    Ok(chain)
}

impl SpinChain {
    pub fn sites(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn dim(&self) -> usize {
        1 << self.sites()
    }

    pub fn range(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.h
    }

    pub fn spectral(&self) -> &HermitianEigen {
        self.spectral.get_or_init(|| HermitianEigen::new(&self.h))
    }

    fn bit(&self, site: i64) -> usize {
        assert!(site >= self.lo && site <= self.hi, "site {site} outside chain");
        self.sites() - 1 - (site - self.lo) as usize
    }

    /// Operator `op` acting on `site`, with optional Jordan-Wigner string
    /// of `Z` on all sites to its left.
    fn placed(&self, site: i64, op: Local, string: bool) -> CMatrix {
        let m = op.matrix();
        let bit = self.bit(site);
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for col in 0..n {
            let s = (col >> bit) & 1;
            let sign = if string {
                // bits of sites lo..site-1 are the higher bits
                let left = col >> (bit + 1);
                if left.count_ones() % 2 == 0 { 1.0 } else { -1.0 }
            } else {
                1.0
            };
            for r in 0..2 {
                let z = m[r][s];
                if z != ZERO {
                    let row = (col & !(1 << bit)) | (r << bit);
                    out[(row, col)] += z * sign;
                }
            }
        }
        out
    }

    pub fn local(&self, site: i64, op: Local) -> CMatrix {
        self.placed(site, op, false)
    }

    /// `a_j b_{j+1}`, assembled entrywise.
    fn two_site(&self, j: i64, a: Local, b: Local) -> CMatrix {
        let (ma, mb) = (a.matrix(), b.matrix());
        let (ba, bb) = (self.bit(j), self.bit(j + 1));
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for col in 0..n {
            let (sa, sb) = ((col >> ba) & 1, (col >> bb) & 1);
            for ra in 0..2 {
                for rb in 0..2 {
                    let z = ma[ra][sa] * mb[rb][sb];
                    if z != ZERO {
                        let row = (col & !(1 << ba) & !(1 << bb)) | (ra << ba) | (rb << bb);
                        out[(row, col)] += z;
                    }
                }
            }
        }
        out
    }

    pub fn identity(&self) -> CMatrix {
        CMatrix::identity(self.dim(), self.dim())
    }

    /// Jordan-Wigner `c_j = Z_lo ... Z_{j-1} a_j`.
    pub fn c(&self, site: i64) -> CMatrix {
        self.placed(site, Local::Lower, true)
    }

    pub fn c_dag(&self, site: i64) -> CMatrix {
        self.placed(site, Local::Raise, true)
    }

    /// `(c_lo, c_lo^*, c_{lo+1}, c_{lo+1}^*, ...)`, ordered like the rows
    /// of the truncated matrix `M`.
    pub fn fermion_vector(&self) -> Vec<CMatrix> {
        (self.lo..=self.hi)
            .flat_map(|j| [self.c(j), self.c_dag(j)])
            .collect()
    }

    /// `tau_t(A) = exp(itH) A exp(-itH)`.
    pub fn heisenberg(&self, a: &CMatrix, t: f64) -> CMatrix {
        self.heisenberg_from_eigenbasis(&self.spectral().conjugate_into(a), t)
    }

    /// `tau_t(A)` from `U^* A U` given in the eigenbasis of `H`.
    pub fn heisenberg_from_eigenbasis(&self, a_eig: &CMatrix, t: f64) -> CMatrix {
        let eig = self.spectral();
        let phases: Vec<C64> = eig.values.iter().map(|&e| C64::from_polar(1.0, t * e)).collect();
        let inner = CMatrix::from_fn(eig.dim(), eig.dim(), |i, j| a_eig[(i, j)] * phases[i] * phases[j].conj());
        eig.conjugate_out(&inner)
    }

    fn norm(&self, a: &CMatrix) -> f64 {
        if self.sites() <= SVD_SITES {
            block_spectral_norm(a)
        } else {
            spectral_norm_power(a, 1e-9, 10_000)
        }
    }

    fn check_dim(&self, m: &CMatrix) -> Result<()> {
        let n = self.dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, chain dimension is {n}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(())
    }

    /// `||[tau_t(A), B]||`.
    pub fn commutator_norm(&self, a: &CMatrix, b: &CMatrix, t: f64) -> Result<f64> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        Ok(self.norm(&commutator(&self.heisenberg(a, t), b)))
    }

    /// `||[tau_t(A), B]||` for several `B`, sharing one evolution of `A`
    /// given in the eigenbasis.
    pub fn commutator_norms(&self, a_eig: &CMatrix, bs: &[&CMatrix], t: f64) -> Result<Vec<f64>> {
        self.check_dim(a_eig)?;
        for b in bs {
            self.check_dim(b)?;
        }
        let ta = self.heisenberg_from_eigenbasis(a_eig, t);
        Ok(bs.iter().map(|b| self.norm(&commutator(&ta, b))).collect())
    }

    pub fn operator_norm(&self, a: &CMatrix) -> f64 {
        self.norm(a)
    }
}

/// `A B - B A`, using the sparsity of `B` when it has few nonzeros.
fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let n = b.nrows();
    let nz: Vec<(usize, usize, C64)> = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .filter_map(|(i, j)| (b[(i, j)] != ZERO).then(|| (i, j, b[(i, j)])))
        .collect();
    if nz.len() > 4 * n {
        return cmul(a, b) - cmul(b, a);
    }
    let mut out = CMatrix::zeros(n, n);
    for &(i, j, z) in &nz {
        // (AB)_{:, j} += A_{:, i} b_ij and (BA)_{i, :} += b_ij A_{j, :}
        for k in 0..n {
            out[(k, j)] += a[(k, i)] * z;
            out[(i, k)] -= z * a[(j, k)];
        }
    }
    out
}
