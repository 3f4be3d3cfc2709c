//! Periodic block Jacobi operators on `l^2(Z)^m`.
//!
//! The operator acts by
//! `(J u)_n = a_{n-1}^* u_{n-1} + b_n u_n + a_n u_{n+1}`
//! and the current operator by
//! `(A u)_n = -i a_{n-1}^* u_{n-1} + i a_n u_{n+1}`.
//! Block site `n` uses the stored blocks with index `n mod q`, so site 0
//! carries the first entries `a[0]`, `b[0]`.

mod packet;
mod truncation;

pub use packet::{block_to_scalar, scalar_to_block, PacketSpec, WavePacket};
pub use truncation::{TruncatedOperator, MAX_DENSE_DIM};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, CMatrix, C64, I, ZERO};

/// Tolerance on `|det a_j|` below which an off-diagonal block is singular.
pub const DET_TOL: f64 = 1e-12;
/// Tolerance on `max |b - b^*|` for diagonal blocks.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// The `q` periodic coefficient blocks of a block Jacobi operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBlockSpec", into = "RawBlockSpec")]
pub struct BlockSpec {
    pub m: usize,
    pub q: usize,
    pub a: Vec<CMatrix>,
    pub b: Vec<CMatrix>,
}

/// JSON layout: each block is a row-major list of `m*m` `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlockSpec {
    m: usize,
    q: usize,
    a: Vec<Vec<[f64; 2]>>,
    b: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<RawBlockSpec> for BlockSpec {
    type Error = Error;

    fn try_from(raw: RawBlockSpec) -> Result<Self> {
        let m = raw.m;
        let to_block = |name: &str, k: usize, flat: &[[f64; 2]]| -> Result<CMatrix> {
            if flat.len() != m * m {
                return Err(Error::DimensionMismatch(format!(
                    "{name}[{k}] has {} entries, expected {}",
                    flat.len(),
                    m * m
                )));
            }
            Ok(CMatrix::from_fn(m, m, |i, j| {
                let [re, im] = flat[i * m + j];
                C64::new(re, im)
            }))
        };
        let a = raw
            .a
            .iter()
            .enumerate()
            .map(|(k, f)| to_block("a", k, f))
            .collect::<Result<Vec<_>>>()?;
        let b = raw
            .b
            .iter()
            .enumerate()
            .map(|(k, f)| to_block("b", k, f))
            .collect::<Result<Vec<_>>>()?;
        let spec = BlockSpec { m, q: raw.q, a, b };
        spec.check_shapes()?;
        Ok(spec)
    }
}

impl From<BlockSpec> for RawBlockSpec {
    fn from(spec: BlockSpec) -> Self {
        let flat = |blk: &CMatrix| -> Vec<[f64; 2]> {
            let mut out = Vec::with_capacity(blk.len());
            for i in 0..blk.nrows() {
                for j in 0..blk.ncols() {
                    out.push([blk[(i, j)].re, blk[(i, j)].im]);
                }
            }
            out
        };
        RawBlockSpec {
            m: spec.m,
            q: spec.q,
            a: spec.a.iter().map(flat).collect(),
            b: spec.b.iter().map(flat).collect(),
        }
    }
}

impl BlockSpec {
    /// Builds a spec from block lists, inferring `m` and `q`.
    pub fn new(a: Vec<CMatrix>, b: Vec<CMatrix>) -> Result<Self> {
        let m = a.first().map_or(0, |x| x.nrows());
        let spec = Self { m, q: a.len(), a, b };
        spec.check_shapes()?;
        Ok(spec)
    }

    /// Scalar (`m = 1`) spec with real coefficients.
    pub fn scalar(a: &[f64], b: &[f64]) -> Result<Self> {
        let one = |x: f64| CMatrix::from_element(1, 1, C64::new(x, 0.0));
        Self::new(a.iter().map(|&x| one(x)).collect(), b.iter().map(|&x| one(x)).collect())
    }

    /// Scalar operator with `a = 1` and a periodic real potential.
    pub fn schrodinger(potential: &[f64]) -> Result<Self> {
        Self::scalar(&vec![1.0; potential.len()], potential)
    }

    pub fn free_laplacian() -> Self {
        Self::scalar(&[1.0], &[0.0]).expect("valid spec")
    }

    /// The same operator written with period `k * q`.
    pub fn repeated(&self, k: usize) -> Self {
        let cycle = |v: &Vec<CMatrix>| v.iter().cycle().take(v.len() * k).cloned().collect();
        Self {
            m: self.m,
            q: self.q * k,
            a: cycle(&self.a),
            b: cycle(&self.b),
        }
    }

    fn check_shapes(&self) -> Result<()> {
        if self.m == 0 || self.q == 0 {
            return Err(Error::DimensionMismatch(
                "block dimension m and period q must be positive".into(),
            ));
        }
        if self.a.len() != self.q || self.b.len() != self.q {
            return Err(Error::DimensionMismatch(format!(
                "expected {} blocks each, got {} off-diagonal and {} diagonal",
                self.q,
                self.a.len(),
                self.b.len()
            )));
        }
        for (k, blk) in self.a.iter().chain(&self.b).enumerate() {
            if blk.nrows() != self.m || blk.ncols() != self.m {
                return Err(Error::DimensionMismatch(format!(
                    "block {k} is {}x{}, expected {m}x{m}",
                    blk.nrows(),
                    blk.ncols(),
                    m = self.m
                )));
            }
        }
        Ok(())
    }

    /// Checks shapes, invertibility of `a_j` and hermiticity of `b_j`.
    pub fn validate(&self) -> Result<()> {
        self.check_shapes()?;
        for (index, a) in self.a.iter().enumerate() {
            let det = a.clone().determinant().norm();
            if !(det > DET_TOL) {
                return Err(Error::SingularOffDiagonal { index, det });
            }
        }
        for (index, b) in self.b.iter().enumerate() {
            let deviation = (b - b.adjoint()).iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
            if !(deviation < HERMITIAN_TOL) {
                return Err(Error::NonHermitianDiagonal { index, deviation });
            }
        }
        Ok(())
    }
}

/// Validated periodic block Jacobi operator.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockJacobiOperator {
    spec: BlockSpec,
}

impl BlockJacobiOperator {
    pub fn new(spec: BlockSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn free_laplacian() -> Self {
        Self::new(BlockSpec::free_laplacian()).expect("valid spec")
    }

    pub fn spec(&self) -> &BlockSpec {
        &self.spec
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }

    pub fn q(&self) -> usize {
        self.spec.q
    }

    fn slot(&self, n: i64) -> usize {
        n.rem_euclid(self.spec.q as i64) as usize
    }

    /// Off-diagonal block `a_n`.
    pub fn a(&self, n: i64) -> &CMatrix {
        &self.spec.a[self.slot(n)]
    }

    /// Diagonal block `b_n`.
    pub fn b(&self, n: i64) -> &CMatrix {
        &self.spec.b[self.slot(n)]
    }

    /// `max_j ||b_j|| + 2 max_j ||a_j||`, an upper bound on `||J||`.
    pub fn norm_bound(&self) -> f64 {
        let max_norm = |v: &[CMatrix]| v.iter().map(spectral_norm).fold(0.0, f64::max);
        max_norm(&self.spec.b) + 2.0 * max_norm(&self.spec.a)
    }

    /// `J u`.
    pub fn apply(&self, u: &WavePacket) -> WavePacket {
        self.apply_tridiagonal(u, C64::new(1.0, 0.0), true)
    }

    /// `A u` with the current operator `A = i[J, X]`.
    pub fn apply_current(&self, u: &WavePacket) -> WavePacket {
        self.apply_tridiagonal(u, I, false)
    }

    /// Upper blocks `s a_n`, lower blocks `conj(s) a_{n-1}^*`, and `b_n` on
    /// the diagonal when requested.
    fn apply_tridiagonal(&self, u: &WavePacket, s: C64, diagonal: bool) -> WavePacket {
        let m = self.m();
        assert_eq!(u.m(), m, "packet block dimension differs from operator");
        let Some((lo, hi)) = u.support() else {
            return WavePacket::zero(m);
        };
        let mut out = WavePacket::zeros(m, lo - 1, hi + 1);
        for n in lo - 1..=hi + 1 {
            let prev = u.block(n - 1);
            let here = u.block(n);
            let next = u.block(n + 1);
            let a_prev = self.a(n - 1);
            let a_here = self.a(n);
            let b_here = self.b(n);
            for r in 0..m {
                let mut acc = ZERO;
                for c in 0..m {
                    acc += s.conj() * a_prev[(c, r)].conj() * prev[c];
                    acc += s * a_here[(r, c)] * next[c];
                    if diagonal {
                        acc += b_here[(r, c)] * here[c];
                    }
                }
                *out.get_mut(n, r) = acc;
            }
        }
        out
    }

    /// Dense restriction to block sites `[-n, n]`.
    pub fn truncate(&self, n: usize) -> Result<TruncatedOperator> {
        let n = n as i64;
        self.truncate_window(-n, n)
    }

    /// Dense restriction to block sites `[lo, hi]` with zero boundary blocks.
    pub fn truncate_window(&self, lo: i64, hi: i64) -> Result<TruncatedOperator> {
        TruncatedOperator::new(self, lo, hi)
    }
}
