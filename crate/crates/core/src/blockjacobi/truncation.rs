use std::sync::OnceLock;

use crate::blockjacobi::{BlockJacobiOperator, WavePacket};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, HermitianEigen, C64, I};

/// Largest scalar dimension accepted for dense truncations.
pub const MAX_DENSE_DIM: usize = 8192;

/// Restriction of a block Jacobi operator to block sites `lo..=hi`, with a
/// lazily computed spectral decomposition.
#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    m: usize,
    lo: i64,
    hi: i64,
    matrix: CMatrix,
    current: CMatrix,
    spectral: OnceLock<HermitianEigen>,
}

impl TruncatedOperator {
    pub(crate) fn new(op: &BlockJacobiOperator, lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(Error::DimensionMismatch(format!("empty window [{lo}, {hi}]")));
        }
        let m = op.m();
        let sites = (hi - lo + 1) as usize;
        let dim = sites * m;
        if dim > MAX_DENSE_DIM {
            return Err(Error::SizeLimitExceeded {
                size: dim,
                limit: MAX_DENSE_DIM,
            });
        }
        let mut matrix = CMatrix::zeros(dim, dim);
        let mut current = CMatrix::zeros(dim, dim);
        for k in 0..sites {
            let n = lo + k as i64;
            let b = op.b(n);
            for r in 0..m {
                for c in 0..m {
                    // average with the adjoint so the matrix is exactly Hermitian
                    matrix[(k * m + r, k * m + c)] = 0.5 * (b[(r, c)] + b[(c, r)].conj());
                }
            }
            if k + 1 < sites {
                let a = op.a(n);
                for r in 0..m {
                    for c in 0..m {
                        let (row, col) = (k * m + r, (k + 1) * m + c);
                        matrix[(row, col)] = a[(r, c)];
                        matrix[(col, row)] = a[(r, c)].conj();
                        current[(row, col)] = I * a[(r, c)];
                        current[(col, row)] = (I * a[(r, c)]).conj();
                    }
                }
            }
        }
        Ok(Self {
            m,
            lo,
            hi,
            matrix,
            current,
            spectral: OnceLock::new(),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Block-site window `(lo, hi)`.
    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    /// Distance from block site 0 to the nearer window edge.
    pub fn half_width(&self) -> i64 {
        (-self.lo).min(self.hi)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Restriction of the current operator `A` to the same window.
    pub fn current_matrix(&self) -> &CMatrix {
        &self.current
    }

    pub fn spectral(&self) -> &HermitianEigen {
        self.spectral.get_or_init(|| HermitianEigen::new(&self.matrix))
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectral().values
    }

    /// Operator norm (largest eigenvalue modulus).
    pub fn norm(&self) -> f64 {
        self.spectral().norm()
    }

    /// Row of `(site, component)`.
    pub fn index(&self, site: i64, component: usize) -> Option<usize> {
        (site >= self.lo && site <= self.hi && component < self.m)
            .then(|| (site - self.lo) as usize * self.m + component)
    }

    /// Row of a scalar index `n`.
    pub fn scalar_index(&self, n: i64) -> Option<usize> {
        let (s, c) = crate::blockjacobi::scalar_to_block(self.m, n);
        self.index(s, c)
    }

    /// Block site of each row.
    pub fn row_sites(&self) -> Vec<i64> {
        (0..self.dim()).map(|i| self.lo + (i / self.m) as i64).collect()
    }

    pub fn to_vector(&self, u: &WavePacket) -> Result<CVector> {
        if u.m() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "packet has block size {}, operator {}",
                u.m(),
                self.m
            )));
        }
        u.to_window(self.lo, self.hi)
    }

    pub fn to_packet(&self, v: &CVector) -> WavePacket {
        WavePacket::from_window(self.m, self.lo, v)
    }

    /// `exp(-i t J_N) u` computed spectrally.
    pub fn propagate(&self, u: &WavePacket, t: f64) -> Result<WavePacket> {
        let v = self.to_vector(u)?;
        Ok(self.to_packet(&self.spectral().propagate(&v, t)))
    }

    /// Full propagator matrix `exp(-i t J_N)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        self.spectral().matrix_fn(|lam| C64::from_polar(1.0, -lam * t))
    }
}
