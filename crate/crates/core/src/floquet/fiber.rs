use crate::blockjacobi::BlockJacobiOperator;
use crate::linalg::{CMatrix, HermitianEigen, C64, I};

/// Eigenvalues closer than this are treated as one cluster and split by the
/// current operator, which selects the analytic branches through a crossing.
pub const CLUSTER_TOL: f64 = 1e-6;

/// Fiber matrices `J_theta`, `A_theta` together with an eigenbasis adapted to
/// the analytic band branches.
#[derive(Debug, Clone)]
pub struct FloquetFiber {
    pub theta: f64,
    pub j: CMatrix,
    pub a: CMatrix,
    /// Eigenvalues of `J_theta`, ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: CMatrix,
    /// Group velocities `q * lambda_j'(theta) = <v_j, A_theta v_j>`.
    pub velocities: Vec<f64>,
}

/// Assembles `(J_theta, A_theta)`.
pub fn fiber_matrices(op: &BlockJacobiOperator, theta: f64) -> (CMatrix, CMatrix) {
    let m = op.m();
    let q = op.q();
    let d = m * q;
    let mut j = CMatrix::zeros(d, d);
    let mut a = CMatrix::zeros(d, d);
    let phase = C64::from_polar(1.0, theta);
    for k in 0..q {
        let b = op.b(k as i64);
        let ak = op.a(k as i64);
        // the last link wraps around to block 0 with a Bloch phase
        let (next, fwd) = if k + 1 < q { (k + 1, C64::new(1.0, 0.0)) } else { (0, phase) };
        for r in 0..m {
            for c in 0..m {
                j[(k * m + r, k * m + c)] += b[(r, c)];
                let hop = fwd * ak[(r, c)];
                j[(k * m + r, next * m + c)] += hop;
                j[(next * m + c, k * m + r)] += hop.conj();
                a[(k * m + r, next * m + c)] += I * hop;
                a[(next * m + c, k * m + r)] += (I * hop).conj();
            }
        }
    }
    (j, a)
}

pub fn build_fiber(op: &BlockJacobiOperator, theta: f64) -> FloquetFiber {
    let (j, a) = fiber_matrices(op, theta);
    let eig = HermitianEigen::new(&j);
    let d = eig.dim();
    let mut vectors = CMatrix::from_fn(d, d, |r, c| eig.entry(r, c));
    let values = eig.values.clone();
    let mut velocities = vec![0.0; d];
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && values[end] - values[end - 1] < CLUSTER_TOL {
            end += 1;
        }
        if end - start == 1 {
            let v = vectors.column(start);
            velocities[start] = (v.adjoint() * &a * v)[(0, 0)].re;
        } else {
            let block = vectors.columns(start, end - start).into_owned();
            let compressed = block.adjoint() * &a * &block;
            let inner = HermitianEigen::new(&compressed);
            let rot = CMatrix::from_fn(end - start, end - start, |r, c| inner.entry(r, c));
            let rotated = &block * rot;
            vectors.columns_mut(start, end - start).copy_from(&rotated);
            velocities[start..end].copy_from_slice(&inner.values);
        }
        start = end;
    }
    FloquetFiber {
        theta,
        j,
        a,
        values,
        vectors,
        velocities,
    }
}

impl FloquetFiber {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Smallest gap between consecutive eigenvalues.
    pub fn min_gap(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// `Q_theta = sum_j q lambda_j'(theta) P_j(theta)`.
    pub fn q_matrix(&self) -> CMatrix {
        let d = self.dim();
        let scaled = CMatrix::from_fn(d, d, |r, c| self.vectors[(r, c)] * self.velocities[c]);
        scaled * self.vectors.adjoint()
    }

    /// Largest `|velocity|` and its band index.
    pub fn max_speed(&self) -> (f64, usize) {
        self.velocities
            .iter()
            .enumerate()
            .fold((0.0, 0), |best, (k, v)| if v.abs() > best.0 { (v.abs(), k) } else { best })
    }
}
