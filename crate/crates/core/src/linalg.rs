//! Dense Hermitian eigendecomposition and small matrix helpers.
//!
//! Every finite matrix in this crate is Hermitian. Many of them (free
//! Laplacians, Schrödinger operators, the XY chain matrix, spin
//! Hamiltonians) have vanishing imaginary parts, and for those the real
//! symmetric solver is used, which is several times faster and stores half
//! the data.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Orthonormal eigenbasis, stored as a real orthogonal matrix when the
/// decomposed matrix was real.
#[derive(Debug, Clone)]
pub enum Eigenbasis {
    Real(DMatrix<f64>),
    Complex(CMatrix),
}

/// Spectral decomposition `H = U diag(values) U†` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub basis: Eigenbasis,
}

impl HermitianEigen {
    /// Decomposes a Hermitian matrix. Only the lower triangle is trusted.
    pub fn new(h: &CMatrix) -> Self {
        let n = h.nrows();
        assert_eq!(n, h.ncols(), "matrix must be square");
        if h.iter().all(|z| z.im == 0.0) {
            let re = DMatrix::from_fn(n, n, |i, j| h[(i, j)].re);
            Self::new_real(re)
        } else {
            let eig = h.clone().symmetric_eigen();
            let order = ascending_order(eig.eigenvalues.as_slice());
            let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
            let u = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
            Self {
                values,
                basis: Eigenbasis::Complex(u),
            }
        }
    }

    pub fn new_real(h: DMatrix<f64>) -> Self {
        let n = h.nrows();
        let eig = h.symmetric_eigen();
        let order = ascending_order(eig.eigenvalues.as_slice());
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let u = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Self {
            values,
            basis: Eigenbasis::Real(u),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Largest eigenvalue magnitude, i.e. the operator norm.
    pub fn norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn is_real(&self) -> bool {
        matches!(self.basis, Eigenbasis::Real(_))
    }

    /// Eigenvector `k` as a complex column.
    pub fn vector(&self, k: usize) -> CVector {
        match &self.basis {
            Eigenbasis::Real(u) => u.column(k).map(|x| C64::new(x, 0.0)),
            Eigenbasis::Complex(u) => u.column(k).into_owned(),
        }
    }

    /// Entry `U[i, k]`.
    pub fn entry(&self, i: usize, k: usize) -> C64 {
        match &self.basis {
            Eigenbasis::Real(u) => C64::new(u[(i, k)], 0.0),
            Eigenbasis::Complex(u) => u[(i, k)],
        }
    }

    /// Coefficients `U† v`.
    pub fn to_eigenbasis(&self, v: &CVector) -> CVector {
        match &self.basis {
            Eigenbasis::Real(u) => {
                let (re, im) = split(v);
                let cr = u.tr_mul(&re);
                let ci = u.tr_mul(&im);
                join(&cr, &ci)
            }
            Eigenbasis::Complex(u) => u.ad_mul(v),
        }
    }

    /// Vector `U c`.
    pub fn from_eigenbasis(&self, c: &CVector) -> CVector {
        match &self.basis {
            Eigenbasis::Real(u) => {
                let (re, im) = split(c);
                join(&(u * re), &(u * im))
            }
            Eigenbasis::Complex(u) => u * c,
        }
    }

    /// `f(H) v` for a scalar function of the eigenvalues.
    pub fn apply_fn(&self, v: &CVector, f: impl Fn(f64) -> C64) -> CVector {
        let mut c = self.to_eigenbasis(v);
        for (ck, &lam) in c.iter_mut().zip(&self.values) {
            *ck *= f(lam);
        }
        self.from_eigenbasis(&c)
    }

    /// `exp(-i t H) v`.
    pub fn propagate(&self, v: &CVector, t: f64) -> CVector {
        self.apply_fn(v, |lam| C64::from_polar(1.0, -lam * t))
    }

    /// Full matrix `f(H)`.
    pub fn matrix_fn(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let n = self.dim();
        let phases: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        match &self.basis {
            Eigenbasis::Real(u) => {
                // U diag(f) U^T computed as two real products.
                let ur = DMatrix::from_fn(n, n, |i, k| u[(i, k)] * phases[k].re);
                let ui = DMatrix::from_fn(n, n, |i, k| u[(i, k)] * phases[k].im);
                let re = &ur * u.transpose();
                let im = &ui * u.transpose();
                DMatrix::from_fn(n, n, |i, j| C64::new(re[(i, j)], im[(i, j)]))
            }
            Eigenbasis::Complex(u) => {
                let scaled = DMatrix::from_fn(n, n, |i, k| u[(i, k)] * phases[k]);
                scaled * u.adjoint()
            }
        }
    }

    /// Conjugates an operator into the eigenbasis: `U† A U`.
    pub fn conjugate_into(&self, a: &CMatrix) -> CMatrix {
        match &self.basis {
            Eigenbasis::Real(u) => real_sandwich_t(u, a),
            Eigenbasis::Complex(u) => cmul(&cmul(&u.adjoint(), a), u),
        }
    }

    /// Maps an eigenbasis operator back: `U B U†`.
    pub fn conjugate_out(&self, b: &CMatrix) -> CMatrix {
        match &self.basis {
            Eigenbasis::Real(u) => real_sandwich(u, b),
            Eigenbasis::Complex(u) => cmul(&cmul(u, b), &u.adjoint()),
        }
    }

    /// Largest deviation of `U† U` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        let gram = match &self.basis {
            Eigenbasis::Real(u) => u.tr_mul(u).map(|x| C64::new(x, 0.0)),
            Eigenbasis::Complex(u) => u.ad_mul(u),
        };
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((gram[(i, j)] - target).norm());
            }
        }
        worst
    }
}

fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

pub fn split(v: &CVector) -> (DVector<f64>, DVector<f64>) {
    (v.map(|z| z.re), v.map(|z| z.im))
}

pub fn join(re: &DVector<f64>, im: &DVector<f64>) -> CVector {
    CVector::from_fn(re.len(), |i, _| C64::new(re[i], im[i]))
}

fn split_mat(a: &CMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    (a.map(|z| z.re), a.map(|z| z.im))
}

fn join_mat(re: &DMatrix<f64>, im: &DMatrix<f64>) -> CMatrix {
    DMatrix::from_fn(re.nrows(), re.ncols(), |i, j| C64::new(re[(i, j)], im[(i, j)]))
}

/// `U^T A U` for real `U`.
fn real_sandwich_t(u: &DMatrix<f64>, a: &CMatrix) -> CMatrix {
    let (re, im) = split_mat(a);
    let ut = u.transpose();
    let r = &ut * (re * u);
    let i = &ut * (im * u);
    join_mat(&r, &i)
}

/// `U B U^T` for real `U`.
fn real_sandwich(u: &DMatrix<f64>, b: &CMatrix) -> CMatrix {
    let (re, im) = split_mat(b);
    let ut = u.transpose();
    let r = u * re * &ut;
    let i = u * im * &ut;
    join_mat(&r, &i)
}

/// Complex matrix product, routed through real GEMMs (nalgebra's generic
/// complex product does not use the blocked kernel).
pub fn cmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ai) = split_mat(a);
    let (br, bi) = split_mat(b);
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    join_mat(&re, &im)
}

/// Largest deviation from Hermitian symmetry, `max |h_ij - conj(h_ji)|`.
pub fn hermitian_defect(h: &CMatrix) -> f64 {
    let n = h.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest singular value of a square complex matrix.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// Largest singular value, computed block by block.
///
/// Entries below `1e-12 max|a_ij|` are dropped, rows and columns are grouped
/// into the connected components of the remaining sparsity pattern, and the
/// SVD runs on each component. Operators with conserved quantities split
/// into many small blocks.
pub fn block_spectral_norm(a: &CMatrix) -> f64 {
    let (nr, nc) = a.shape();
    let cut = 1e-12 * a.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    if cut == 0.0 {
        return 0.0;
    }
    // union-find over rows 0..nr and columns nr..nr+nc
    let mut parent: Vec<usize> = (0..nr + nc).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for j in 0..nc {
        for i in 0..nr {
            if a[(i, j)].norm() > cut {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, nr + j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, (Vec<usize>, Vec<usize>)> = Default::default();
    for i in 0..nr {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().0.push(i);
    }
    for j in 0..nc {
        let r = find(&mut parent, nr + j);
        groups.entry(r).or_default().1.push(j);
    }
    groups
        .values()
        .filter(|(rows, cols)| !rows.is_empty() && !cols.is_empty())
        .map(|(rows, cols)| {
            let block = CMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])]);
            block.singular_values().max()
        })
        .fold(0.0, f64::max)
}

/// Largest singular value by power iteration on `A† A`.
///
/// Returns the estimate after convergence to `tol` (relative change of the
/// Rayleigh quotient) or after `max_iter` iterations.
pub fn spectral_norm_power(a: &CMatrix, tol: f64, max_iter: usize) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    // Deterministic, generic start vector.
    let mut v = CVector::from_fn(n, |i, _| {
        let x = (i as f64 + 1.0) * 0.618_033_988_749_895;
        C64::new(1.0 + (x - x.floor()), 0.25 * (x * 3.0).sin())
    });
    let nv = v.norm();
    v /= C64::new(nv, 0.0);
    let mut sigma2 = 0.0;
    for _ in 0..max_iter {
        let w = a * &v;
        let z = a.ad_mul(&w);
        let next = z.norm();
        if next == 0.0 {
            return 0.0;
        }
        v = z / C64::new(next, 0.0);
        let converged = (next - sigma2).abs() <= tol * next;
        sigma2 = next;
        if converged {
            break;
        }
    }
    sigma2.sqrt()
}

/// Spectral norm of a 2x2 complex matrix `[[a, b], [c, d]]` in closed form.
pub fn norm2x2(m: &[[C64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = *m;
    let fro2 = a.norm_sqr() + b.norm_sqr() + c.norm_sqr() + d.norm_sqr();
    let det = (a * d - b * c).norm();
    // sigma_max^2 = (F + sqrt(F^2 - 4|det|^2)) / 2
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0);
    ((fro2 + disc.sqrt()) / 2.0).sqrt()
}

pub fn mul2x2(x: &[[C64; 2]; 2], y: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    [
        [
            x[0][0] * y[0][0] + x[0][1] * y[1][0],
            x[0][0] * y[0][1] + x[0][1] * y[1][1],
        ],
        [
            x[1][0] * y[0][0] + x[1][1] * y[1][0],
            x[1][0] * y[0][1] + x[1][1] * y[1][1],
        ],
    ]
}

pub fn det2x2(m: &[[C64; 2]; 2]) -> C64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_norm_matches_full_svd() {
        let n = 12;
        let a = CMatrix::from_fn(n, n, |i, j| {
            if (i + j) % 3 == 0 || i % 4 == j % 4 {
                C64::new((i as f64 * 0.37 + j as f64).sin(), (i * j) as f64 * 0.01)
            } else {
                ZERO
            }
        });
        assert!((block_spectral_norm(&a) - spectral_norm(&a)).abs() < 1e-12);
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, -3.0)]));
        assert!((block_spectral_norm(&d) - 3.0).abs() < 1e-15);
        assert_eq!(block_spectral_norm(&CMatrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn real_and_complex_paths_agree() {
        let h = CMatrix::from_fn(5, 5, |i, j| {
            let d = (i as i64 - j as i64).abs();
            if d == 1 {
                C64::new(1.0, 0.0)
            } else if d == 0 {
                C64::new(i as f64 * 0.3, 0.0)
            } else {
                ZERO
            }
        });
        let real = HermitianEigen::new(&h);
        assert!(real.is_real());
        let eig = h.clone().symmetric_eigen();
        let mut reference: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for (a, b) in real.values.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(real.unitarity_defect() < 1e-12);
    }

    #[test]
    fn propagation_is_unitary_on_complex_matrix() {
        let h = CMatrix::from_fn(4, 4, |i, j| match (i as i64 - j as i64).signum() {
            1 => C64::new(0.5, -0.25),
            -1 => C64::new(0.5, 0.25),
            _ => C64::new(i as f64, 0.0),
        });
        let eig = HermitianEigen::new(&h);
        assert!(!eig.is_real());
        let v = CVector::from_fn(4, |i, _| C64::new(1.0, i as f64));
        let w = eig.propagate(&v, 3.7);
        assert!((w.norm() - v.norm()).abs() < 1e-12);
        let back = eig.propagate(&w, -3.7);
        assert!((back - v).norm() < 1e-12);
    }

    #[test]
    fn closed_form_2x2_norm_matches_svd() {
        let m = [
            [C64::new(1.0, 2.0), C64::new(-0.5, 0.0)],
            [C64::new(0.3, 0.1), C64::new(2.0, -1.0)],
        ];
        let dense = CMatrix::from_fn(2, 2, |i, j| m[i][j]);
        assert!((norm2x2(&m) - spectral_norm(&dense)).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_agrees_with_svd() {
        let a = CMatrix::from_fn(6, 6, |i, j| C64::new((i * j) as f64 * 0.1 + 1.0 / (1.0 + i as f64 + j as f64), (i as f64 - j as f64) * 0.05));
        let exact = spectral_norm(&a);
        let approx = spectral_norm_power(&a, 1e-13, 10_000);
        assert!((exact - approx).abs() < 1e-6 * exact);
    }

    #[test]
    fn real_gemm_product_matches_naive() {
        let a = CMatrix::from_fn(3, 4, |i, j| C64::new(i as f64 - j as f64, 0.5 * j as f64));
        let b = CMatrix::from_fn(4, 2, |i, j| C64::new(1.0 + i as f64, -(j as f64)));
        assert!((cmul(&a, &b) - &a * &b).norm() < 1e-12);
    }
}
