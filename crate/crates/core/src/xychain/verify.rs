use serde::Serialize;

use crate::blockjacobi::TruncatedOperator;
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, CMatrix};
use crate::xychain::chain::{Local, SpinChain};
use crate::xychain::spec::{build_m, row_index, XYChainSpec};

pub const BOUND_SLACK: f64 = 1e-8;

/// The finite matrix `M` on the chain's sites (open boundary).
pub fn chain_matrix(chain: &SpinChain, spec: &XYChainSpec) -> Result<TruncatedOperator> {
    let (lo, hi) = chain.range();
    build_m(spec)?.truncate_window(lo, hi)
}

fn check_site(chain: &SpinChain, site: i64) -> Result<()> {
    let (lo, hi) = chain.range();
    if site < lo || site > hi {
        return Err(Error::InvalidSpec(format!("site {site} is outside the chain [{lo}, {hi}]")));
    }
    Ok(())
}

/// `|| tau_t(c_j) - sum_k exp(-itM)_{j, k} C_k ||`.
pub fn verify_free_fermion(chain: &SpinChain, spec: &XYChainSpec, j: i64, t: f64) -> Result<f64> {
    check_site(chain, j)?;
    let m = chain_matrix(chain, spec)?;
    let u = m.propagator(t);
    let row = row_index(chain.range().0, j, false);
    let lhs = chain.heisenberg(&chain.c(j), t);
    let rhs = chain
        .fermion_vector()
        .iter()
        .enumerate()
        .fold(CMatrix::zeros(chain.dim(), chain.dim()), |acc, (k, ck)| acc + ck * u[(row, k)]);
    Ok(spectral_norm(&(lhs - rhs)))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Operator pair for the four entries above the diagonal: rows `c_l`,
/// `c_l`, `c_l^*`, `c_l^*` against columns `c_r`, `c_r^*`, `c_r`, `c_r^*`.
/// `B` is `a_r^*` against a `c_r` column and `a_r` against a `c_r^*` column,
/// since `[c_r, a_r] = [c_r^*, a_r^*] = 0`.
/// Returns `(A is c_l^*, B, column is the c_r^* row)`.
fn lower_case(case: u8) -> Result<(bool, Local, bool)> {
    match case {
        1 => Ok((false, Local::Raise, false)),
        2 => Ok((false, Local::Lower, true)),
        3 => Ok((true, Local::Raise, false)),
        4 => Ok((true, Local::Lower, true)),
        _ => Err(Error::InvalidSpec(format!("lower-bound case must be 1..=4, got {case}"))),
    }
}

/// `P_t(A, B) >= |exp(-itM)_{k, k'}| - 1e-8` for the selected case.
/// `lhs` is `P_t`, `rhs` the matrix entry modulus.
pub fn verify_lower_bound(
    chain: &SpinChain,
    spec: &XYChainSpec,
    l: i64,
    r: i64,
    t: f64,
    case: u8,
) -> Result<BoundCheck> {
    check_site(chain, l)?;
    check_site(chain, r)?;
    if l >= r {
        return Err(Error::InvalidSpec(format!("lower bound needs l < r, got {l} and {r}")));
    }
    let (a_dag, b_op, col_dag) = lower_case(case)?;
    let a = if a_dag { chain.c_dag(l) } else { chain.c(l) };
    let b = chain.local(r, b_op);
    let p = chain.commutator_norm(&a, &b, t)?;
    let lo = chain.range().0;
    let u = chain_matrix(chain, spec)?.propagator(t);
    let entry = u[(row_index(lo, l, a_dag), row_index(lo, r, col_dag))].norm();
    Ok(BoundCheck {
        lhs: p,
        rhs: entry,
        ok: p >= entry - BOUND_SLACK,
    })
}

/// `||[tau_t(a_s), B]|| <= 8 ||B|| sum |exp(-itM)_{k, k'}| + 1e-8`, with `k`
/// over the rows of sites `<= s` and `k'` over the rows of sites `>= r`.
pub fn verify_upper_bound(
    chain: &SpinChain,
    spec: &XYChainSpec,
    s: i64,
    r: i64,
    b: &CMatrix,
    t: f64,
) -> Result<BoundCheck> {
    check_site(chain, s)?;
    check_site(chain, r)?;
    if s >= r {
        return Err(Error::InvalidSpec(format!("upper bound needs s < r, got {s} and {r}")));
    }
    let lhs = chain.commutator_norm(&chain.local(s, Local::Lower), b, t)?;
    let (lo, hi) = chain.range();
    let u = chain_matrix(chain, spec)?.propagator(t);
    let rows = 0..row_index(lo, s, true) + 1;
    let cols = row_index(lo, r, false)..row_index(lo, hi, true) + 1;
    let sum: f64 = rows
        .flat_map(|k| cols.clone().map(move |kp| (k, kp)))
        .map(|(k, kp)| u[(k, kp)].norm())
        .sum();
    let rhs = 8.0 * chain.operator_norm(b) * sum;
    Ok(BoundCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + BOUND_SLACK,
    })
}

/// For each `r`, the first time at which `P_t(c_l, a_r^*)` reaches
/// `threshold`: a scan with step `dt` up to `t_max`, then bisection to
/// `dt / 32`. `None` when the threshold is never reached.
pub fn first_crossings(
    chain: &SpinChain,
    l: i64,
    rs: &[i64],
    threshold: f64,
    dt: f64,
    t_max: f64,
) -> Result<Vec<Option<f64>>> {
    check_site(chain, l)?;
    for &r in rs {
        check_site(chain, r)?;
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidSpec(format!("scan step must be positive, got {dt}")));
    }
    let a_eig = chain.spectral().conjugate_into(&chain.c(l));
    let bs: Vec<CMatrix> = rs.iter().map(|&r| chain.local(r, Local::Raise)).collect();
    let mut out = vec![None; rs.len()];
    let mut brackets = vec![None; rs.len()];
    let mut prev = 0.0;
    let mut k = 1;
    while brackets.iter().any(Option::is_none) {
        let t = k as f64 * dt;
        if t > t_max + 1e-12 {
            break;
        }
        let open: Vec<usize> = (0..rs.len()).filter(|&i| brackets[i].is_none()).collect();
        let refs: Vec<&CMatrix> = open.iter().map(|&i| &bs[i]).collect();
        for (&i, p) in open.iter().zip(chain.commutator_norms(&a_eig, &refs, t)?) {
            if p >= threshold {
                brackets[i] = Some((prev, t));
            }
        }
        prev = t;
        k += 1;
    }
    for (i, br) in brackets.into_iter().enumerate() {
        if let Some((mut lo, mut hi)) = br {
            while hi - lo > dt / 32.0 {
                let mid = 0.5 * (lo + hi);
                if chain.commutator_norms(&a_eig, &[&bs[i]], mid)?[0] >= threshold {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            out[i] = Some(hi);
        }
    }
    Ok(out)
}
