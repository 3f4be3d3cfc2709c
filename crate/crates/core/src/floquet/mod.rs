//! Bloch fibers, band structure and the asymptotic velocity operator `Q`.

mod bands;
mod fiber;
mod qop;

pub use bands::{band_structure, q_norm, q_norm_with_grid, BandStructure, QNorm, GAP_TOL, MIN_GRID, QNORM_GRID};
pub use fiber::{build_fiber, fiber_matrices, FloquetFiber, CLUSTER_TOL};
pub use qop::{
    apply_q, apply_q_to_tolerance, fourier_transform, parseval_check, q_expectation, QApplication,
    COEFF_TOL, DEFAULT_Q_GRID, MAX_Q_GRID,
};
