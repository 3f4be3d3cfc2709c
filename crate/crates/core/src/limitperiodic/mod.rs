//! Transfer matrices and Lyapunov exponents of one-dimensional Schrodinger
//! operators, the Thouless-formula and Damanik-Tcheremchantsev diagnostics,
//! and finite-stage versions of the perturbation-stability construction
//! for limit-periodic potentials.

pub mod stability;
pub mod transfer;

pub use stability::{
    check_envelope, generic_builder, lest2_probe, perturbation_stability, schrodinger_operator, sup_distance,
    GenericReport, Lest2Certificate, PsiBattery, StabilityReport, StageRecord, VerificationRow,
};
pub use transfer::{
    dt_criterion, dt_integrand, family_lyapunov, finite_lyapunov, periodic_lyapunov, periodic_window,
    thouless_check, transfer_matrix, DtCriterion, PotentialFamily, ThoulessReport, TransferProduct,
};
