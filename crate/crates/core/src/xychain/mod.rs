//! Anisotropic XY spin chains: the block Jacobi matrix `M` of the
//! Jordan-Wigner fermions, an exact dense spin simulator for short chains,
//! and numerical checks of the Lieb-Robinson type bounds.

pub mod chain;
pub mod spec;
pub mod verify;

pub use chain::{build_spin_hamiltonian, Local, SpinChain, MAX_SITES};
pub use spec::{build_m, lr_velocity_bound, row_index, XYChainSpec};
pub use verify::{
    chain_matrix, first_crossings, verify_free_fermion, verify_lower_bound, verify_upper_bound, BoundCheck,
};
