//! Ballistic transport for periodic block Jacobi operators, the free-fermion
//! matrix of the anisotropic XY chain, and transfer-matrix diagnostics for
//! limit-periodic Schrödinger operators.

pub mod blockjacobi;
pub mod dynamics;
pub mod error;
pub mod floquet;
pub mod limitperiodic;
pub mod linalg;
pub mod quad;
pub mod xychain;

pub use blockjacobi::{BlockJacobiOperator, BlockSpec, PacketSpec, TruncatedOperator, WavePacket};
pub use error::{Error, Result};
