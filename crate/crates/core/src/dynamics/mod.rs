//! Time evolution on finite windows, position moments, transport exponents
//! and numerical checks of the ballistic transport statements.

mod checks;
mod evolution;
mod probes;

pub use checks::{
    check_ballistic_limit, check_derivative_identity, derivative_residual_on, heisenberg_half_width,
    heisenberg_position, BallisticReport, BallisticRow,
};
pub use evolution::{
    edge_mass, evolve, exponents_from_trajectory, geometric_times, moment, moment_trajectory,
    moment_trajectory_on, required_half_width, trajectory_half_width, transport_exponents,
    ExponentEstimate, MomentTrajectory, EDGE_SITES, TAIL_TOL, WINDOW_MARGIN,
};
pub use probes::{
    corollary_probe, default_time_grid, linear_fit, localization_diagnostic, CorollaryRecord,
    CorollaryReport, LocalizationReport, LocalizationRow, LOCALIZED_R2, LOCALIZED_SLOPE,
};
