//! Structure-preserving integration in one space dimension.

mod banded;
mod box_scheme;
mod diagnostics;
mod exact;
mod leapfrog;
mod simulate;

pub use banded::{BandLu, BandMatrix};
pub use box_scheme::{BoxScheme, FieldState, Grid1P1, StepInfo, NEWTON_MAX_ITER, NEWTON_TOL};
pub use diagnostics::{cell_densities, energy_balance_residual, node_energy_flux, totals, trend, DiagnosticsRow};
pub use exact::{exact_solution, ExactSolution};
pub use leapfrog::leapfrog;
pub use simulate::{
    simulate, DiagnosticsConfig, DiagnosticsWriter, GridConfig, InitialConfig, SimulationConfig, SimulationOutput,
};

use crate::error::Result;
use crate::lagrangian::LagrangianDensity;

/// Advances `state` by one box-scheme step.
pub fn step_box(l: &LagrangianDensity, state: &FieldState, grid: &Grid1P1) -> Result<FieldState> {
    let scheme = BoxScheme::new(l.clone(), *grid)?;
    Ok(scheme.step(state, 0)?.0)
}
