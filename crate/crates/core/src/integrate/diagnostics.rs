//! Conserved totals and the local energy-balance residual on box-scheme
//! states.

use crate::error::Result;
use crate::lagrangian::{LagrangianDensity, PhasePoint};
use crate::lagrangian::hamiltonian_partials;
use crate::noether::{current_with_jet, SymmetryGenerator};

use super::box_scheme::{FieldState, Grid1P1};

/// One output record; see [`totals`]. `max_div_residual` is the largest
/// cell energy-balance residual over the steps since the previous row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub energy: f64,
    pub momentum: f64,
    pub wave_action: f64,
    pub max_div_residual: f64,
}

impl DiagnosticsRow {
    pub const HEADER: [&'static str; 5] = ["t", "energy", "momentum", "wave_action", "max_div_residual"];

    pub fn fields(&self) -> [f64; 5] {
        [self.t, self.energy, self.momentum, self.wave_action, self.max_div_residual]
    }
}

/// Cell-centred densities: `energy = −J⁰` of the time-translation current
/// and `momentum = J⁰` of the space-translation current, both at the cell
/// average `μ_x Z` with `φ_x` replaced by the difference `δ_x φ`.
pub fn cell_densities(l: &LagrangianDensity, state: &FieldState, grid: &Grid1P1) -> Result<Vec<[f64; 2]>> {
    let spec = l.spec();
    let n = state.fiber_dim;
    let dx = grid.dx();
    let tt = SymmetryGenerator::time_translation(spec);
    let st = SymmetryGenerator::space_translation(spec, 1);
    let mut out = Vec::with_capacity(state.nx);
    for j in 0..state.nx {
        let left = state.node(j);
        let right = state.node_wrapped(j as isize + 1);
        let avg: Vec<f64> = left.iter().zip(&right).map(|(a, b)| 0.5 * (a + b)).collect();
        let z = PhasePoint::from_state(vec![state.t, grid.x(j) + 0.5 * dx], &avg, n);
        let hp = hamiltonian_partials(l, &z)?;
        let mut v = hp.jet.v.clone();
        for a in 0..n {
            v[(a, 1)] = (right[a] - left[a]) / dx;
        }
        let e = current_with_jet(spec, &tt, &z, hp.h, &v)[0];
        let m = current_with_jet(spec, &st, &z, hp.h, &v)[0];
        out.push([-e, m]);
    }
    Ok(out)
}

/// Energy flux `−J¹` at each node, evaluated at the time average of two
/// levels with `φ_t` replaced by `δ_t φ`.
pub fn node_energy_flux(l: &LagrangianDensity, old: &FieldState, new: &FieldState, grid: &Grid1P1) -> Result<Vec<f64>> {
    let spec = l.spec();
    let n = old.fiber_dim;
    let dt = new.t - old.t;
    let tt = SymmetryGenerator::time_translation(spec);
    let mut out = Vec::with_capacity(old.nx);
    for j in 0..old.nx {
        let (a, b) = (old.node(j), new.node(j));
        let avg: Vec<f64> = a.iter().zip(b).map(|(a, b)| 0.5 * (a + b)).collect();
        let z = PhasePoint::from_state(vec![old.t + 0.5 * dt, grid.x(j)], &avg, n);
        let hp = hamiltonian_partials(l, &z)?;
        let mut v = hp.jet.v.clone();
        for c in 0..n {
            v[(c, 0)] = (b[c] - a[c]) / dt;
        }
        out.push(-current_with_jet(spec, &tt, &z, hp.h, &v)[1]);
    }
    Ok(out)
}

/// Totals at one time level: cell energy and momentum, and `Σ_A ∫p_A⁰`.
pub fn totals(l: &LagrangianDensity, state: &FieldState, grid: &Grid1P1) -> Result<(f64, f64, f64)> {
    let cells = cell_densities(l, state, grid)?;
    let dx = grid.dx();
    let energy = cells.iter().map(|c| c[0]).sum::<f64>() * dx;
    let momentum = cells.iter().map(|c| c[1]).sum::<f64>() * dx;
    let mut action = 0.0;
    for j in 0..state.nx {
        for a in 0..state.fiber_dim {
            action += state.p0(j, a);
        }
    }
    Ok((energy, momentum, action * dx))
}

/// `max_j |(e_j^{n+1} − e_j^n)/Δt + (F_{j+1} − F_j)/Δx|` over cells.
pub fn energy_balance_residual(old: &[[f64; 2]], new: &[[f64; 2]], flux: &[f64], dt: f64, dx: f64) -> f64 {
    let nx = old.len();
    let mut worst = 0.0f64;
    for j in 0..nx {
        let r = (new[j][0] - old[j][0]) / dt + (flux[(j + 1) % nx] - flux[j]) / dx;
        worst = worst.max(r.abs());
    }
    worst
}

/// Least-squares slope of `y` against `t` and its standard error.
pub fn trend(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = t.iter().zip(y).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let icpt = ym - slope * tm;
    let rss: f64 = t.iter().zip(y).map(|(t, y)| (y - icpt - slope * t).powi(2)).sum();
    let se = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    (slope, se)
}
