//! Three-level leapfrog for `φ_tt − φ_xx = V′(φ)` on a periodic grid, as
//! a reference integrator for the box scheme.

use crate::error::{Error, Result};
use crate::lagrangian::Potential;

use super::box_scheme::Grid1P1;
use super::exact::ExactSolution;

/// Runs from exact data at `t = 0` and `t = Δt` to `t_end`, returning
/// node values of `φ` at the final time.
pub fn leapfrog(potential: &Potential, grid: &Grid1P1, initial: &ExactSolution) -> Result<Vec<f64>> {
    grid.validate()?;
    let nx = grid.nx;
    let dx = grid.dx();
    let dt = grid.effective_dt();
    let steps = grid.steps();
    if grid.cfl() > 1.0 {
        return Err(Error::InvalidParameter(format!("leapfrog needs CFL ≤ 1, got {}", grid.cfl())));
    }
    let twist = initial.twist();
    let sample = |t: f64| (0..nx).map(|j| initial.eval(t, grid.x(j)).0).collect::<Vec<_>>();
    let mut prev = sample(0.0);
    if steps == 0 {
        return Ok(prev);
    }
    let mut cur = sample(dt);
    let r2 = (dt / dx).powi(2);
    for _ in 1..steps {
        let mut next = vec![0.0; nx];
        for j in 0..nx {
            let left = if j == 0 { cur[nx - 1] - twist } else { cur[j - 1] };
            let right = if j + 1 == nx { cur[0] + twist } else { cur[j + 1] };
            let force = potential.gradient(&[cur[j]])[0];
            next[j] = 2.0 * cur[j] - prev[j] + r2 * (left - 2.0 * cur[j] + right) + dt * dt * force;
        }
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(cur)
}
