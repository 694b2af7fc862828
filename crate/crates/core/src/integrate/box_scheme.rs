//! Preissmann box scheme for `M Z_t + K Z_x = ∇H(Z)` on a periodic grid.
//!
//! Cell `j` spans nodes `j, j+1` and one time step; its equation is
//!
//! ```text
//! M (μ_x Z^{n+1} − μ_x Z^n)/Δt + K (μ_t Z_{j+1} − μ_t Z_j)/Δx = ∇H(Z̄_j)
//! ```
//!
//! with `Z̄_j` the average of the four corners. Each step is solved by
//! Newton's method with a banded LU on a folded node ordering, so the
//! periodic coupling stays inside the band.

use nalgebra::{DMatrix, DVector};

use super::banded::BandMatrix;
use crate::bundle::SectionPatch;
use crate::error::{Error, Result};
use crate::lagrangian::{hamiltonian_gradient_hessian, legendre, LagrangianDensity, PhasePoint};
use crate::multihamiltonian::assemble_structure_matrices;
use crate::bundle::jet_of_section;

pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;

/// Uniform periodic grid on `[0, length)` with a fixed time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1P1 {
    pub nx: usize,
    pub length: f64,
    pub dt: f64,
    pub t_end: f64,
}

impl Grid1P1 {
    pub fn new(nx: usize, length: f64, dt: f64, t_end: f64) -> Result<Self> {
        let g = Self { nx, length, dt, t_end };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 8 {
            return Err(Error::InvalidParameter(format!("nx must be at least 8, got {}", self.nx)));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidParameter(format!("length must be positive, got {}", self.length)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    pub fn cfl(&self) -> f64 {
        self.dt / self.dx()
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    /// Number of steps to reach `t_end`, rounding up.
    pub fn steps(&self) -> usize {
        let s = self.t_end / self.dt;
        let r = s.round();
        if (s - r).abs() <= 1e-9 * s.max(1.0) {
            r as usize
        } else {
            s.ceil() as usize
        }
    }

    /// The step actually taken so that `steps() · dt = t_end` exactly.
    pub fn effective_dt(&self) -> f64 {
        match self.steps() {
            0 => self.dt,
            s => self.t_end / s as f64,
        }
    }
}

/// Node values `Z_j = (φ^A, p_A^0, p_A^1)` at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub nx: usize,
    pub fiber_dim: usize,
    /// Node-major: node `j` occupies `[3N j, 3N (j+1))`.
    pub z: Vec<f64>,
    /// `φ(x + length) − φ(x)` per component.
    pub twist: Vec<f64>,
}

impl FieldState {
    pub fn zeros(nx: usize, fiber_dim: usize) -> Self {
        Self {
            t: 0.0,
            nx,
            fiber_dim,
            z: vec![0.0; 3 * fiber_dim * nx],
            twist: vec![0.0; fiber_dim],
        }
    }

    pub fn block(&self) -> usize {
        3 * self.fiber_dim
    }

    pub fn node(&self, j: usize) -> &[f64] {
        let b = self.block();
        &self.z[b * j..b * (j + 1)]
    }

    pub fn phi(&self, j: usize, a: usize) -> f64 {
        self.node(j)[a]
    }

    pub fn p0(&self, j: usize, a: usize) -> f64 {
        self.node(j)[self.fiber_dim + a]
    }

    pub fn p1(&self, j: usize, a: usize) -> f64 {
        self.node(j)[2 * self.fiber_dim + a]
    }

    /// Node `j` for any integer `j`, with the twist applied across the
    /// periodic seam.
    pub fn node_wrapped(&self, j: isize) -> Vec<f64> {
        let nx = self.nx as isize;
        let wraps = j.div_euclid(nx);
        let mut out = self.node(j.rem_euclid(nx) as usize).to_vec();
        for a in 0..self.fiber_dim {
            out[a] += wraps as f64 * self.twist[a];
        }
        out
    }

    /// Samples `(φ, ∂L/∂v)` of a scalar section at time `t`.
    pub fn from_section(
        l: &LagrangianDensity,
        patch: &SectionPatch,
        grid: &Grid1P1,
        t: f64,
        twist: Vec<f64>,
    ) -> Result<Self> {
        let n = l.spec().fiber_dim();
        if l.spec().n_space() != 1 {
            return Err(Error::UnsupportedDimension("box scheme needs n = 1".into()));
        }
        let mut s = Self::zeros(grid.nx, n);
        s.t = t;
        s.twist = twist;
        let b = s.block();
        for j in 0..grid.nx {
            let jet = jet_of_section(l.spec(), patch, &[t, grid.x(j)])?;
            let z = legendre(l, &jet)?;
            let node = &mut s.z[b * j..b * (j + 1)];
            node[..n].copy_from_slice(&z.y);
            node[n..].copy_from_slice(z.p.as_slice());
        }
        Ok(s)
    }
}

/// Position of node `j` in the folded ordering `0, nx−1, 1, nx−2, …`.
fn folded(j: usize, nx: usize) -> usize {
    if 2 * j < nx {
        2 * j
    } else {
        2 * (nx - 1 - j) + 1
    }
}

/// One-step solver for a fixed Lagrangian and grid.
#[derive(Debug, Clone)]
pub struct BoxScheme {
    l: LagrangianDensity,
    grid: Grid1P1,
    dt: f64,
    m: DMatrix<f64>,
    k: DMatrix<f64>,
}

/// Newton statistics for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub iterations: usize,
    pub residual: f64,
}

impl BoxScheme {
    pub fn new(l: LagrangianDensity, grid: Grid1P1) -> Result<Self> {
        grid.validate()?;
        let spec = l.spec();
        if spec.n_space() != 1 {
            return Err(Error::UnsupportedDimension(format!(
                "box scheme needs one space dimension, got {}",
                spec.n_space()
            )));
        }
        if !spec.is_flat() {
            return Err(Error::UnsupportedModel("box scheme needs a flat connection".into()));
        }
        let sm = assemble_structure_matrices(spec);
        let dt = grid.effective_dt();
        Ok(Self {
            m: sm.omega_f64(0),
            k: sm.omega_f64(1),
            l,
            grid,
            dt,
        })
    }

    pub fn grid(&self) -> &Grid1P1 {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn lagrangian(&self) -> &LagrangianDensity {
        &self.l
    }

    fn cell_average(&self, old: &FieldState, new: &FieldState, j: usize) -> Vec<f64> {
        let j = j as isize;
        let (a, b, c, d) = (
            old.node_wrapped(j),
            old.node_wrapped(j + 1),
            new.node_wrapped(j),
            new.node_wrapped(j + 1),
        );
        (0..a.len()).map(|i| 0.25 * (a[i] + b[i] + c[i] + d[i])).collect()
    }

    /// Residual of every cell, and optionally the Hessians of `H` at the
    /// cell averages.
    fn residual(
        &self,
        old: &FieldState,
        new: &FieldState,
        want_hessians: bool,
    ) -> Result<(Vec<f64>, Vec<DMatrix<f64>>)> {
        let nx = self.grid.nx;
        let n = old.fiber_dim;
        let bsz = old.block();
        let dx = self.grid.dx();
        let mut out = vec![0.0; nx * bsz];
        let mut hessians = Vec::with_capacity(if want_hessians { nx } else { 0 });
        let x = vec![0.0, 0.0];
        for j in 0..nx {
            let ji = j as isize;
            let (o0, o1, n0, n1) = (
                old.node_wrapped(ji),
                old.node_wrapped(ji + 1),
                new.node_wrapped(ji),
                new.node_wrapped(ji + 1),
            );
            let dt_part = DVector::from_iterator(bsz, (0..bsz).map(|i| 0.5 * ((n0[i] + n1[i]) - (o0[i] + o1[i])) / self.dt));
            let dx_part = DVector::from_iterator(bsz, (0..bsz).map(|i| 0.5 * ((o1[i] + n1[i]) - (o0[i] + n0[i])) / dx));
            let avg = self.cell_average(old, new, j);
            let z = PhasePoint::from_state(x.clone(), &avg, n);
            let (grad, hess, _) = hamiltonian_gradient_hessian(&self.l, &z, None)?;
            let r = &self.m * dt_part + &self.k * dx_part - grad;
            out[bsz * j..bsz * (j + 1)].copy_from_slice(r.as_slice());
            if want_hessians {
                hessians.push(hess);
            }
        }
        Ok((out, hessians))
    }

    /// Largest cell residual of a candidate step.
    pub fn step_residual(&self, old: &FieldState, new: &FieldState) -> Result<f64> {
        let (r, _) = self.residual(old, new, false)?;
        Ok(r.iter().fold(0.0, |m, v| m.max(v.abs())))
    }

    /// Advances one step. `step_index` only labels errors.
    pub fn step(&self, state: &FieldState, step_index: usize) -> Result<(FieldState, StepInfo)> {
        let nx = self.grid.nx;
        if state.nx != nx || state.fiber_dim != self.l.spec().fiber_dim() {
            return Err(Error::ShapeMismatch {
                context: "box scheme state",
                expected: nx,
                actual: state.nx,
            });
        }
        let n = state.fiber_dim;
        let bsz = state.block();
        let dx = self.grid.dx();
        let mut new = state.clone();
        new.t = state.t + self.dt;
        let fail = |cell: usize, source: Error| Error::StepFailed {
            step: step_index,
            cell,
            source: Box::new(source),
        };
        let even = nx % 2 == 0;
        let mut last = f64::INFINITY;
        for iter in 0..=NEWTON_MAX_ITER {
            let (r, hess) = self
                .residual(state, &new, iter < NEWTON_MAX_ITER)
                .map_err(|e| fail(0, e))?;
            let (worst_idx, worst) = r
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
            last = worst;
            if !worst.is_finite() {
                return Err(fail(
                    worst_idx / bsz,
                    Error::NoConvergence {
                        what: "box-scheme Newton",
                        iterations: iter,
                        residual: worst,
                    },
                ));
            }
            if worst <= NEWTON_TOL {
                return Ok((
                    new,
                    StepInfo {
                        iterations: iter,
                        residual: worst,
                    },
                ));
            }
            if iter == NEWTON_MAX_ITER {
                break;
            }
            // assemble J on the folded ordering
            let width = 3 * bsz - 1;
            let mut jac = BandMatrix::zeros(nx * bsz, width, width);
            let mut rhs = vec![0.0; nx * bsz];
            let left = &self.m / (2.0 * self.dt) - &self.k / (2.0 * dx);
            let right = &self.m / (2.0 * self.dt) + &self.k / (2.0 * dx);
            for j in 0..nx {
                let row0 = folded(j, nx) * bsz;
                let c0 = folded(j, nx) * bsz;
                let c1 = folded((j + 1) % nx, nx) * bsz;
                let h4 = &hess[j] * 0.25;
                for r_ in 0..bsz {
                    rhs[row0 + r_] = -r[j * bsz + r_];
                    for c in 0..bsz {
                        jac.add(row0 + r_, c0 + c, left[(r_, c)] - h4[(r_, c)]);
                        jac.add(row0 + r_, c1 + c, right[(r_, c)] - h4[(r_, c)]);
                    }
                }
            }
            if even {
                // pin δp⁰ at node 0 in place of cell 0's redundant p⁰ rows
                for a in 0..n {
                    let i = folded(0, nx) * bsz + n + a;
                    jac.set_identity_row(i);
                    rhs[i] = 0.0;
                }
            }
            let lu = jac.lu().map_err(|e| fail(worst_idx / bsz, e))?;
            lu.solve_in_place(&mut rhs);
            if even {
                for a in 0..n {
                    let mut proj = 0.0;
                    for j in 0..nx {
                        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                        proj += s * rhs[folded(j, nx) * bsz + n + a];
                    }
                    proj /= nx as f64;
                    for j in 0..nx {
                        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                        rhs[folded(j, nx) * bsz + n + a] -= s * proj;
                    }
                }
            }
            for j in 0..nx {
                let src = folded(j, nx) * bsz;
                for c in 0..bsz {
                    new.z[j * bsz + c] += rhs[src + c];
                }
            }
        }
        Err(fail(
            0,
            Error::NoConvergence {
                what: "box-scheme Newton",
                iterations: NEWTON_MAX_ITER,
                residual: last,
            },
        ))
    }
}
