//! First-order multisymplectic form of a Lagrangian field theory.
//!
//! The fiber state is `Z = (y^A; p_A^0; p_A^1; …; p_A^n)`, length
//! `d = N(n+2)`, with `y^A` at index `A` and `p_A^μ` at `N + μN + A`.
//! For `n = 1, N = 1` this is `Z = (φ, p⁰, p¹)` and `ω^{(0)}, ω^{(1)}` are
//! Bridges' `M` and `K`.
//!
//! Signs: the implemented system is `∂H/∂p = v + 𝔄`,
//! `∂_μ p^μ = −∂H/∂y` (plus the connection term), equivalently
//! `M ∂₀Z + K ∂₁Z = G` with `G = (∂H/∂y − p·∂𝔄/∂y, ∂H/∂p − 𝔄)`.

use nalgebra::{DMatrix, DVector};

use crate::bundle::{jet_of_section, DiffStencil, FieldSpec, SectionPatch};
use crate::error::{Error, Result};
use crate::lagrangian::{flat_index, hamiltonian_partials, legendre, LagrangianDensity};

/// The `n+1` constant skew pairings `ω^{(μ)}` on the fiber state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureMatrices {
    pub n_space: usize,
    pub fiber_dim: usize,
    pub d: usize,
    pub matrices: Vec<DMatrix<i32>>,
}

impl StructureMatrices {
    pub fn omega(&self, mu: usize) -> &DMatrix<i32> {
        &self.matrices[mu]
    }

    pub fn omega_f64(&self, mu: usize) -> DMatrix<f64> {
        self.matrices[mu].map(f64::from)
    }

    /// Index of `y^A` in `Z`.
    pub fn y_index(&self, a: usize) -> usize {
        a
    }

    /// Index of `p_A^μ` in `Z`.
    pub fn p_index(&self, a: usize, mu: usize) -> usize {
        self.fiber_dim + flat_index(self.fiber_dim, a, mu)
    }
}

pub fn assemble_structure_matrices(spec: &FieldSpec) -> StructureMatrices {
    let n = spec.fiber_dim();
    let d = n * (spec.n_space() + 2);
    let matrices = (0..spec.base_dim())
        .map(|mu| {
            let mut m = DMatrix::zeros(d, d);
            for a in 0..n {
                let p = n + flat_index(n, a, mu);
                m[(a, p)] = -1;
                m[(p, a)] = 1;
            }
            m
        })
        .collect();
    StructureMatrices {
        n_space: spec.n_space(),
        fiber_dim: n,
        d,
        matrices,
    }
}

/// Exact rank of a small integer matrix (fraction-free elimination).
pub fn integer_rank(m: &DMatrix<i32>) -> usize {
    let mut a = m.map(i64::from);
    let (rows, cols) = a.shape();
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows).find(|&r| a[(r, c)] != 0) else {
            continue;
        };
        a.swap_rows(rank, piv);
        for r in 0..rows {
            if r != rank && a[(r, c)] != 0 {
                let (f, g) = (a[(r, c)], a[(rank, c)]);
                for k in 0..cols {
                    a[(r, k)] = a[(r, k)] * g - a[(rank, k)] * f;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// De Donder–Weyl residual blocks at one base point.
#[derive(Debug, Clone, PartialEq)]
pub struct DdwResidual {
    /// `∂H/∂y^A − p·∂𝔄/∂y^A + ∂_μ p_A^μ`
    pub r_y: Vec<f64>,
    /// `∂H/∂p_A^μ − (v^A_μ + 𝔄^A_μ)`, `N × (n+1)`.
    pub r_p: DMatrix<f64>,
    pub norm_y: f64,
    pub norm_p: f64,
}

impl DdwResidual {
    /// The same residual laid out on `Z`: `(r_y, r_p)` μ-major.
    pub fn as_state(&self) -> DVector<f64> {
        let mut v = self.r_y.clone();
        v.extend_from_slice(self.r_p.as_slice());
        DVector::from_vec(v)
    }
}

/// Conjugate momenta `p = ∂L/∂v(j¹φ(x))` along a section.
pub fn conjugate_momenta(l: &LagrangianDensity, patch: &SectionPatch, x: &[f64]) -> Result<DMatrix<f64>> {
    let jet = jet_of_section(l.spec(), patch, x)?;
    Ok(legendre(l, &jet)?.p)
}

/// `∂_μ p_A^μ` along the conjugate section, by the given stencil.
pub fn momentum_divergence(
    l: &LagrangianDensity,
    patch: &SectionPatch,
    x: &[f64],
    stencil: DiffStencil,
) -> Result<Vec<f64>> {
    let n = l.spec().fiber_dim();
    let mut div = vec![0.0; n];
    for mu in 0..l.spec().base_dim() {
        let d = stencil.derivative(
            |xs| Ok(conjugate_momenta(l, patch, xs)?.column(mu).iter().copied().collect()),
            x,
            mu,
        )?;
        for (acc, v) in div.iter_mut().zip(d) {
            *acc += v;
        }
    }
    Ok(div)
}

/// `∂_μ Z` along the conjugate section: the `y` block from the patch's
/// derivative contract, the momentum blocks by the stencil.
fn state_derivative(
    l: &LagrangianDensity,
    patch: &SectionPatch,
    x: &[f64],
    mu: usize,
    stencil: DiffStencil,
) -> Result<DVector<f64>> {
    let grad = patch.first_derivatives(x)?;
    let dp = stencil.derivative(
        |xs| Ok(conjugate_momenta(l, patch, xs)?.as_slice().to_vec()),
        x,
        mu,
    )?;
    let mut out: Vec<f64> = grad.column(mu).iter().copied().collect();
    out.extend(dp);
    Ok(DVector::from_vec(out))
}

/// `p_B^μ ∂𝔄^B_μ/∂y^A` for each `A`.
fn connection_fiber_term(spec: &FieldSpec, x: &[f64], y: &[f64], p: &DMatrix<f64>) -> Vec<f64> {
    if spec.is_flat() {
        return vec![0.0; spec.fiber_dim()];
    }
    spec.connection_fiber_jacobian(x, y)
        .iter()
        .map(|da| p.dot(da))
        .collect()
}

pub fn ddw_residual(l: &LagrangianDensity, patch: &SectionPatch, x: &[f64]) -> Result<DdwResidual> {
    ddw_residual_with(l, patch, x, DiffStencil::default())
}

pub fn ddw_residual_with(
    l: &LagrangianDensity,
    patch: &SectionPatch,
    x: &[f64],
    stencil: DiffStencil,
) -> Result<DdwResidual> {
    let spec = l.spec();
    let jet = jet_of_section(spec, patch, x)?;
    let z = legendre(l, &jet)?;
    let hp = hamiltonian_partials(l, &z)?;
    let div = momentum_divergence(l, patch, x, stencil)?;
    let conn = connection_fiber_term(spec, x, &z.y, &z.p);
    let r_y: Vec<f64> = (0..spec.fiber_dim())
        .map(|a| hp.dh_dy[a] - conn[a] + div[a])
        .collect();
    let a = spec.connection_coeffs(x, &z.y);
    let r_p = &hp.dh_dp - (&jet.v + a);
    let norm_y = r_y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let norm_p = r_p.amax();
    Ok(DdwResidual {
        r_y,
        r_p,
        norm_y,
        norm_p,
    })
}

/// `E_A = ∂L/∂y^A − d/dx^μ ∂L/∂v^A_μ` with the total derivative expanded
/// by the chain rule.
pub fn euler_lagrange_residual(l: &LagrangianDensity, patch: &SectionPatch, x: &[f64]) -> Result<Vec<f64>> {
    let spec = l.spec();
    let jet = jet_of_section(spec, patch, x)?;
    let hess = patch.second_derivatives(x)?;
    let part = l.partials_at(&jet);
    let n = spec.fiber_dim();
    let nb = spec.base_dim();
    let mut e = part.dl_dy.clone();
    for (a, ea) in e.iter_mut().enumerate() {
        for mu in 0..nb {
            let i = flat_index(n, a, mu);
            let mut total = part.d2l_dvdx[(i, mu)];
            for b in 0..n {
                total += part.d2l_dvdy[(i, b)] * jet.v[(b, mu)];
                for nu in 0..nb {
                    total += part.d2l_dvdv[(i, flat_index(n, b, nu))] * hess[b][(nu, mu)];
                }
            }
            *ea -= total;
        }
    }
    Ok(e)
}

/// `M ∂₀Z + K ∂₁Z − G` for `n = 1`; equals `−(r_y, r_p)` on `Z`.
pub fn bridges_form_residual(l: &LagrangianDensity, patch: &SectionPatch, x: &[f64]) -> Result<DVector<f64>> {
    bridges_form_residual_with(l, patch, x, DiffStencil::default())
}

pub fn bridges_form_residual_with(
    l: &LagrangianDensity,
    patch: &SectionPatch,
    x: &[f64],
    stencil: DiffStencil,
) -> Result<DVector<f64>> {
    let spec = l.spec();
    if spec.n_space() != 1 {
        return Err(Error::UnsupportedDimension(format!(
            "Bridges form needs one space dimension, got {}",
            spec.n_space()
        )));
    }
    let sm = assemble_structure_matrices(spec);
    let jet = jet_of_section(spec, patch, x)?;
    let z = legendre(l, &jet)?;
    let hp = hamiltonian_partials(l, &z)?;
    let conn = connection_fiber_term(spec, x, &z.y, &z.p);
    let a = spec.connection_coeffs(x, &z.y);
    let mut g: Vec<f64> = (0..spec.fiber_dim()).map(|k| hp.dh_dy[k] - conn[k]).collect();
    g.extend((&hp.dh_dp - a).iter());
    let g = DVector::from_vec(g);
    let mut r = -g;
    for mu in 0..2 {
        r += sm.omega_f64(mu) * state_derivative(l, patch, x, mu, stencil)?;
    }
    Ok(r)
}

/// Maps a de Donder–Weyl residual onto the Bridges-form layout: the
/// permutation is the identity on `Z` and the overall sign is `−1`.
pub fn ddw_to_bridges(res: &DdwResidual) -> DVector<f64> {
    -res.as_state()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceSample {
    pub x: Vec<f64>,
    pub r_y: Vec<f64>,
    pub euler_lagrange: Vec<f64>,
    pub r_p_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub samples: Vec<EquivalenceSample>,
    /// `max |r_y + E|`
    pub max_fiber_mismatch: f64,
    /// `max |r_p|`
    pub max_momentum_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Default tolerance: `1e-8` for analytic jets, `1e-5` when the patch is
/// differenced.
pub fn equivalence_check(l: &LagrangianDensity, patch: &SectionPatch, xs: &[Vec<f64>]) -> Result<EquivalenceReport> {
    let analytic = xs.first().is_some_and(|x| patch.has_analytic_gradient(x));
    equivalence_check_with(l, patch, xs, if analytic { 1e-8 } else { 1e-5 })
}

pub fn equivalence_check_with(
    l: &LagrangianDensity,
    patch: &SectionPatch,
    xs: &[Vec<f64>],
    tolerance: f64,
) -> Result<EquivalenceReport> {
    let mut samples = Vec::with_capacity(xs.len());
    let mut mismatch = 0.0f64;
    let mut rp = 0.0f64;
    for x in xs {
        let ddw = ddw_residual(l, patch, x)?;
        let e = euler_lagrange_residual(l, patch, x)?;
        for (r, e) in ddw.r_y.iter().zip(&e) {
            mismatch = mismatch.max((r + e).abs());
        }
        rp = rp.max(ddw.norm_p);
        samples.push(EquivalenceSample {
            x: x.clone(),
            r_y: ddw.r_y,
            euler_lagrange: e,
            r_p_norm: ddw.norm_p,
        });
    }
    Ok(EquivalenceReport {
        samples,
        max_fiber_mismatch: mismatch,
        max_momentum_residual: rp,
        tolerance,
        passed: mismatch <= tolerance && rp <= tolerance,
    })
}
