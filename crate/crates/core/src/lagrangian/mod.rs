//! First-order Lagrangian densities `L(x, y, v)`, the covariant Legendre
//! transform and the covariant Hamiltonian on the primary constraint
//! manifold.
//!
//! Jet and multimomentum matrices are `N × (n+1)`. Wherever they are
//! flattened (Hessians, state vectors) the layout is μ-major: entry
//! `(A, μ)` goes to `μ·N + A`.

mod builtins;
mod expr;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bundle::{FieldSpec, JetPoint};
use crate::error::{Error, Result};

pub use builtins::{KineticForm, Potential, QuadraticDensity};
pub use expr::{DensityExpr, ExprDensity, FiniteDifferenceDensity};

/// Newton tolerance for Legendre inversion (max-norm of `∂L/∂v − p`,
/// relative to `max(1, |p|)`).
pub const LEGENDRE_TOL: f64 = 1e-10;
pub const LEGENDRE_MAX_ITER: usize = 50;

/// Flat μ-major index of `(A, μ)` for `N` fiber components.
#[inline]
pub fn flat_index(fiber_dim: usize, a: usize, mu: usize) -> usize {
    mu * fiber_dim + a
}

pub fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    // nalgebra stores column-major, and columns are μ: that is μ-major.
    DVector::from_column_slice(m.as_slice())
}

pub fn unflatten(v: &DVector<f64>, fiber_dim: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(fiber_dim, v.len() / fiber_dim, v.as_slice())
}

/// Value and derivatives of `L` at one jet point.
#[derive(Debug, Clone, PartialEq)]
pub struct Partials {
    pub l: f64,
    pub dl_dx: Vec<f64>,
    pub dl_dy: Vec<f64>,
    /// `∂L/∂v^A_μ`, `N × (n+1)`.
    pub dl_dv: DMatrix<f64>,
    /// `D × D` with `D = N(n+1)`, μ-major.
    pub d2l_dvdv: DMatrix<f64>,
    /// `D × N`.
    pub d2l_dvdy: DMatrix<f64>,
    /// `D × (n+1)`.
    pub d2l_dvdx: DMatrix<f64>,
    pub d2l_dydy: DMatrix<f64>,
}

impl Partials {
    pub fn zeros(spec: &FieldSpec) -> Self {
        let (n, b, d) = (spec.fiber_dim(), spec.base_dim(), spec.jet_dim());
        Self {
            l: 0.0,
            dl_dx: vec![0.0; b],
            dl_dy: vec![0.0; n],
            dl_dv: DMatrix::zeros(n, b),
            d2l_dvdv: DMatrix::zeros(d, d),
            d2l_dvdy: DMatrix::zeros(d, n),
            d2l_dvdx: DMatrix::zeros(d, b),
            d2l_dydy: DMatrix::zeros(n, n),
        }
    }
}

/// A Lagrangian density with its derivative contract.
pub trait Density: Send + Sync {
    fn spec(&self) -> &FieldSpec;
    fn name(&self) -> String;
    fn value(&self, x: &[f64], y: &[f64], v: &DMatrix<f64>) -> f64;
    fn partials(&self, x: &[f64], y: &[f64], v: &DMatrix<f64>) -> Partials;

    fn depends_on_x(&self) -> bool {
        true
    }

    fn depends_on_y(&self) -> bool {
        true
    }

    /// Whether `partials` is exact (closed form or automatic
    /// differentiation) rather than finite differences.
    fn exact_partials(&self) -> bool {
        true
    }

    /// Closed-form `H(x, y, p)` when the family knows it.
    fn closed_form_hamiltonian(&self, _z: &PhasePoint) -> Option<f64> {
        None
    }
}

/// Shared handle to a [`Density`].
#[derive(Clone)]
pub struct LagrangianDensity(Arc<dyn Density>);

impl fmt::Debug for LagrangianDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LagrangianDensity")
            .field("name", &self.0.name())
            .field("spec", self.0.spec())
            .finish()
    }
}

impl LagrangianDensity {
    pub fn new<D: Density + 'static>(density: D) -> Self {
        Self(Arc::new(density))
    }

    /// `L = ½(v₀² − Σ_i v_i²) + V(y)` summed over components.
    pub fn nonlinear_wave(n_space: usize, fiber_dim: usize, potential: Potential) -> Self {
        Self::new(QuadraticDensity::new(
            FieldSpec::new(n_space, fiber_dim),
            KineticForm::Wave,
            potential,
        ))
    }

    /// `L = ½|v|² − V(y)`, whose Euler–Lagrange equation is `Δφ + V′(φ) = 0`.
    pub fn elliptic_pattern(n_space: usize, fiber_dim: usize, potential: Potential) -> Self {
        Self::new(QuadraticDensity::new(
            FieldSpec::new(n_space, fiber_dim),
            KineticForm::Elliptic,
            potential,
        ))
    }

    /// `L = ½q̇² − ½q²`.
    pub fn harmonic_oscillator() -> Self {
        Self::nonlinear_wave(0, 1, Potential::KleinGordon { mass: 1.0 })
    }

    /// Built-in family by name: `nonlinear_wave`, `elliptic_pattern`,
    /// `mechanics` (the wave family at `n = 0`) or `harmonic_oscillator`.
    pub fn builtin(name: &str, n_space: usize, fiber_dim: usize, potential: &str) -> Result<Self> {
        let potential: Potential = potential.parse()?;
        match name {
            "nonlinear_wave" => Ok(Self::nonlinear_wave(n_space, fiber_dim, potential)),
            "elliptic_pattern" => Ok(Self::elliptic_pattern(n_space, fiber_dim, potential)),
            "mechanics" => Ok(Self::nonlinear_wave(0, fiber_dim, potential)),
            "harmonic_oscillator" => Ok(Self::harmonic_oscillator()),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }

    pub fn spec(&self) -> &FieldSpec {
        self.0.spec()
    }

    pub fn name(&self) -> String {
        self.0.name()
    }

    pub fn value(&self, x: &[f64], y: &[f64], v: &DMatrix<f64>) -> f64 {
        self.0.value(x, y, v)
    }

    pub fn partials(&self, x: &[f64], y: &[f64], v: &DMatrix<f64>) -> Partials {
        self.0.partials(x, y, v)
    }

    pub fn partials_at(&self, jet: &JetPoint) -> Partials {
        self.0.partials(&jet.x, &jet.y, &jet.v)
    }

    pub fn depends_on_x(&self) -> bool {
        self.0.depends_on_x()
    }

    pub fn depends_on_y(&self) -> bool {
        self.0.depends_on_y()
    }

    pub fn exact_partials(&self) -> bool {
        self.0.exact_partials()
    }

    pub fn closed_form_hamiltonian(&self, z: &PhasePoint) -> Option<f64> {
        self.0.closed_form_hamiltonian(z)
    }

    /// Largest relative disagreement between `partials` and central
    /// differences of `value` over the given jets. Relative means
    /// `|a − b| / max(1, |b|)`.
    pub fn cross_check(&self, samples: &[JetPoint]) -> f64 {
        let fd = FiniteDifferenceDensity::from_density(self.clone());
        samples
            .iter()
            .map(|s| {
                let a = self.partials_at(s);
                let b = fd.partials(&s.x, &s.y, &s.v);
                partials_distance(&a, &b)
            })
            .fold(0.0, f64::max)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn partials_distance(a: &Partials, b: &Partials) -> f64 {
    let mut worst = rel(a.l, b.l);
    let mut upd = |xs: &[f64], ys: &[f64]| {
        for (x, y) in xs.iter().zip(ys) {
            worst = worst.max(rel(*x, *y));
        }
    };
    upd(&a.dl_dx, &b.dl_dx);
    upd(&a.dl_dy, &b.dl_dy);
    upd(a.dl_dv.as_slice(), b.dl_dv.as_slice());
    upd(a.d2l_dvdv.as_slice(), b.d2l_dvdv.as_slice());
    upd(a.d2l_dvdy.as_slice(), b.d2l_dvdy.as_slice());
    upd(a.d2l_dvdx.as_slice(), b.d2l_dvdx.as_slice());
    upd(a.d2l_dydy.as_slice(), b.d2l_dydy.as_slice());
    worst
}

/// A point `(x^μ, y^A, p_A^μ)` of the primary constraint manifold, with
/// the affine coordinate `p` when it is known.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `p_A^μ`, `N × (n+1)`.
    pub p: DMatrix<f64>,
    pub p_affine: Option<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>, p: DMatrix<f64>) -> Self {
        Self {
            x,
            y,
            p,
            p_affine: None,
        }
    }

    pub fn validate(&self, spec: &FieldSpec) -> Result<()> {
        spec.check_base(&self.x, "phase point base")?;
        spec.check_fiber(&self.y, "phase point fiber")?;
        spec.check_jet_matrix(&self.p, "multimomenta")
    }

    /// Fiber state `Z = (y, p^0, …, p^n)`.
    pub fn state(&self) -> DVector<f64> {
        let mut z = Vec::with_capacity(self.y.len() + self.p.len());
        z.extend_from_slice(&self.y);
        z.extend_from_slice(self.p.as_slice());
        DVector::from_vec(z)
    }

    pub fn from_state(x: Vec<f64>, z: &[f64], fiber_dim: usize) -> Self {
        let y = z[..fiber_dim].to_vec();
        let p = DMatrix::from_column_slice(fiber_dim, (z.len() - fiber_dim) / fiber_dim, &z[fiber_dim..]);
        Self::new(x, y, p)
    }
}

/// `p_A^μ = ∂L/∂v^A_μ`, `p = L − p·v`.
pub fn legendre(l: &LagrangianDensity, jet: &JetPoint) -> Result<PhasePoint> {
    jet.validate(l.spec())?;
    let value = l.value(&jet.x, &jet.y, &jet.v);
    let p = l.partials_at(jet).dl_dv;
    let affine = value - p.dot(&jet.v);
    Ok(PhasePoint {
        x: jet.x.clone(),
        y: jet.y.clone(),
        p,
        p_affine: Some(affine),
    })
}

/// Solves `∂L/∂v(x, y, v) = p` for `v` by Newton's method on `∂²L/∂v∂v`.
pub fn invert_legendre(
    l: &LagrangianDensity,
    z: &PhasePoint,
    v_guess: Option<&DMatrix<f64>>,
) -> Result<JetPoint> {
    let spec = l.spec();
    z.validate(spec)?;
    let n = spec.fiber_dim();
    let mut v = match v_guess {
        Some(g) => {
            spec.check_jet_matrix(g, "Legendre initial guess")?;
            g.clone()
        }
        None => DMatrix::zeros(n, spec.base_dim()),
    };
    let scale = z.p.amax().max(1.0);
    let target = flatten(&z.p);
    let mut residual = f64::INFINITY;
    for _ in 0..=LEGENDRE_MAX_ITER {
        let part = l.partials(&z.x, &z.y, &v);
        let r = flatten(&part.dl_dv) - &target;
        residual = r.amax();
        if residual <= LEGENDRE_TOL * scale {
            return Ok(JetPoint::new(z.x.clone(), z.y.clone(), v));
        }
        let step = part
            .d2l_dvdv
            .lu()
            .solve(&r)
            .ok_or(Error::SingularJacobian("Legendre inversion"))?;
        if !step.iter().all(|s| s.is_finite()) {
            return Err(Error::SingularJacobian("Legendre inversion"));
        }
        v -= unflatten(&step, n);
    }
    Err(Error::NoConvergence {
        what: "Legendre inversion",
        iterations: LEGENDRE_MAX_ITER,
        residual,
    })
}

/// `H = p·(v + 𝔄) − L` at the Legendre-conjugate jet.
pub fn hamiltonian(l: &LagrangianDensity, z: &PhasePoint) -> Result<f64> {
    let jet = invert_legendre(l, z, None)?;
    Ok(hamiltonian_at(l, z, &jet))
}

fn hamiltonian_at(l: &LagrangianDensity, z: &PhasePoint, jet: &JetPoint) -> f64 {
    let a = l.spec().connection_coeffs(&z.x, &z.y);
    z.p.dot(&(&jet.v + a)) - l.value(&jet.x, &jet.y, &jet.v)
}

/// First partials of `H` together with the conjugate jet they were
/// evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianPartials {
    pub h: f64,
    pub dh_dx: Vec<f64>,
    pub dh_dy: Vec<f64>,
    /// `∂H/∂p_A^μ`, `N × (n+1)`; equals `v + 𝔄`.
    pub dh_dp: DMatrix<f64>,
    pub jet: JetPoint,
}

/// `∂H/∂p = v + 𝔄`, `∂H/∂y = p·∂𝔄/∂y − ∂L/∂y`, `∂H/∂x = p·∂𝔄/∂x − ∂L/∂x`,
/// by implicit differentiation through the Legendre inverse.
pub fn hamiltonian_partials(l: &LagrangianDensity, z: &PhasePoint) -> Result<HamiltonianPartials> {
    let jet = invert_legendre(l, z, None)?;
    hamiltonian_partials_at(l, z, jet)
}

pub(crate) fn hamiltonian_partials_at(
    l: &LagrangianDensity,
    z: &PhasePoint,
    jet: JetPoint,
) -> Result<HamiltonianPartials> {
    let spec = l.spec();
    let part = l.partials_at(&jet);
    let a = spec.connection_coeffs(&z.x, &z.y);
    let h = z.p.dot(&(&jet.v + &a)) - part.l;
    let dh_dp = &jet.v + &a;
    let (dh_dy, dh_dx) = if spec.is_flat() {
        (
            part.dl_dy.iter().map(|g| -g).collect(),
            part.dl_dx.iter().map(|g| -g).collect(),
        )
    } else {
        let ay = spec.connection_fiber_jacobian(&z.x, &z.y);
        let ax = spec.connection_base_jacobian(&z.x, &z.y);
        (
            ay.iter()
                .zip(&part.dl_dy)
                .map(|(da, g)| z.p.dot(da) - g)
                .collect(),
            ax.iter()
                .zip(&part.dl_dx)
                .map(|(da, g)| z.p.dot(da) - g)
                .collect(),
        )
    };
    Ok(HamiltonianPartials {
        h,
        dh_dx,
        dh_dy,
        dh_dp,
        jet,
    })
}

/// Hessian of `H` with respect to the fiber state `Z = (y, p^0, …, p^n)`.
/// Flat connections only.
pub fn hamiltonian_hessian(l: &LagrangianDensity, z: &PhasePoint) -> Result<DMatrix<f64>> {
    let jet = invert_legendre(l, z, None)?;
    hamiltonian_hessian_at(l, &jet)
}

pub(crate) fn hamiltonian_hessian_at(l: &LagrangianDensity, jet: &JetPoint) -> Result<DMatrix<f64>> {
    let spec = l.spec();
    if !spec.is_flat() {
        return Err(Error::UnsupportedModel(
            "Hamiltonian Hessian requires a flat connection".into(),
        ));
    }
    let part = l.partials_at(jet);
    let n = spec.fiber_dim();
    let d = spec.jet_dim();
    let lu = part.d2l_dvdv.clone().lu();
    let inv = lu
        .try_inverse()
        .ok_or(Error::SingularJacobian("Hamiltonian Hessian"))?;
    let hpy = -(&inv * &part.d2l_dvdy);
    let hyy = -&part.d2l_dydy + part.d2l_dvdy.transpose() * &inv * &part.d2l_dvdy;
    let mut out = DMatrix::zeros(n + d, n + d);
    out.view_mut((0, 0), (n, n)).copy_from(&hyy);
    out.view_mut((n, n), (d, d)).copy_from(&inv);
    out.view_mut((n, 0), (d, n)).copy_from(&hpy);
    out.view_mut((0, n), (n, d)).copy_from(&hpy.transpose());
    Ok(out)
}

/// `∇_Z H` and `∇²_Z H` from a single Legendre inversion. Flat
/// connections only.
pub fn hamiltonian_gradient_hessian(
    l: &LagrangianDensity,
    z: &PhasePoint,
    v_guess: Option<&DMatrix<f64>>,
) -> Result<(DVector<f64>, DMatrix<f64>, JetPoint)> {
    let jet = invert_legendre(l, z, v_guess)?;
    let hess = hamiltonian_hessian_at(l, &jet)?;
    let hp = hamiltonian_partials_at(l, z, jet)?;
    let mut g = hp.dh_dy;
    g.extend_from_slice(hp.dh_dp.as_slice());
    Ok((DVector::from_vec(g), hess, hp.jet))
}

/// Outcome of sampling the conditioning of `∂²L/∂v∂v`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub samples: Vec<JetPoint>,
    /// Condition numbers; `f64::INFINITY` marks a singular Hessian.
    pub condition_numbers: Vec<f64>,
    pub worst: f64,
    pub threshold: f64,
    pub passed: bool,
}

pub const DEFAULT_CONDITION_THRESHOLD: f64 = 1e8;

/// 2-norm condition number of `∂²L/∂v∂v` at each sample.
pub fn regularity_check(l: &LagrangianDensity, samples: &[JetPoint], threshold: f64) -> RegularityReport {
    let condition_numbers: Vec<f64> = samples
        .iter()
        .map(|s| {
            let hess = l.partials_at(s).d2l_dvdv;
            let sv = hess.singular_values();
            let max = sv.max();
            let min = sv.min();
            if min <= f64::EPSILON * max.max(f64::MIN_POSITIVE) || min == 0.0 {
                f64::INFINITY
            } else {
                max / min
            }
        })
        .collect();
    let worst = condition_numbers.iter().copied().fold(0.0, f64::max);
    let passed = !samples.is_empty() && worst.is_finite() && worst <= threshold;
    RegularityReport {
        samples: samples.to_vec(),
        condition_numbers,
        worst,
        threshold,
        passed,
    }
}
