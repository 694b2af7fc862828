//! Symmetry generators, their lifts to the constraint manifold, covariant
//! momentum maps and Hamiltonian Noether currents.
//!
//! Base actions are constant translations `ξ^μ`; fiber actions are
//! arbitrary vector fields `ξ^A(y)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bundle::{jet_of_section, scaled_step, DiffStencil, FieldSpec, SectionPatch, FIRST_DIFF_STEP};
use crate::error::Result;
use crate::lagrangian::{hamiltonian, hamiltonian_partials, legendre, LagrangianDensity, PhasePoint};
use crate::multihamiltonian::assemble_structure_matrices;

type FiberField = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type FiberJacobian = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

#[derive(Clone)]
pub struct SymmetryGenerator {
    label: String,
    xi_base: Vec<f64>,
    xi_fiber: Arc<FiberField>,
    jacobian: Option<Arc<FiberJacobian>>,
    fiber_dim: usize,
}

impl fmt::Debug for SymmetryGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymmetryGenerator")
            .field("label", &self.label)
            .field("xi_base", &self.xi_base)
            .finish()
    }
}

impl SymmetryGenerator {
    /// General generator; the fiber Jacobian is differenced unless given
    /// with [`with_jacobian`](Self::with_jacobian).
    pub fn new<F>(label: impl Into<String>, xi_base: Vec<f64>, fiber_dim: usize, xi_fiber: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            xi_base,
            xi_fiber: Arc::new(xi_fiber),
            jacobian: None,
            fiber_dim,
        }
    }

    pub fn with_jacobian<F>(mut self, jacobian: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn zero(spec: &FieldSpec) -> Self {
        let n = spec.fiber_dim();
        Self::new("zero", vec![0.0; spec.base_dim()], n, move |_| vec![0.0; n])
            .with_jacobian(move |_| DMatrix::zeros(n, n))
    }

    pub fn base_translation(spec: &FieldSpec, xi: Vec<f64>) -> Self {
        assert_eq!(xi.len(), spec.base_dim());
        let n = spec.fiber_dim();
        Self::new(format!("translation{xi:?}"), xi, n, move |_| vec![0.0; n])
            .with_jacobian(move |_| DMatrix::zeros(n, n))
    }

    /// `ξ⁰ = 1`.
    pub fn time_translation(spec: &FieldSpec) -> Self {
        let mut xi = vec![0.0; spec.base_dim()];
        xi[0] = 1.0;
        Self::base_translation(spec, xi).labelled("time_translation")
    }

    /// `ξ^i = 1` for a spatial direction `i ∈ 1..=n`.
    pub fn space_translation(spec: &FieldSpec, i: usize) -> Self {
        assert!(i >= 1 && i <= spec.n_space());
        let mut xi = vec![0.0; spec.base_dim()];
        xi[i] = 1.0;
        Self::base_translation(spec, xi).labelled(format!("space_translation_{i}"))
    }

    /// Constant fiber vector field `ξ^A = c^A`.
    pub fn fiber_shift(spec: &FieldSpec, direction: Vec<f64>) -> Self {
        assert_eq!(direction.len(), spec.fiber_dim());
        let n = spec.fiber_dim();
        Self::new("fiber_shift", vec![0.0; spec.base_dim()], n, move |_| direction.clone())
            .with_jacobian(move |_| DMatrix::zeros(n, n))
    }

    /// Infinitesimal rotation in the `(a, b)` fiber plane:
    /// `ξ^a = −y^b`, `ξ^b = y^a`.
    pub fn fiber_rotation(spec: &FieldSpec, a: usize, b: usize) -> Self {
        let n = spec.fiber_dim();
        assert!(a < n && b < n && a != b);
        Self::new("fiber_rotation", vec![0.0; spec.base_dim()], n, move |y| {
            let mut xi = vec![0.0; n];
            xi[a] = -y[b];
            xi[b] = y[a];
            xi
        })
        .with_jacobian(move |_| {
            let mut j = DMatrix::zeros(n, n);
            j[(a, b)] = -1.0;
            j[(b, a)] = 1.0;
            j
        })
    }

    /// Mechanics generator `(f, ξ)` for `n = 0` with constant `ξ`.
    pub fn mechanics(f: f64, xi: Vec<f64>) -> Self {
        let n = xi.len();
        Self::new("mechanics", vec![f], n, move |_| xi.clone())
            .with_jacobian(move |_| DMatrix::zeros(n, n))
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn xi_base(&self) -> &[f64] {
        &self.xi_base
    }

    /// The time component `f = ξ⁰`.
    pub fn f(&self) -> f64 {
        self.xi_base[0]
    }

    pub fn xi_fiber(&self, y: &[f64]) -> Vec<f64> {
        (self.xi_fiber)(y)
    }

    /// `∂ξ^A/∂y^B` with row `A`, column `B`.
    pub fn fiber_jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        match &self.jacobian {
            Some(j) => j(y),
            None => self.fiber_jacobian_fd(y),
        }
    }

    pub fn fiber_jacobian_fd(&self, y: &[f64]) -> DMatrix<f64> {
        let n = self.fiber_dim;
        let mut out = DMatrix::zeros(n, n);
        let mut yp = y.to_vec();
        for b in 0..n {
            let h = scaled_step(FIRST_DIFF_STEP, y[b]);
            yp[b] = y[b] + h;
            let plus = self.xi_fiber(&yp);
            yp[b] = y[b] - h;
            let minus = self.xi_fiber(&yp);
            yp[b] = y[b];
            for a in 0..n {
                out[(a, b)] = (plus[a] - minus[a]) / (2.0 * h);
            }
        }
        out
    }
}

/// Components of the lifted generator at a phase point.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedGenerator {
    pub base: Vec<f64>,
    pub fiber: Vec<f64>,
    /// `ξ_{p_A^μ}`, `N × (n+1)`.
    pub momenta: DMatrix<f64>,
}

impl LiftedGenerator {
    /// The fiber part `(ξ^A, ξ_{p_A^μ})` laid out on `Z`.
    pub fn state(&self) -> DVector<f64> {
        let mut v = self.fiber.clone();
        v.extend_from_slice(self.momenta.as_slice());
        DVector::from_vec(v)
    }
}

/// `ξ_{p_A^μ} = −p_B^μ ∂ξ^B/∂y^A` (constant base part).
pub fn lift_generator(spec: &FieldSpec, xi: &SymmetryGenerator, z: &PhasePoint) -> LiftedGenerator {
    let jac = xi.fiber_jacobian(&z.y);
    let n = spec.fiber_dim();
    let mut momenta = DMatrix::zeros(n, spec.base_dim());
    for mu in 0..spec.base_dim() {
        for a in 0..n {
            let mut s = 0.0;
            for b in 0..n {
                s += z.p[(b, mu)] * jac[(b, a)];
            }
            momenta[(a, mu)] = -s;
        }
    }
    LiftedGenerator {
        base: xi.xi_base.clone(),
        fiber: xi.xi_fiber(&z.y),
        momenta,
    }
}

fn pairing(p: &DMatrix<f64>, mu: usize, xi: &[f64]) -> f64 {
    p.column(mu).iter().zip(xi).map(|(p, x)| p * x).sum()
}

/// `J^μ = p_A^μ ξ^A + (p_A^ν 𝔄^A_ν − H) ξ^μ`.
pub fn momentum_map(l: &LagrangianDensity, xi: &SymmetryGenerator, z: &PhasePoint) -> Result<Vec<f64>> {
    let h = hamiltonian(l, z)?;
    Ok(momentum_map_with_h(l.spec(), xi, z, h))
}

fn momentum_map_with_h(spec: &FieldSpec, xi: &SymmetryGenerator, z: &PhasePoint, h: f64) -> Vec<f64> {
    let xf = xi.xi_fiber(&z.y);
    let pa = z.p.dot(&spec.connection_coeffs(&z.x, &z.y));
    (0..spec.base_dim())
        .map(|mu| pairing(&z.p, mu, &xf) + (pa - h) * xi.xi_base[mu])
        .collect()
}

/// Pulled-back Hamiltonian Noether current on the conjugate section:
/// `J^μ = p^μξ + (p𝔄 − H)ξ^μ + p^νφ_ν ξ^μ − p^μφ_ν ξ^ν`.
pub fn noether_current(
    l: &LagrangianDensity,
    xi: &SymmetryGenerator,
    patch: &SectionPatch,
    x: &[f64],
) -> Result<Vec<f64>> {
    let spec = l.spec();
    let jet = jet_of_section(spec, patch, x)?;
    let z = legendre(l, &jet)?;
    let h = hamiltonian(l, &z)?;
    Ok(current_with_jet(spec, xi, &z, h, &jet.v))
}

/// Evaluates the current formula at `z` with `H = h` and an explicit jet
/// `v` standing in for `φ^A_{,ν}`.
pub fn current_with_jet(
    spec: &FieldSpec,
    xi: &SymmetryGenerator,
    z: &PhasePoint,
    h: f64,
    v: &DMatrix<f64>,
) -> Vec<f64> {
    let mut j = momentum_map_with_h(spec, xi, z, h);
    // c[μ][ν] = p_A^μ v^A_ν
    let nb = spec.base_dim();
    let c = z.p.transpose() * v;
    let trace_term: f64 = (0..nb).map(|nu| c[(nu, nu)]).sum();
    for (mu, jm) in j.iter_mut().enumerate() {
        let along: f64 = (0..nb).map(|nu| c[(mu, nu)] * xi.xi_base[nu]).sum();
        *jm += trace_term * xi.xi_base[mu] - along;
    }
    j
}

/// The same current at a bare phase point, with the jet taken from the
/// Legendre inverse (`φ_ν = ∂H/∂p^ν − 𝔄_ν`), as on a Hamiltonian section.
pub fn state_current(l: &LagrangianDensity, xi: &SymmetryGenerator, z: &PhasePoint) -> Result<Vec<f64>> {
    let hp = hamiltonian_partials(l, z)?;
    Ok(current_with_jet(l.spec(), xi, z, hp.h, &hp.jet.v))
}

/// Currents and divergences sampled along a patch.
#[derive(Debug, Clone, PartialEq)]
pub struct NoetherCurrentField {
    pub generator: String,
    pub lagrangian: String,
    pub points: Vec<Vec<f64>>,
    pub currents: Vec<Vec<f64>>,
    pub divergences: Vec<f64>,
}

impl NoetherCurrentField {
    pub fn max_abs_divergence(&self) -> f64 {
        self.divergences.iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// `∂_μ J^μ` at each sample (default fourth-order stencil).
pub fn divergence_residual(
    l: &LagrangianDensity,
    xi: &SymmetryGenerator,
    patch: &SectionPatch,
    xs: &[Vec<f64>],
) -> Result<NoetherCurrentField> {
    divergence_residual_with(l, xi, patch, xs, DiffStencil::default())
}

pub fn divergence_residual_with(
    l: &LagrangianDensity,
    xi: &SymmetryGenerator,
    patch: &SectionPatch,
    xs: &[Vec<f64>],
    stencil: DiffStencil,
) -> Result<NoetherCurrentField> {
    let mut currents = Vec::with_capacity(xs.len());
    let mut divergences = Vec::with_capacity(xs.len());
    for x in xs {
        currents.push(noether_current(l, xi, patch, x)?);
        let mut div = 0.0;
        for mu in 0..l.spec().base_dim() {
            let d = stencil.derivative(|xs| Ok(vec![noether_current(l, xi, patch, xs)?[mu]]), x, mu)?;
            div += d[0];
        }
        divergences.push(div);
    }
    Ok(NoetherCurrentField {
        generator: xi.label().to_string(),
        lagrangian: l.name(),
        points: xs.to_vec(),
        currents,
        divergences,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivarianceReport {
    pub max_abs: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn default_equivariance_tolerance(l: &LagrangianDensity) -> f64 {
    if l.exact_partials() {
        1e-8
    } else {
        1e-5
    }
}

/// `max |dH · ξ_P|` over the samples.
pub fn equivariance_check(
    l: &LagrangianDensity,
    xi: &SymmetryGenerator,
    samples: &[PhasePoint],
    tolerance: f64,
) -> Result<EquivarianceReport> {
    let mut worst = 0.0f64;
    for z in samples {
        let hp = hamiltonian_partials(l, z)?;
        let lift = lift_generator(l.spec(), xi, z);
        let mut s: f64 = hp.dh_dx.iter().zip(&lift.base).map(|(a, b)| a * b).sum();
        s += hp.dh_dy.iter().zip(&lift.fiber).map(|(a, b)| a * b).sum::<f64>();
        s += hp.dh_dp.dot(&lift.momenta);
        worst = worst.max(s.abs());
    }
    Ok(EquivarianceReport {
        max_abs: worst,
        tolerance,
        passed: worst <= tolerance,
    })
}

/// Largest mismatch between `ξ_P ⌟ ω^{(μ)}` and `dN^μ` on the fiber
/// state, with `N^μ = p_A^μ ξ^A(y)`. Fiber-only generators.
pub fn contraction_identity(spec: &FieldSpec, xi: &SymmetryGenerator, z: &PhasePoint) -> f64 {
    let sm = assemble_structure_matrices(spec);
    let u = lift_generator(spec, xi, z).state();
    let state = z.state();
    let n = spec.fiber_dim();
    let mut worst = 0.0f64;
    for mu in 0..spec.base_dim() {
        let contracted = sm.omega_f64(mu) * &u;
        let charge = |s: &DVector<f64>| {
            let zz = PhasePoint::from_state(z.x.clone(), s.as_slice(), n);
            pairing(&zz.p, mu, &xi.xi_fiber(&zz.y))
        };
        for k in 0..state.len() {
            let h = scaled_step(FIRST_DIFF_STEP, state[k]);
            let mut sp = state.clone();
            let mut sm_ = state.clone();
            sp[k] += h;
            sm_[k] -= h;
            let grad = (charge(&sp) - charge(&sm_)) / (2.0 * h);
            worst = worst.max((contracted[k] - grad).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleNoetherReport {
    pub t: Vec<f64>,
    pub j: Vec<f64>,
    pub max_drift: f64,
}

/// `J(t) = p_A ξ^A − H f` along mechanics samples `(t, q, p)`.
pub fn particle_noether(
    l: &LagrangianDensity,
    xi: &SymmetryGenerator,
    trajectory: &[PhasePoint],
) -> Result<ParticleNoetherReport> {
    if l.spec().n_space() != 0 {
        return Err(crate::Error::UnsupportedDimension(
            "particle Noether charges need n = 0".into(),
        ));
    }
    let mut t = Vec::with_capacity(trajectory.len());
    let mut j = Vec::with_capacity(trajectory.len());
    for z in trajectory {
        let h = hamiltonian(l, z)?;
        let xf = xi.xi_fiber(&z.y);
        let p_xi: f64 = z.p.column(0).iter().zip(&xf).map(|(p, x)| p * x).sum();
        t.push(z.x[0]);
        j.push(p_xi - h * xi.f());
    }
    let j0 = j.first().copied().unwrap_or(0.0);
    let max_drift = j.iter().fold(0.0f64, |m, v| m.max((v - j0).abs()));
    Ok(ParticleNoetherReport { t, j, max_drift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{FnSection, JetPoint, TrigSeriesSection};
    use crate::lagrangian::Potential;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn phase(x: &[f64], y: &[f64], p: &[f64]) -> PhasePoint {
        PhasePoint::new(x.to_vec(), y.to_vec(), DMatrix::from_row_slice(y.len(), p.len() / y.len(), p))
    }

    fn plane_wave(a: f64, k: f64, m: f64) -> SectionPatch {
        let w = (k * k + m * m).sqrt();
        SectionPatch::new(
            FnSection::new(2, 1, move |x| vec![a * (k * x[1] - w * x[0]).cos()])
                .with_gradient(move |x| {
                    let s = a * (k * x[1] - w * x[0]).sin();
                    DMatrix::from_row_slice(1, 2, &[w * s, -k * s])
                }),
        )
    }

    #[test]
    fn lift_examples() {
        let spec = FieldSpec::new(1, 2);
        let z = phase(&[0.0, 0.0], &[0.5, -0.2], &[1.0, 2.0, 3.0, 4.0]);
        let shift = lift_generator(&spec, &SymmetryGenerator::fiber_shift(&spec, vec![1.0, 1.0]), &z);
        assert_eq!(shift.fiber, vec![1.0, 1.0]);
        assert!(shift.momenta.iter().all(|&v| v == 0.0));
        assert_eq!(shift.base, vec![0.0, 0.0]);

        let rot = lift_generator(&spec, &SymmetryGenerator::fiber_rotation(&spec, 0, 1), &z);
        assert_eq!(rot.fiber, vec![0.2, 0.5]);
        // rows: p_1, p_2; columns μ
        for mu in 0..2 {
            assert_eq!(rot.momenta[(0, mu)], -z.p[(1, mu)]);
            assert_eq!(rot.momenta[(1, mu)], z.p[(0, mu)]);
        }

        let t = lift_generator(&spec, &SymmetryGenerator::time_translation(&spec), &z);
        assert_eq!(t.base, vec![1.0, 0.0]);
        assert!(t.fiber.iter().chain(t.momenta.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn momentum_map_examples() {
        let l = LagrangianDensity::nonlinear_wave(1, 1, Potential::Zero);
        let spec = l.spec().clone();
        let z = phase(&[0.0, 0.0], &[0.3], &[1.5, -0.7]);
        let j = momentum_map(&l, &SymmetryGenerator::fiber_shift(&spec, vec![1.0]), &z).unwrap();
        assert_eq!(j, vec![1.5, -0.7]);
        let j = momentum_map(&l, &SymmetryGenerator::zero(&spec), &z).unwrap();
        assert_eq!(j, vec![0.0, 0.0]);
        let osc = LagrangianDensity::harmonic_oscillator();
        let zq = phase(&[0.0], &[1.0], &[2.0]);
        let j = momentum_map(&osc, &SymmetryGenerator::mechanics(1.0, vec![0.0]), &zq).unwrap();
        assert_eq!(j, vec![-2.5]);
    }

    #[test]
    fn time_translation_current_is_energy() {
        let pot = Potential::SineGordon;
        let l = LagrangianDensity::nonlinear_wave(1, 1, pot.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trig = TrigSeriesSection::random(2, 1, 2, 0.8, &mut rng);
        let patch = SectionPatch::new(trig);
        let x = [0.3, -0.4];
        let jet = jet_of_section(l.spec(), &patch, &x).unwrap();
        let (v0, v1) = (jet.v[(0, 0)], jet.v[(0, 1)]);
        let j = noether_current(&l, &SymmetryGenerator::time_translation(l.spec()), &patch, &x).unwrap();
        let energy = 0.5 * v0 * v0 + 0.5 * v1 * v1 - pot.value(&jet.y);
        assert!((j[0] + energy).abs() < 1e-14);
        assert!((j[1] - v0 * v1).abs() < 1e-14);
    }

    #[test]
    fn fiber_shift_current_is_momentum_and_zero_is_zero() {
        let l = LagrangianDensity::nonlinear_wave(1, 1, Potential::Zero);
        let patch = plane_wave(1.0, 1.0, 0.0);
        let x = [0.2, 0.9];
        let jet = jet_of_section(l.spec(), &patch, &x).unwrap();
        let z = legendre(&l, &jet).unwrap();
        let j = noether_current(&l, &SymmetryGenerator::fiber_shift(l.spec(), vec![1.0]), &patch, &x).unwrap();
        assert_eq!(j, vec![z.p[(0, 0)], z.p[(0, 1)]]);
        let j0 = noether_current(&l, &SymmetryGenerator::zero(l.spec()), &patch, &x).unwrap();
        assert_eq!(j0, vec![0.0, 0.0]);
    }

    #[test]
    fn plane_wave_currents_are_conserved() {
        let kg = LagrangianDensity::nonlinear_wave(1, 1, Potential::KleinGordon { mass: 1.0 });
        let patch = plane_wave(1.0, 1.0, 1.0);
        let xs = vec![vec![0.0, 0.0], vec![0.7, -1.3], vec![2.0, 3.0]];
        for xi in [
            SymmetryGenerator::time_translation(kg.spec()),
            SymmetryGenerator::space_translation(kg.spec(), 1),
        ] {
            let f = divergence_residual(&kg, &xi, &patch, &xs).unwrap();
            assert!(f.max_abs_divergence() <= 1e-8, "{} {}", xi.label(), f.max_abs_divergence());
        }
        let free = LagrangianDensity::nonlinear_wave(1, 1, Potential::Zero);
        let shift = SymmetryGenerator::fiber_shift(free.spec(), vec![1.0]);
        let f = divergence_residual(&free, &shift, &plane_wave(1.0, 1.0, 0.0), &xs).unwrap();
        assert!(f.max_abs_divergence() <= 1e-8);
        // negative control
        let f = divergence_residual(&kg, &SymmetryGenerator::fiber_shift(kg.spec(), vec![1.0]), &patch, &xs).unwrap();
        assert!(f.max_abs_divergence() >= 1e-2);
    }

    #[test]
    fn equivariance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let free = LagrangianDensity::nonlinear_wave(1, 1, Potential::Zero);
        let samples: Vec<_> = (0..20)
            .map(|_| legendre(&free, &JetPoint::random(free.spec(), 2.0, &mut rng)).unwrap())
            .collect();
        let shift = SymmetryGenerator::fiber_shift(free.spec(), vec![1.0]);
        let r = equivariance_check(&free, &shift, &samples, 1e-8).unwrap();
        assert_eq!(r.max_abs, 0.0);
        let kg = LagrangianDensity::nonlinear_wave(1, 1, Potential::KleinGordon { mass: 1.0 });
        let r = equivariance_check(&kg, &shift, &samples, 1e-8).unwrap();
        assert!(!r.passed);
        let duff = LagrangianDensity::nonlinear_wave(1, 2, Potential::Duffing { lambda: -1.0, gamma: 0.4 });
        let samples: Vec<_> = (0..20)
            .map(|_| legendre(&duff, &JetPoint::random(duff.spec(), 2.0, &mut rng)).unwrap())
            .collect();
        let rot = SymmetryGenerator::fiber_rotation(duff.spec(), 0, 1);
        assert!(equivariance_check(&duff, &rot, &samples, 1e-10).unwrap().passed);
    }

    #[test]
    fn contraction_matches_charge_gradient() {
        let spec = FieldSpec::new(2, 2);
        let z = phase(&[0.0; 3], &[0.4, -1.1], &[0.3, 0.1, -0.2, 0.5, 0.9, -0.6]);
        let shift = SymmetryGenerator::fiber_shift(&spec, vec![1.0, -2.0]);
        assert!(contraction_identity(&spec, &shift, &z) < 1e-9);
        let rot = SymmetryGenerator::fiber_rotation(&spec, 0, 1);
        assert!(contraction_identity(&spec, &rot, &z) < 1e-9);
    }

    #[test]
    fn numeric_jacobian_matches_declared() {
        let spec = FieldSpec::new(0, 2);
        let rot = SymmetryGenerator::fiber_rotation(&spec, 0, 1);
        let y = [0.3, 0.8];
        assert!((rot.fiber_jacobian(&y) - rot.fiber_jacobian_fd(&y)).amax() < 1e-6);
    }

    #[test]
    fn oscillator_exact_flow_energy() {
        let osc = LagrangianDensity::harmonic_oscillator();
        // (q, p) = (1, 2) at t = 0
        let traj: Vec<_> = (0..100)
            .map(|i| {
                let t = 0.1 * i as f64;
                let q = t.cos() + 2.0 * t.sin();
                let p = -t.sin() + 2.0 * t.cos();
                phase(&[t], &[q], &[p])
            })
            .collect();
        let r = particle_noether(&osc, &SymmetryGenerator::mechanics(1.0, vec![0.0]), &traj).unwrap();
        assert_eq!(r.j[0], -2.5);
        assert!(r.max_drift <= 1e-10);
        let free = LagrangianDensity::nonlinear_wave(0, 1, Potential::Zero);
        let traj: Vec<_> = (0..10).map(|i| phase(&[i as f64], &[0.5 * i as f64], &[0.5])).collect();
        let r = particle_noether(&free, &SymmetryGenerator::mechanics(0.0, vec![1.0]), &traj).unwrap();
        assert!(r.j.iter().all(|&j| j == 0.5));
    }

    #[test]
    fn general_current_reduces_to_mechanics_bitwise() {
        let osc = LagrangianDensity::nonlinear_wave(0, 2, Potential::Duffing { lambda: -1.0, gamma: 0.3 });
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let patch = SectionPatch::new(TrigSeriesSection::random(1, 2, 3, 1.0, &mut rng));
        let xi = SymmetryGenerator::mechanics(0.7, vec![1.0, -0.5]);
        for t in [0.0, 0.4, 1.3] {
            let j = noether_current(&osc, &xi, &patch, &[t]).unwrap();
            let z = legendre(&osc, &jet_of_section(osc.spec(), &patch, &[t]).unwrap()).unwrap();
            let r = particle_noether(&osc, &xi, &[z]).unwrap();
            assert_eq!(j[0].to_bits(), r.j[0].to_bits());
        }
    }
}
