//! Diagonal periodic patterns `φ = f(χ)`, `χ = k_μ x^μ`, for scalar fields.
//!
//! Substituting the ansatz into the field equations of a density with
//! constant `L_vv` and no `v`–`y` coupling gives the reduced equation
//! `s f″ = L_y(f)` with `s = kᵀ L_vv k`. Orbits are closed after `2π` by
//! shooting from a turning point and solving for one free wavenumber;
//! the remaining wavenumbers and the amplitude parametrize the family.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bundle::{Section, SectionPatch};
use crate::error::{Error, Result};
use crate::lagrangian::{flatten, LagrangianDensity};

/// RK4 steps per period.
pub const ORBIT_STEPS: usize = 4096;
/// Required closure `|α(2π) − α(0)|` of a solved orbit.
pub const CLOSURE_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 50;

/// The reduced ODE of a scalar density along a wavevector.
#[derive(Debug, Clone)]
pub struct PhaseReduction {
    lagrangian: LagrangianDensity,
    k: Vec<f64>,
    metric: DMatrix<f64>,
}

/// Reduces `l` along `k`. Needs `N = 1`, no explicit `x` dependence, a flat
/// connection and a kinetic term quadratic in `v` with constant
/// coefficients.
pub fn reduce_diagonal(l: &LagrangianDensity, k: &[f64]) -> Result<PhaseReduction> {
    let spec = l.spec();
    if spec.fiber_dim() != 1 {
        return Err(Error::UnsupportedModel(format!(
            "{}: patterns need a scalar field, got N = {}",
            l.name(),
            spec.fiber_dim()
        )));
    }
    let nb = spec.base_dim();
    if k.len() != nb {
        return Err(Error::ShapeMismatch {
            context: "wavevector",
            expected: nb,
            actual: k.len(),
        });
    }
    if l.depends_on_x() || !spec.is_flat() {
        return Err(Error::UnsupportedModel(format!(
            "{}: explicit x dependence or a connection",
            l.name()
        )));
    }
    let x0 = vec![0.0; nb];
    let zero = DMatrix::zeros(1, nb);
    let base = l.partials(&x0, &[0.0], &zero);
    let metric = base.d2l_dvdv.clone();
    let probes = [(0.7, 0.3), (-1.3, -0.8), (2.1, 1.7)];
    for (y, scale) in probes {
        let v = DMatrix::from_fn(1, nb, |_, mu| scale * (mu as f64 + 1.0));
        let p = l.partials(&x0, &[y], &v);
        let drift = (&p.d2l_dvdv - &metric).amax();
        let coupling = p.d2l_dvdy.amax();
        let linear = (&p.dl_dv - DMatrix::from_column_slice(1, nb, (&metric * flatten(&v)).as_slice())).amax();
        if drift > 1e-9 || coupling > 1e-9 || linear > 1e-9 * (1.0 + v.amax()) {
            return Err(Error::UnsupportedModel(format!(
                "{}: kinetic term is not a constant quadratic form",
                l.name()
            )));
        }
    }
    Ok(PhaseReduction {
        lagrangian: l.clone(),
        k: k.to_vec(),
        metric,
    })
}

impl PhaseReduction {
    pub fn lagrangian(&self) -> &LagrangianDensity {
        &self.lagrangian
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn with_k(&self, k: &[f64]) -> Self {
        assert_eq!(k.len(), self.k.len());
        Self {
            k: k.to_vec(),
            ..self.clone()
        }
    }

    /// `s = kᵀ L_vv k`.
    pub fn coefficient(&self) -> f64 {
        let k = DVector::from_column_slice(&self.k);
        k.dot(&(&self.metric * &k))
    }

    /// `w = L_vv k`, so that `p^μ = w_μ f′` on the ansatz.
    pub fn momentum_weights(&self) -> Vec<f64> {
        (&self.metric * DVector::from_column_slice(&self.k)).as_slice().to_vec()
    }

    fn origin(&self) -> Vec<f64> {
        vec![0.0; self.k.len()]
    }

    /// `L_y(f)`.
    pub fn force(&self, f: f64) -> f64 {
        let zero = DMatrix::zeros(1, self.k.len());
        self.lagrangian.partials(&self.origin(), &[f], &zero).dl_dy[0]
    }

    pub fn force_derivative(&self, f: f64) -> f64 {
        let zero = DMatrix::zeros(1, self.k.len());
        self.lagrangian.partials(&self.origin(), &[f], &zero).d2l_dydy[(0, 0)]
    }

    /// `L_y(f) − s f″`; agrees with the full Euler–Lagrange residual of
    /// the reconstructed section.
    pub fn reduced_residual(&self, f: f64, d2f: f64) -> f64 {
        self.force(f) - self.coefficient() * d2f
    }

    /// Nearest zero of `L_y` from `f = 0`.
    pub fn equilibrium(&self) -> Result<f64> {
        let mut f = 0.0;
        for it in 0..NEWTON_MAX_ITER {
            let g = self.force(f);
            if g.abs() <= 1e-14 {
                return Ok(f);
            }
            let dg = self.force_derivative(f);
            if dg == 0.0 {
                return Err(Error::NoConvergence {
                    what: "pattern equilibrium",
                    iterations: it,
                    residual: g.abs(),
                });
            }
            f -= g / dg;
        }
        Err(Error::NoConvergence {
            what: "pattern equilibrium",
            iterations: NEWTON_MAX_ITER,
            residual: self.force(f).abs(),
        })
    }
}

/// RK4 on `f′ = u`, `u′ = c·L_y(f)` with `c = 1/s`.
fn rk4_step(red: &PhaseReduction, c: f64, state: [f64; 2], h: f64) -> [f64; 2] {
    let rhs = |s: [f64; 2]| [s[1], c * red.force(s[0])];
    let k1 = rhs(state);
    let k2 = rhs([state[0] + 0.5 * h * k1[0], state[1] + 0.5 * h * k1[1]]);
    let k3 = rhs([state[0] + 0.5 * h * k2[0], state[1] + 0.5 * h * k2[1]]);
    let k4 = rhs([state[0] + h * k3[0], state[1] + h * k3[1]]);
    [
        state[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        state[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn shoot(red: &PhaseReduction, c: f64, start: [f64; 2], steps: usize) -> [f64; 2] {
    let h = 2.0 * PI / ORBIT_STEPS as f64;
    (0..steps).fold(start, |s, _| rk4_step(red, c, s, h))
}

/// A closed orbit sampled at `χ_i = 2πi/M`, `i < M`.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    reduction: PhaseReduction,
    pub amplitude: f64,
    pub equilibrium: f64,
    pub chi: Vec<f64>,
    pub f: Vec<f64>,
    pub df: Vec<f64>,
    /// `max |α(2π) − α(0)|` over `(f, f′)`.
    pub closure: f64,
}

impl PeriodicOrbit {
    /// Reduction at the solved wavevector.
    pub fn reduction(&self) -> &PhaseReduction {
        &self.reduction
    }

    pub fn k(&self) -> &[f64] {
        self.reduction.k()
    }

    fn c(&self) -> f64 {
        1.0 / self.reduction.coefficient()
    }

    /// `(f, f′, f″)` at any `χ`.
    pub fn eval(&self, chi: f64) -> [f64; 3] {
        let m = self.chi.len();
        let h = 2.0 * PI / m as f64;
        let t = chi.rem_euclid(2.0 * PI);
        let i = ((t / h).round() as usize) % m;
        let mut delta = t - i as f64 * h;
        if delta > PI {
            delta -= 2.0 * PI;
        }
        let c = self.c();
        let [f, u] = rk4_step(&self.reduction, c, [self.f[i], self.df[i]], delta);
        [f, u, c * self.reduction.force(f)]
    }

    /// The section `φ(x) = f(k·x)` with closed-form derivatives.
    pub fn section(&self) -> SectionPatch {
        SectionPatch::from_arc(Arc::new(OrbitSection(self.clone())))
    }

    fn phase(&self, x: &[f64]) -> f64 {
        self.k().iter().zip(x).map(|(k, x)| k * x).sum()
    }
}

struct OrbitSection(PeriodicOrbit);

impl Section for OrbitSection {
    fn base_dim(&self) -> usize {
        self.0.k().len()
    }

    fn fiber_dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> Vec<f64> {
        vec![self.0.eval(self.0.phase(x))[0]]
    }

    fn gradient(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let [_, u, _] = self.0.eval(self.0.phase(x));
        let k = self.0.k();
        Some(DMatrix::from_fn(1, k.len(), |_, mu| u * k[mu]))
    }

    fn hessians(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        let [_, _, a] = self.0.eval(self.0.phase(x));
        let k = self.0.k();
        Some(vec![DMatrix::from_fn(k.len(), k.len(), |m, n| a * k[m] * k[n])])
    }
}

/// Newton on `c = 1/s` for `f′(π) = 0` starting from `(f* + A, 0)`.
fn solve_coefficient(red: &PhaseReduction, start: [f64; 2], c0: f64) -> Result<f64> {
    let half = ORBIT_STEPS / 2;
    let tol = 1e-14 * (start[0].abs() + 1.0);
    let mut c = c0;
    let mut r = shoot(red, c, start, half)[1];
    for _ in 0..NEWTON_MAX_ITER {
        if r.abs() <= tol {
            return Ok(c);
        }
        let h = 1e-6 * c.abs();
        let dr = (shoot(red, c + h, start, half)[1] - shoot(red, c - h, start, half)[1]) / (2.0 * h);
        if dr == 0.0 || !dr.is_finite() {
            break;
        }
        let mut step = r / dr;
        // keep the sign of s
        while (c - step) * c <= 0.0 {
            step *= 0.5;
        }
        let c_new = c - step;
        let r_new = shoot(red, c_new, start, half)[1];
        if (c_new - c).abs() <= 1e-15 * c.abs() {
            return Ok(c_new);
        }
        c = c_new;
        r = r_new;
    }
    if r.abs() <= 1e3 * tol {
        return Ok(c);
    }
    Err(Error::NoConvergence {
        what: "orbit shooting",
        iterations: NEWTON_MAX_ITER,
        residual: r.abs(),
    })
}

/// Solves `kᵀGk = s` for `k_j`, taking the root nearest the current value.
fn solve_free_component(red: &PhaseReduction, free: usize, s: f64) -> Result<Vec<f64>> {
    let k = red.k();
    let g = &red.metric;
    let gjj = g[(free, free)];
    let mut b = 0.0;
    let mut r = 0.0;
    for m in 0..k.len() {
        if m == free {
            continue;
        }
        b += g[(free, m)] * k[m];
        for n in 0..k.len() {
            if n != free {
                r += k[m] * g[(m, n)] * k[n];
            }
        }
    }
    let mut out = k.to_vec();
    let fail = |reason: &str| Error::ContinuationFailure {
        parameter: k.to_vec(),
        reason: reason.to_string(),
    };
    if gjj == 0.0 {
        if b == 0.0 {
            return Err(fail("free wavenumber does not enter the reduced equation"));
        }
        out[free] = (s - r) / (2.0 * b);
        return Ok(out);
    }
    let disc = b * b - gjj * (r - s);
    if disc < 0.0 {
        return Err(fail("no real wavenumber closes the orbit"));
    }
    let roots = [(-b + disc.sqrt()) / gjj, (-b - disc.sqrt()) / gjj];
    out[free] = if (roots[0] - k[free]).abs() <= (roots[1] - k[free]).abs() {
        roots[0]
    } else {
        roots[1]
    };
    Ok(out)
}

/// Orbit of amplitude `A` about the equilibrium, closed after `2π` by
/// adjusting `k[free]`; the other components of `red.k()` are kept and
/// `red.k()[free]` picks the branch.
pub fn find_periodic_orbit(red: &PhaseReduction, amplitude: f64, free: usize) -> Result<PeriodicOrbit> {
    if free >= red.k().len() {
        return Err(Error::InvalidParameter(format!("free index {free} out of range")));
    }
    if !amplitude.is_finite() || amplitude < 0.0 {
        return Err(Error::InvalidParameter(format!("amplitude {amplitude}")));
    }
    let fstar = red.equilibrium()?;
    let s_guess = red.coefficient();
    let stiffness = red.force_derivative(fstar);
    // linear frequency is 1 when s = −L_yy(f*)
    if stiffness == 0.0 || s_guess == 0.0 || stiffness * s_guess > 0.0 {
        return Err(Error::HyperbolicEquilibrium { equilibrium: fstar });
    }
    let mut c = -1.0 / stiffness;
    let mut solved = None;
    for substeps in [1usize, 8, 64] {
        let mut ok = true;
        let mut cc = c;
        for m in 1..=substeps {
            let a = amplitude * m as f64 / substeps as f64;
            match solve_coefficient(red, [fstar + a, 0.0], cc) {
                Ok(v) => cc = v,
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            solved = Some(cc);
            break;
        }
    }
    c = solved.ok_or(Error::NoConvergence {
        what: "orbit shooting",
        iterations: NEWTON_MAX_ITER,
        residual: f64::NAN,
    })?;
    let k = solve_free_component(red, free, 1.0 / c)?;
    let reduction = red.with_k(&k);
    let c = 1.0 / reduction.coefficient();
    let h = 2.0 * PI / ORBIT_STEPS as f64;
    let mut state = [fstar + amplitude, 0.0];
    let (mut chi, mut f, mut df) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..ORBIT_STEPS {
        chi.push(i as f64 * h);
        f.push(state[0]);
        df.push(state[1]);
        state = rk4_step(&reduction, c, state, h);
    }
    let closure = (state[0] - f[0]).abs().max((state[1] - df[0]).abs());
    if closure > CLOSURE_TOL {
        return Err(Error::NoConvergence {
            what: "orbit closure",
            iterations: NEWTON_MAX_ITER,
            residual: closure,
        });
    }
    Ok(PeriodicOrbit {
        reduction,
        amplitude,
        equilibrium: fstar,
        chi,
        f,
        df,
        closure,
    })
}

/// Primitive `κ^{(μ)}` of the structure form used in `I_μ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Primitive {
    /// `p^μ dφ`
    #[default]
    MomentumDphi,
    /// `−φ dp^μ`
    PhiDmomentum,
    /// `½(p^μ dφ − φ dp^μ)`
    Symmetric,
}

impl std::str::FromStr for Primitive {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p_dphi" => Ok(Self::MomentumDphi),
            "phi_dp" => Ok(Self::PhiDmomentum),
            "symmetric" => Ok(Self::Symmetric),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

/// `I_μ = ∫ α̇ ⌟ κ^{(μ)} dχ` by the periodic trapezoid rule.
pub fn constraint_levels(orbit: &PeriodicOrbit, primitive: Primitive) -> Vec<f64> {
    let red = orbit.reduction();
    let c = orbit.c();
    let h = 2.0 * PI / orbit.chi.len() as f64;
    let p_dphi: f64 = orbit.df.iter().map(|u| u * u).sum::<f64>() * h;
    let phi_dp: f64 = -orbit.f.iter().map(|f| f * c * red.force(*f)).sum::<f64>() * h;
    let q = match primitive {
        Primitive::MomentumDphi => p_dphi,
        Primitive::PhiDmomentum => phi_dp,
        Primitive::Symmetric => 0.5 * (p_dphi + phi_dp),
    };
    red.momentum_weights().into_iter().map(|w| w * q).collect()
}

#[derive(Debug, Clone, Default)]
pub struct IndexOptions {
    /// Wavenumber solved for when closing orbits.
    pub free: usize,
    /// Central-difference steps for `(A, k_μ for μ ≠ free)`; empty means
    /// `1e-3·max(|q|, 1e-2)`.
    pub deltas: Vec<f64>,
    pub primitive: Primitive,
}

#[derive(Debug, Clone)]
pub struct PatternReport {
    pub k: Vec<f64>,
    pub amplitude: f64,
    pub orbit: PeriodicOrbit,
    pub levels: Vec<f64>,
    /// Symmetrized `∂k_μ/∂I_ν`.
    pub hessian: DMatrix<f64>,
    /// `max|H − Hᵀ| / max|H|` before symmetrizing.
    pub asymmetry: f64,
    pub determinant: f64,
    pub index: usize,
    pub degenerate: bool,
}

fn family_point(red: &PhaseReduction, free: usize, q: &[f64], primitive: Primitive) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut k = red.k().to_vec();
    let mut it = q[1..].iter();
    for (mu, km) in k.iter_mut().enumerate() {
        if mu != free {
            *km = *it.next().expect("parameter length");
        }
    }
    let orbit = find_periodic_orbit(&red.with_k(&k), q[0], free).map_err(|e| Error::ContinuationFailure {
        parameter: q.to_vec(),
        reason: e.to_string(),
    })?;
    Ok((orbit.k().to_vec(), constraint_levels(&orbit, primitive)))
}

/// Continues the orbit family through `(A, k_center)` and returns
/// `∂k/∂I`, its determinant and the number of negative eigenvalues.
pub fn hessian_index(
    l: &LagrangianDensity,
    k_center: &[f64],
    amplitude: f64,
    options: &IndexOptions,
) -> Result<PatternReport> {
    let red = reduce_diagonal(l, k_center)?;
    let free = options.free;
    let orbit = find_periodic_orbit(&red, amplitude, free)?;
    let levels = constraint_levels(&orbit, options.primitive);
    let k = orbit.k().to_vec();
    let dim = k.len();
    let mut q = vec![amplitude];
    q.extend(k.iter().enumerate().filter(|(m, _)| *m != free).map(|(_, v)| *v));
    let deltas: Vec<f64> = if options.deltas.is_empty() {
        q.iter().map(|v| 1e-3 * v.abs().max(1e-2)).collect()
    } else if options.deltas.len() == dim {
        options.deltas.clone()
    } else {
        return Err(Error::ShapeMismatch {
            context: "continuation steps",
            expected: dim,
            actual: options.deltas.len(),
        });
    };
    let red = orbit.reduction().clone();
    let stencil: Vec<Vec<f64>> = (0..dim)
        .flat_map(|i| {
            [1.0, -1.0].map(|sgn| {
                let mut p = q.clone();
                p[i] += sgn * deltas[i];
                p
            })
        })
        .collect();
    let results: Vec<Result<(Vec<f64>, Vec<f64>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = stencil
            .iter()
            .map(|p| {
                let red = &red;
                scope.spawn(move || family_point(red, free, p, options.primitive))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("continuation thread")).collect()
    });
    let mut dk = DMatrix::zeros(dim, dim);
    let mut di = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let (kp, ip) = results[2 * i].as_ref().map_err(clone_error)?;
        let (km, im) = results[2 * i + 1].as_ref().map_err(clone_error)?;
        for m in 0..dim {
            dk[(m, i)] = (kp[m] - km[m]) / (2.0 * deltas[i]);
            di[(m, i)] = (ip[m] - im[m]) / (2.0 * deltas[i]);
        }
    }
    let lu = di.clone().lu();
    let inv = lu.try_inverse().ok_or(Error::SingularJacobian("constraint levels"))?;
    if !inv.iter().all(|v| v.is_finite()) || di.amax() * inv.amax() > 1e14 {
        return Err(Error::SingularJacobian("constraint levels"));
    }
    let raw = &dk * inv;
    let hmax = raw.amax();
    let asymmetry = if hmax > 0.0 { (&raw - raw.transpose()).amax() / hmax } else { 0.0 };
    let hessian = (&raw + raw.transpose()) * 0.5;
    let determinant = hessian.determinant();
    let k_scale = k.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let i_scale = levels.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let scale = (k_scale / i_scale).powi(dim as i32);
    let degenerate = !(determinant.abs() >= 1e-8 * scale);
    let index = hessian.symmetric_eigenvalues().iter().filter(|e| **e < 0.0).count();
    Ok(PatternReport {
        k,
        amplitude,
        orbit,
        levels,
        hessian,
        asymmetry,
        determinant,
        index,
        degenerate,
    })
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::ContinuationFailure { parameter, reason } => Error::ContinuationFailure {
            parameter: parameter.clone(),
            reason: reason.clone(),
        },
        other => Error::ContinuationFailure {
            parameter: Vec::new(),
            reason: other.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::Potential;

    fn harmonic() -> LagrangianDensity {
        LagrangianDensity::harmonic_oscillator()
    }

    #[test]
    fn mechanics_reduction_is_identity() {
        let red = reduce_diagonal(&harmonic(), &[1.0]).unwrap();
        assert_eq!(red.coefficient(), 1.0);
        for f in [-0.3, 0.0, 1.2] {
            assert_eq!(red.force(f), -f);
        }
    }

    #[test]
    fn harmonic_orbit_closes_for_any_amplitude() {
        let red = reduce_diagonal(&harmonic(), &[1.0]).unwrap();
        for a in [0.1, 1.0, 3.0] {
            let orbit = find_periodic_orbit(&red, a, 0).unwrap();
            assert!((orbit.k()[0] - 1.0).abs() < 1e-12);
            assert!(orbit.closure <= CLOSURE_TOL);
            assert!(orbit.chi.len() >= 256);
            for (chi, f) in orbit.chi.iter().zip(&orbit.f).step_by(97) {
                assert!((f - a * chi.cos()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn harmonic_levels() {
        let red = reduce_diagonal(&harmonic(), &[1.0]).unwrap();
        let a = 1.7;
        let orbit = find_periodic_orbit(&red, a, 0).unwrap();
        for kappa in [Primitive::MomentumDphi, Primitive::PhiDmomentum, Primitive::Symmetric] {
            let i = constraint_levels(&orbit, kappa);
            assert!((i[0] - PI * a * a).abs() < 1e-10, "{kappa:?} {}", i[0] - PI * a * a);
        }
        let zero = find_periodic_orbit(&red, 0.0, 0).unwrap();
        assert_eq!(constraint_levels(&zero, Primitive::default()), vec![0.0]);
    }

    #[test]
    fn rejects_vector_fields_and_saddles() {
        let l = LagrangianDensity::nonlinear_wave(1, 2, Potential::SineGordon);
        assert!(matches!(reduce_diagonal(&l, &[1.0, 0.0]), Err(Error::UnsupportedModel(_))));
        let l = LagrangianDensity::elliptic_pattern(1, 1, Potential::SineGordon);
        let red = reduce_diagonal(&l, &[1.0, 0.5]).unwrap();
        assert!(matches!(
            find_periodic_orbit(&red, 0.5, 0),
            Err(Error::HyperbolicEquilibrium { .. })
        ));
    }

    #[test]
    fn linear_model_is_degenerate() {
        let r = hessian_index(&harmonic(), &[1.0], 1.0, &IndexOptions::default()).unwrap();
        assert!(r.degenerate, "det {}", r.determinant);
    }
}
