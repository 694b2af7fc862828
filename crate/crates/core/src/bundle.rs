//! Trivial-bundle geometry `ℝ^{n+1} × ℝ^N`: field specifications, jet
//! points, sections with derivative contracts, and connection coefficients.
//!
//! Base coordinates are stored time first: index 0 is `x⁰`, indices
//! `1..=n` are the spatial coordinates `x¹ … xⁿ`. Jet matrices `v^A_μ`
//! have one row per fiber component and one column per base direction,
//! in the same order.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};

/// Default relative step for first-derivative central differences.
pub const FIRST_DIFF_STEP: f64 = 1e-5;
/// Default relative step for second-derivative central differences.
pub const SECOND_DIFF_STEP: f64 = 1e-4;

/// Connection coefficients `𝔄^A_μ(x, y)` as an `N × (n+1)` matrix.
pub type ConnectionFn = dyn Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync;

/// Step actually used along coordinate value `x`: `rel · max(1, |x|)`.
pub fn scaled_step(rel: f64, x: f64) -> f64 {
    rel * x.abs().max(1.0)
}

#[derive(Clone)]
pub struct FieldSpec {
    n_space: usize,
    fiber_dim: usize,
    connection: Option<Arc<ConnectionFn>>,
}

impl fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSpec")
            .field("n_space", &self.n_space)
            .field("fiber_dim", &self.fiber_dim)
            .field("flat", &self.is_flat())
            .finish()
    }
}

impl FieldSpec {
    /// A flat-connection spec over `ℝ^{n_space+1}` with `fiber_dim` field
    /// components.
    ///
    /// # Panics
    /// If `fiber_dim` is zero.
    pub fn new(n_space: usize, fiber_dim: usize) -> Self {
        assert!(fiber_dim > 0, "fiber dimension must be positive");
        Self {
            n_space,
            fiber_dim,
            connection: None,
        }
    }

    pub fn with_connection<F>(mut self, connection: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.connection = Some(Arc::new(connection));
        self
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }

    pub fn base_dim(&self) -> usize {
        self.n_space + 1
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    /// Number of jet (or multimomentum) components, `N(n+1)`.
    pub fn jet_dim(&self) -> usize {
        self.fiber_dim * self.base_dim()
    }

    pub fn is_flat(&self) -> bool {
        self.connection.is_none()
    }

    /// `𝔄^A_μ(x, y)`; exactly zero for the default flat connection.
    pub fn connection_coeffs(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        match &self.connection {
            None => DMatrix::zeros(self.fiber_dim, self.base_dim()),
            Some(c) => {
                let a = c(x, y);
                assert_eq!(
                    a.shape(),
                    (self.fiber_dim, self.base_dim()),
                    "connection returned wrong shape"
                );
                a
            }
        }
    }

    /// `∂𝔄/∂y^B` for each fiber direction `B` (central differences).
    pub fn connection_fiber_jacobian(&self, x: &[f64], y: &[f64]) -> Vec<DMatrix<f64>> {
        let zero = || DMatrix::zeros(self.fiber_dim, self.base_dim());
        if self.is_flat() {
            return (0..self.fiber_dim).map(|_| zero()).collect();
        }
        let mut yp = y.to_vec();
        (0..self.fiber_dim)
            .map(|b| {
                let h = scaled_step(FIRST_DIFF_STEP, y[b]);
                yp[b] = y[b] + h;
                let plus = self.connection_coeffs(x, &yp);
                yp[b] = y[b] - h;
                let minus = self.connection_coeffs(x, &yp);
                yp[b] = y[b];
                (plus - minus) / (2.0 * h)
            })
            .collect()
    }

    /// `∂𝔄/∂x^ν` for each base direction `ν` (central differences).
    pub fn connection_base_jacobian(&self, x: &[f64], y: &[f64]) -> Vec<DMatrix<f64>> {
        let zero = || DMatrix::zeros(self.fiber_dim, self.base_dim());
        if self.is_flat() {
            return (0..self.base_dim()).map(|_| zero()).collect();
        }
        let mut xp = x.to_vec();
        (0..self.base_dim())
            .map(|nu| {
                let h = scaled_step(FIRST_DIFF_STEP, x[nu]);
                xp[nu] = x[nu] + h;
                let plus = self.connection_coeffs(&xp, y);
                xp[nu] = x[nu] - h;
                let minus = self.connection_coeffs(&xp, y);
                xp[nu] = x[nu];
                (plus - minus) / (2.0 * h)
            })
            .collect()
    }

    pub(crate) fn check_base(&self, x: &[f64], context: &'static str) -> Result<()> {
        check_len(context, self.base_dim(), x.len())
    }

    pub(crate) fn check_fiber(&self, y: &[f64], context: &'static str) -> Result<()> {
        check_len(context, self.fiber_dim, y.len())
    }

    pub(crate) fn check_jet_matrix(&self, v: &DMatrix<f64>, context: &'static str) -> Result<()> {
        check_len(context, self.fiber_dim, v.nrows())?;
        check_len(context, self.base_dim(), v.ncols())
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            context,
            expected,
            actual,
        })
    }
}

/// A point `(x^μ, y^A, v^A_μ)` of the first jet bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct JetPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl JetPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>, v: DMatrix<f64>) -> Self {
        Self { x, y, v }
    }

    pub fn validate(&self, spec: &FieldSpec) -> Result<()> {
        spec.check_base(&self.x, "jet base point")?;
        spec.check_fiber(&self.y, "jet fiber value")?;
        spec.check_jet_matrix(&self.v, "jet matrix")
    }

    /// Uniform random jet with every coordinate in `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(spec: &FieldSpec, scale: f64, rng: &mut R) -> Self {
        let mut u = || rng.gen_range(-scale..=scale);
        let x = (0..spec.base_dim()).map(|_| u()).collect();
        let y = (0..spec.fiber_dim()).map(|_| u()).collect();
        let v = DMatrix::from_fn(spec.fiber_dim(), spec.base_dim(), |_, _| u());
        Self { x, y, v }
    }
}

/// A field `φ: ℝ^{n+1} → ℝ^N` with optional analytic derivatives.
pub trait Section: Send + Sync {
    fn base_dim(&self) -> usize;
    fn fiber_dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Vec<f64>;

    /// `∂_μ φ^A` as an `N × (n+1)` matrix, when known in closed form.
    fn gradient(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    /// `∂_μ ∂_ν φ^A`, one `(n+1) × (n+1)` matrix per component.
    fn hessians(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        None
    }
}

type ValueFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type GradientFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;
type HessianFn = dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync;

/// Section assembled from closures.
pub struct FnSection {
    base_dim: usize,
    fiber_dim: usize,
    value: Box<ValueFn>,
    gradient: Option<Box<GradientFn>>,
    hessians: Option<Box<HessianFn>>,
}

impl FnSection {
    pub fn new<F>(base_dim: usize, fiber_dim: usize, value: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            base_dim,
            fiber_dim,
            value: Box::new(value),
            gradient: None,
            hessians: None,
        }
    }

    pub fn with_gradient<F>(mut self, gradient: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.gradient = Some(Box::new(gradient));
        self
    }

    pub fn with_hessians<F>(mut self, hessians: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    {
        self.hessians = Some(Box::new(hessians));
        self
    }
}

impl Section for FnSection {
    fn base_dim(&self) -> usize {
        self.base_dim
    }
    fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }
    fn value(&self, x: &[f64]) -> Vec<f64> {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.gradient.as_ref().map(|g| g(x))
    }
    fn hessians(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        self.hessians.as_ref().map(|h| h(x))
    }
}

/// `φ^A(x) = c^A + Σ_j a^A_j sin(k_j · x + θ^A_j)`, with closed-form
/// derivatives. Used for randomized residual identities.
#[derive(Debug, Clone)]
pub struct TrigSeriesSection {
    offsets: Vec<f64>,
    wavevectors: Vec<Vec<f64>>,
    amplitudes: DMatrix<f64>,
    phases: DMatrix<f64>,
}

impl TrigSeriesSection {
    /// `amplitudes` and `phases` are `N × modes`; `wavevectors` has one
    /// entry of length `n+1` per mode.
    pub fn new(
        offsets: Vec<f64>,
        wavevectors: Vec<Vec<f64>>,
        amplitudes: DMatrix<f64>,
        phases: DMatrix<f64>,
    ) -> Self {
        assert_eq!(amplitudes.shape(), phases.shape());
        assert_eq!(amplitudes.nrows(), offsets.len());
        assert_eq!(amplitudes.ncols(), wavevectors.len());
        Self {
            offsets,
            wavevectors,
            amplitudes,
            phases,
        }
    }

    pub fn random<R: Rng + ?Sized>(
        base_dim: usize,
        fiber_dim: usize,
        modes: usize,
        amplitude: f64,
        rng: &mut R,
    ) -> Self {
        let offsets = (0..fiber_dim).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        let wavevectors = (0..modes)
            .map(|_| (0..base_dim).map(|_| rng.gen_range(-1.5..=1.5)).collect())
            .collect();
        let amplitudes =
            DMatrix::from_fn(fiber_dim, modes, |_, _| rng.gen_range(-amplitude..=amplitude));
        let phases =
            DMatrix::from_fn(fiber_dim, modes, |_, _| rng.gen_range(0.0..std::f64::consts::TAU));
        Self::new(offsets, wavevectors, amplitudes, phases)
    }

    fn phase(&self, a: usize, j: usize, x: &[f64]) -> f64 {
        let k = &self.wavevectors[j];
        k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + self.phases[(a, j)]
    }
}

impl Section for TrigSeriesSection {
    fn base_dim(&self) -> usize {
        self.wavevectors.first().map_or(0, Vec::len)
    }

    fn fiber_dim(&self) -> usize {
        self.offsets.len()
    }

    fn value(&self, x: &[f64]) -> Vec<f64> {
        (0..self.fiber_dim())
            .map(|a| {
                self.offsets[a]
                    + (0..self.wavevectors.len())
                        .map(|j| self.amplitudes[(a, j)] * self.phase(a, j, x).sin())
                        .sum::<f64>()
            })
            .collect()
    }

    fn gradient(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let mut g = DMatrix::zeros(self.fiber_dim(), self.base_dim());
        for a in 0..self.fiber_dim() {
            for (j, k) in self.wavevectors.iter().enumerate() {
                let c = self.amplitudes[(a, j)] * self.phase(a, j, x).cos();
                for (mu, kmu) in k.iter().enumerate() {
                    g[(a, mu)] += c * kmu;
                }
            }
        }
        Some(g)
    }

    fn hessians(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        let d = self.base_dim();
        Some(
            (0..self.fiber_dim())
                .map(|a| {
                    let mut h = DMatrix::zeros(d, d);
                    for (j, k) in self.wavevectors.iter().enumerate() {
                        let s = -self.amplitudes[(a, j)] * self.phase(a, j, x).sin();
                        for mu in 0..d {
                            for nu in 0..d {
                                h[(mu, nu)] += s * k[mu] * k[nu];
                            }
                        }
                    }
                    h
                })
                .collect(),
        )
    }
}

/// A section together with its valid region and finite-difference steps.
#[derive(Clone)]
pub struct SectionPatch {
    section: Arc<dyn Section>,
    domain: Option<Vec<(f64, f64)>>,
    first_step: f64,
    second_step: f64,
    analytic: bool,
}

impl fmt::Debug for SectionPatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SectionPatch")
            .field("base_dim", &self.base_dim())
            .field("fiber_dim", &self.fiber_dim())
            .field("domain", &self.domain)
            .field("first_step", &self.first_step)
            .field("second_step", &self.second_step)
            .field("analytic", &self.analytic)
            .finish()
    }
}

impl SectionPatch {
    pub fn new<S: Section + 'static>(section: S) -> Self {
        Self::from_arc(Arc::new(section))
    }

    pub fn from_arc(section: Arc<dyn Section>) -> Self {
        Self {
            section,
            domain: None,
            first_step: FIRST_DIFF_STEP,
            second_step: SECOND_DIFF_STEP,
            analytic: true,
        }
    }

    /// Restricts the patch to the box `Π_μ [lo_μ, hi_μ]`.
    pub fn with_domain(mut self, bounds: Vec<(f64, f64)>) -> Self {
        assert_eq!(bounds.len(), self.base_dim());
        self.domain = Some(bounds);
        self
    }

    pub fn with_steps(mut self, first: f64, second: f64) -> Self {
        assert!(first > 0.0 && second > 0.0);
        self.first_step = first;
        self.second_step = second;
        self
    }

    /// Ignores any analytic derivatives and differences the values instead.
    pub fn finite_difference_only(mut self) -> Self {
        self.analytic = false;
        self
    }

    pub fn base_dim(&self) -> usize {
        self.section.base_dim()
    }

    pub fn fiber_dim(&self) -> usize {
        self.section.fiber_dim()
    }

    pub fn first_step(&self) -> f64 {
        self.first_step
    }

    pub fn has_analytic_gradient(&self, x: &[f64]) -> bool {
        self.analytic && self.section.gradient(x).is_some()
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        check_len("patch base point", self.base_dim(), x.len())?;
        if let Some(bounds) = &self.domain {
            for (mu, (&xi, &(lo, hi))) in x.iter().zip(bounds).enumerate() {
                if !(lo..=hi).contains(&xi) {
                    return Err(Error::StencilOutOfRange {
                        point: x.to_vec(),
                        coordinate: mu,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(self.section.value(x))
    }

    fn shifted(&self, x: &[f64], shifts: &[(usize, f64)]) -> Result<Vec<f64>> {
        let mut xs = x.to_vec();
        for &(mu, h) in shifts {
            xs[mu] += h;
        }
        self.value(&xs)
    }

    /// `∂_μ φ^A(x)`: analytic when available, otherwise second-order
    /// central differences.
    pub fn first_derivatives(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        if self.analytic {
            if let Some(g) = self.section.gradient(x) {
                return Ok(g);
            }
        }
        let n = self.fiber_dim();
        let mut g = DMatrix::zeros(n, self.base_dim());
        for mu in 0..self.base_dim() {
            let h = scaled_step(self.first_step, x[mu]);
            let plus = self.shifted(x, &[(mu, h)])?;
            let minus = self.shifted(x, &[(mu, -h)])?;
            for a in 0..n {
                g[(a, mu)] = (plus[a] - minus[a]) / (2.0 * h);
            }
        }
        Ok(g)
    }

    /// `∂_μ ∂_ν φ^A(x)`, one symmetric matrix per component.
    pub fn second_derivatives(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.check_point(x)?;
        if self.analytic {
            if let Some(h) = self.section.hessians(x) {
                return Ok(h);
            }
        }
        let n = self.fiber_dim();
        let d = self.base_dim();
        let center = self.section.value(x);
        let steps: Vec<f64> = x.iter().map(|&xi| scaled_step(self.second_step, xi)).collect();
        let mut out = vec![DMatrix::zeros(d, d); n];
        for mu in 0..d {
            let hm = steps[mu];
            let plus = self.shifted(x, &[(mu, hm)])?;
            let minus = self.shifted(x, &[(mu, -hm)])?;
            for a in 0..n {
                out[a][(mu, mu)] = (plus[a] - 2.0 * center[a] + minus[a]) / (hm * hm);
            }
            for nu in (mu + 1)..d {
                let hn = steps[nu];
                let pp = self.shifted(x, &[(mu, hm), (nu, hn)])?;
                let pm = self.shifted(x, &[(mu, hm), (nu, -hn)])?;
                let mp = self.shifted(x, &[(mu, -hm), (nu, hn)])?;
                let mm = self.shifted(x, &[(mu, -hm), (nu, -hn)])?;
                for a in 0..n {
                    let val = (pp[a] - pm[a] - mp[a] + mm[a]) / (4.0 * hm * hn);
                    out[a][(mu, nu)] = val;
                    out[a][(nu, mu)] = val;
                }
            }
        }
        Ok(out)
    }
}

/// `j¹φ(x) = (x, φ(x), ∂φ(x))`.
pub fn jet_of_section(spec: &FieldSpec, patch: &SectionPatch, x: &[f64]) -> Result<JetPoint> {
    spec.check_base(x, "jet_of_section base point")?;
    check_len("jet_of_section fiber", spec.fiber_dim(), patch.fiber_dim())?;
    let y = patch.value(x)?;
    let v = patch.first_derivatives(x)?;
    Ok(JetPoint::new(x.to_vec(), y, v))
}

/// Same as [`FieldSpec::connection_coeffs`]; kept as a free function to
/// mirror the other per-point operations.
pub fn connection_coeffs(spec: &FieldSpec, x: &[f64], y: &[f64]) -> DMatrix<f64> {
    spec.connection_coeffs(x, y)
}

/// Central-difference stencils for derivatives of vector-valued fields
/// along a base direction. Steps are relative, scaled by `max(1, |x_μ|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffStencil {
    Central2 { step: f64 },
    Central4 { step: f64 },
}

impl Default for DiffStencil {
    fn default() -> Self {
        DiffStencil::Central4 { step: 1e-3 }
    }
}

impl DiffStencil {
    pub fn step(&self) -> f64 {
        match *self {
            DiffStencil::Central2 { step } | DiffStencil::Central4 { step } => step,
        }
    }

    /// `(offset multiple, weight)` pairs; the derivative is
    /// `Σ w · f(x + m h) / h`.
    fn weights(&self) -> &'static [(f64, f64)] {
        match self {
            DiffStencil::Central2 { .. } => &[(1.0, 0.5), (-1.0, -0.5)],
            DiffStencil::Central4 { .. } => &[
                (2.0, -1.0 / 12.0),
                (1.0, 8.0 / 12.0),
                (-1.0, -8.0 / 12.0),
                (-2.0, 1.0 / 12.0),
            ],
        }
    }

    /// `∂f/∂x^μ` at `x` for a vector-valued `f`.
    pub fn derivative<F>(&self, f: F, x: &[f64], mu: usize) -> Result<Vec<f64>>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>>,
    {
        let h = scaled_step(self.step(), x[mu]);
        let mut xs = x.to_vec();
        let mut acc: Option<Vec<f64>> = None;
        for &(m, w) in self.weights() {
            xs[mu] = x[mu] + m * h;
            let val = f(&xs)?;
            match acc.as_mut() {
                None => acc = Some(val.iter().map(|v| w * v).collect()),
                Some(acc) => {
                    for (a, v) in acc.iter_mut().zip(&val) {
                        *a += w * v;
                    }
                }
            }
        }
        Ok(acc.unwrap_or_default().into_iter().map(|a| a / h).collect())
    }
}
