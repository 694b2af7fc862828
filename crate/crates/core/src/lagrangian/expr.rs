//! User-supplied densities: generic expressions differentiated exactly with
//! hyper-dual numbers, and plain closures differentiated numerically.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{Density, LagrangianDensity, Partials};
use crate::bundle::{scaled_step, FieldSpec, FIRST_DIFF_STEP, SECOND_DIFF_STEP};
use crate::dual::{HyperDual, Scalar};

/// A density written once against [`Scalar`]. `v` is μ-major:
/// `v[μ·N + A] = v^A_μ`.
pub trait DensityExpr: Send + Sync {
    fn eval<T: Scalar>(&self, x: &[T], y: &[T], v: &[T]) -> T;
}

/// [`Density`] backed by a [`DensityExpr`]; partials are exact to
/// rounding.
pub struct ExprDensity<E> {
    spec: FieldSpec,
    expr: E,
    name: String,
    depends_on_x: bool,
    depends_on_y: bool,
}

impl<E> fmt::Debug for ExprDensity<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExprDensity")
            .field("name", &self.name)
            .field("spec", &self.spec)
            .finish()
    }
}

impl<E: DensityExpr> ExprDensity<E> {
    pub fn new(spec: FieldSpec, expr: E) -> Self {
        Self {
            spec,
            expr,
            name: "expression".into(),
            depends_on_x: true,
            depends_on_y: true,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Declares that the expression ignores `x`.
    pub fn autonomous(mut self) -> Self {
        self.depends_on_x = false;
        self
    }

    /// Declares that the expression ignores `y`.
    pub fn fiber_independent(mut self) -> Self {
        self.depends_on_y = false;
        self
    }

    /// Evaluates with hyper-dual seeds on two of the concatenated
    /// variables `w = (x, y, v)`.
    fn seeded(&self, w: &[f64], i: usize, j: usize) -> HyperDual {
        let nb = self.spec.base_dim();
        let nf = self.spec.fiber_dim();
        let vars: Vec<HyperDual> = w
            .iter()
            .enumerate()
            .map(|(k, &val)| HyperDual::var(val, k == i, k == j))
            .collect();
        self.expr
            .eval(&vars[..nb], &vars[nb..nb + nf], &vars[nb + nf..])
    }
}

fn concat(x: &[f64], y: &[f64], v: &DMatrix<f64>) -> Vec<f64> {
    let mut w = Vec::with_capacity(x.len() + y.len() + v.len());
    w.extend_from_slice(x);
    w.extend_from_slice(y);
    w.extend_from_slice(v.as_slice());
    w
}

impl<E: DensityExpr> Density for ExprDensity<E> {
    fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    fn name(&self) -> String {
        self.name.clone()
    }

    fn value(&self, x: &[f64], y: &[f64], v: &DMatrix<f64>) -> f64 {
        self.expr.eval(x, y, v.as_slice())
    }

    fn partials(&self, x: &[f64], y: &[f64], v: &DMatrix<f64>) -> Partials {
        let nb = self.spec.base_dim();
        let nf = self.spec.fiber_dim();
        let d = self.spec.jet_dim();
        let w = concat(x, y, v);
        let (ox, oy, ov) = (0, nb, nb + nf);
        let mut out = Partials::zeros(&self.spec);
        for i in 0..d {
            for j in i..d {
                let r = self.seeded(&w, ov + i, ov + j);
                out.d2l_dvdv[(i, j)] = r.e12;
                out.d2l_dvdv[(j, i)] = r.e12;
                if i == j {
                    out.l = r.re;
                    out.dl_dv[(i % nf, i / nf)] = r.e1;
                }
            }
            for b in 0..nf {
                out.d2l_dvdy[(i, b)] = self.seeded(&w, ov + i, oy + b).e12;
            }
            for mu in 0..nb {
                let r = self.seeded(&w, ov + i, ox + mu);
                out.d2l_dvdx[(i, mu)] = r.e12;
                if i == 0 {
                    out.dl_dx[mu] = r.e2;
                }
            }
        }
        for a in 0..nf {
            for b in a..nf {
                let r = self.seeded(&w, oy + a, oy + b);
                out.d2l_dydy[(a, b)] = r.e12;
                out.d2l_dydy[(b, a)] = r.e12;
                if a == b {
                    out.dl_dy[a] = r.e1;
                }
            }
        }
        out
    }

    fn depends_on_x(&self) -> bool {
        self.depends_on_x
    }

    fn depends_on_y(&self) -> bool {
        self.depends_on_y
    }
}

type ValueFn = dyn Fn(&[f64], &[f64], &DMatrix<f64>) -> f64 + Send + Sync;

/// [`Density`] from a value closure; every partial is a central
/// difference with steps `1e-5·max(1,|w|)` (first) and `1e-4·max(1,|w|)`
/// (second).
#[derive(Clone)]
pub struct FiniteDifferenceDensity {
    spec: FieldSpec,
    value: Arc<ValueFn>,
    name: String,
}

impl fmt::Debug for FiniteDifferenceDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteDifferenceDensity")
            .field("name", &self.name)
            .field("spec", &self.spec)
            .finish()
    }
}

impl FiniteDifferenceDensity {
    pub fn new<F>(spec: FieldSpec, value: F) -> Self
    where
        F: Fn(&[f64], &[f64], &DMatrix<f64>) -> f64 + Send + Sync + 'static,
    {
        Self {
            spec,
            value: Arc::new(value),
            name: "finite_difference".into(),
        }
    }

    /// Differentiates another density's values, ignoring its own partials.
    pub fn from_density(l: LagrangianDensity) -> Self {
        let spec = l.spec().clone();
        let name = format!("fd[{}]", l.name());
        Self {
            spec,
            value: Arc::new(move |x, y, v| l.value(x, y, v)),
            name,
        }
    }

    fn eval_w(&self, w: &[f64]) -> f64 {
        let nb = self.spec.base_dim();
        let nf = self.spec.fiber_dim();
        let v = DMatrix::from_column_slice(nf, nb, &w[nb + nf..]);
        (self.value)(&w[..nb], &w[nb..nb + nf], &v)
    }

    fn first(&self, w: &mut [f64], i: usize) -> f64 {
        let wi = w[i];
        let h = scaled_step(FIRST_DIFF_STEP, wi);
        w[i] = wi + h;
        let fp = self.eval_w(w);
        w[i] = wi - h;
        let fm = self.eval_w(w);
        w[i] = wi;
        (fp - fm) / (2.0 * h)
    }

    fn second(&self, w: &mut [f64], i: usize, j: usize, center: f64) -> f64 {
        let (wi, wj) = (w[i], w[j]);
        let hi = scaled_step(SECOND_DIFF_STEP, wi);
        if i == j {
            w[i] = wi + hi;
            let fp = self.eval_w(w);
            w[i] = wi - hi;
            let fm = self.eval_w(w);
            w[i] = wi;
            return (fp - 2.0 * center + fm) / (hi * hi);
        }
        let hj = scaled_step(SECOND_DIFF_STEP, wj);
        let mut at = |si: f64, sj: f64| {
            w[i] = wi + si * hi;
            w[j] = wj + sj * hj;
            self.eval_w(w)
        };
        let val = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * hi * hj);
        w[i] = wi;
        w[j] = wj;
        val
    }
}

impl Density for FiniteDifferenceDensity {
    fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    fn name(&self) -> String {
        self.name.clone()
    }

    fn value(&self, x: &[f64], y: &[f64], v: &DMatrix<f64>) -> f64 {
        (self.value)(x, y, v)
    }

    fn partials(&self, x: &[f64], y: &[f64], v: &DMatrix<f64>) -> Partials {
        let nb = self.spec.base_dim();
        let nf = self.spec.fiber_dim();
        let d = self.spec.jet_dim();
        let mut w = concat(x, y, v);
        let (oy, ov) = (nb, nb + nf);
        let mut out = Partials::zeros(&self.spec);
        out.l = self.eval_w(&w);
        let center = out.l;
        for mu in 0..nb {
            out.dl_dx[mu] = self.first(&mut w, mu);
        }
        for a in 0..nf {
            out.dl_dy[a] = self.first(&mut w, oy + a);
        }
        for i in 0..d {
            out.dl_dv[(i % nf, i / nf)] = self.first(&mut w, ov + i);
            for j in i..d {
                let s = self.second(&mut w, ov + i, ov + j, center);
                out.d2l_dvdv[(i, j)] = s;
                out.d2l_dvdv[(j, i)] = s;
            }
            for b in 0..nf {
                out.d2l_dvdy[(i, b)] = self.second(&mut w, ov + i, oy + b, center);
            }
            for mu in 0..nb {
                out.d2l_dvdx[(i, mu)] = self.second(&mut w, ov + i, mu, center);
            }
        }
        for a in 0..nf {
            for b in a..nf {
                let s = self.second(&mut w, oy + a, oy + b, center);
                out.d2l_dydy[(a, b)] = s;
                out.d2l_dydy[(b, a)] = s;
            }
        }
        out
    }

    fn exact_partials(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::JetPoint;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// A deliberately coupled density: `e^{x⁰/5} (½v₀² − ½v₁²) + y v₀ v₁ +
    /// cos(y) x¹ + ⅓ v₁³`.
    struct Coupled;

    impl DensityExpr for Coupled {
        fn eval<T: Scalar>(&self, x: &[T], y: &[T], v: &[T]) -> T {
            (x[0] * 0.2).exp() * (v[0] * v[0] - v[1] * v[1]) * 0.5
                + y[0] * v[0] * v[1]
                + y[0].cos() * x[1]
                + v[1].powi(3) / 3.0
        }
    }

    #[test]
    fn hyper_dual_partials_agree_with_differences() {
        let spec = FieldSpec::new(1, 1);
        let exact = LagrangianDensity::new(ExprDensity::new(spec.clone(), Coupled));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples: Vec<_> = (0..50).map(|_| JetPoint::random(&spec, 1.5, &mut rng)).collect();
        assert!(exact.cross_check(&samples) < 1e-6);
    }

    #[test]
    fn hyper_dual_partials_closed_form_spot_check() {
        let spec = FieldSpec::new(1, 1);
        let l = ExprDensity::new(spec, Coupled);
        let v = DMatrix::from_row_slice(1, 2, &[0.5, -0.25]);
        let p = l.partials(&[0.0, 2.0], &[0.3], &v);
        // ∂L/∂v₁ = −v₁ + y v₀ + v₁²
        assert!((p.dl_dv[(0, 1)] - (0.25 + 0.15 + 0.0625)).abs() < 1e-15);
        assert!((p.d2l_dvdy[(1, 0)] - 0.5).abs() < 1e-15);
        assert!((p.d2l_dvdx[(0, 0)] - 0.2 * 0.5).abs() < 1e-15);
        assert!((p.dl_dx[1] - 0.3f64.cos()).abs() < 1e-15);
        assert!((p.d2l_dydy[(0, 0)] + 0.3f64.cos() * 2.0).abs() < 1e-15);
    }

    #[test]
    fn finite_difference_density_tracks_exact() {
        let spec = FieldSpec::new(2, 2);
        struct Mixed;
        impl DensityExpr for Mixed {
            fn eval<T: Scalar>(&self, x: &[T], y: &[T], v: &[T]) -> T {
                let mut s = T::zero();
                for (k, vk) in v.iter().enumerate() {
                    s += *vk * *vk * (1.0 + 0.1 * k as f64);
                }
                s * 0.5 + (y[0] * y[1]).sin() + v[2] * v[3] * x[2] + (y[1] * v[5]).tanh()
            }
        }
        let exact = ExprDensity::new(spec.clone(), Mixed);
        let fd = FiniteDifferenceDensity::new(spec.clone(), move |x, y, v| {
            Mixed.eval(x, y, v.as_slice())
        });
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let s = JetPoint::random(&spec, 1.0, &mut rng);
            let a = exact.partials(&s.x, &s.y, &s.v);
            let b = fd.partials(&s.x, &s.y, &s.v);
            assert!(super::super::partials_distance(&b, &a) < 1e-6);
        }
    }
}
