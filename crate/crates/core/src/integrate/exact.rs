//! Closed-form solutions of the 1+1 nonlinear wave equation
//! `φ_tt − φ_xx = V′(φ)`, used as initial data and reference trajectories.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::DMatrix;

use crate::bundle::{Section, SectionPatch};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactSolution {
    /// `φ = A cos(kx − ωt)`, `ω² = k² + m²`, for `V = −½m²φ²`.
    KgPlaneWave { amplitude: f64, k: f64, mass: f64 },
    /// `φ = 4 arctan exp(γ(x − x₀ − ct))`, `γ = 1/√(1 − c²)`, for
    /// `V = cos φ − 1`.
    SgKink { c: f64, x0: f64 },
    Constant { value: f64 },
}

impl ExactSolution {
    pub const NAMES: [&'static str; 3] = ["kg_plane_wave", "sg_kink", "constant"];

    /// Builds from a name and a parameter map; missing parameters take
    /// the defaults `A = k = m = 1`, `c = 0.5`, `x0 = 0`, `value = 0`.
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed: &[&str] = match name {
            "kg_plane_wave" => &["amplitude", "k", "mass"],
            "sg_kink" => &["c", "x0"],
            "constant" => &["value"],
            other => return Err(Error::UnknownName(other.to_string())),
        };
        if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidParameter(format!("`{bad}` is not a parameter of {name}")));
        }
        let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        let sol = match name {
            "kg_plane_wave" => ExactSolution::KgPlaneWave {
                amplitude: get("amplitude", 1.0),
                k: get("k", 1.0),
                mass: get("mass", 1.0),
            },
            "sg_kink" => ExactSolution::SgKink {
                c: get("c", 0.5),
                x0: get("x0", 0.0),
            },
            _ => ExactSolution::Constant {
                value: get("value", 0.0),
            },
        };
        sol.validate()?;
        Ok(sol)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ExactSolution::SgKink { c, .. } if !(c.abs() < 1.0) => Err(Error::InvalidParameter(format!(
                "kink speed must satisfy |c| < 1, got {c}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExactSolution::KgPlaneWave { .. } => "kg_plane_wave",
            ExactSolution::SgKink { .. } => "sg_kink",
            ExactSolution::Constant { .. } => "constant",
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match *self {
            ExactSolution::KgPlaneWave { amplitude, k, mass } => {
                vec![("amplitude", amplitude), ("k", k), ("mass", mass)]
            }
            ExactSolution::SgKink { c, x0 } => vec![("c", c), ("x0", x0)],
            ExactSolution::Constant { value } => vec![("value", value)],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// `φ(x_end) − φ(x_start)` over one period for periodic storage.
    pub fn twist(&self) -> f64 {
        match *self {
            ExactSolution::SgKink { .. } => TAU,
            _ => 0.0,
        }
    }

    pub fn frequency(&self) -> Option<f64> {
        match *self {
            ExactSolution::KgPlaneWave { k, mass, .. } => Some((k * k + mass * mass).sqrt()),
            _ => None,
        }
    }

    /// `(φ, [φ_t, φ_x], [[φ_tt, φ_tx], [φ_xt, φ_xx]])` at `(t, x)`.
    pub fn eval(&self, t: f64, x: f64) -> (f64, [f64; 2], [f64; 4]) {
        match *self {
            ExactSolution::KgPlaneWave { amplitude, k, mass } => {
                let w = (k * k + mass * mass).sqrt();
                let (s, c) = (k * x - w * t).sin_cos();
                let a = amplitude;
                (
                    a * c,
                    [a * w * s, -a * k * s],
                    [-a * w * w * c, a * w * k * c, a * w * k * c, -a * k * k * c],
                )
            }
            ExactSolution::SgKink { c, x0 } => {
                let g = 1.0 / (1.0 - c * c).sqrt();
                let xi = g * (x - x0 - c * t);
                let sech = 1.0 / xi.cosh();
                let th = xi.tanh();
                let d1 = 2.0 * sech;
                let d2 = -2.0 * sech * th;
                (
                    4.0 * xi.exp().atan(),
                    [-c * g * d1, g * d1],
                    [c * c * g * g * d2, -c * g * g * d2, -c * g * g * d2, g * g * d2],
                )
            }
            ExactSolution::Constant { value } => (value, [0.0; 2], [0.0; 4]),
        }
    }

    pub fn patch(&self) -> SectionPatch {
        SectionPatch::new(*self)
    }
}

impl Section for ExactSolution {
    fn base_dim(&self) -> usize {
        2
    }

    fn fiber_dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> Vec<f64> {
        vec![self.eval(x[0], x[1]).0]
    }

    fn gradient(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(1, 2, &self.eval(x[0], x[1]).1))
    }

    fn hessians(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        Some(vec![DMatrix::from_row_slice(2, 2, &self.eval(x[0], x[1]).2)])
    }
}

/// Section patch for a named solution.
pub fn exact_solution(name: &str, params: &BTreeMap<String, f64>) -> Result<SectionPatch> {
    Ok(ExactSolution::from_name(name, params)?.patch())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::{LagrangianDensity, Potential};
    use crate::multihamiltonian::euler_lagrange_residual;

    fn params(p: &[(&str, f64)]) -> BTreeMap<String, f64> {
        p.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn plane_wave_frequency_and_residual() {
        let sol = ExactSolution::from_name("kg_plane_wave", &params(&[("amplitude", 1.0), ("k", 1.0), ("mass", 1.0)])).unwrap();
        assert_eq!(sol.frequency(), Some(2f64.sqrt()));
        let l = LagrangianDensity::nonlinear_wave(1, 1, Potential::KleinGordon { mass: 1.0 });
        for x in [[0.0, 0.0], [0.4, 2.0], [3.0, -1.0]] {
            assert!(euler_lagrange_residual(&l, &sol.patch(), &x).unwrap()[0].abs() <= 1e-10);
        }
    }

    #[test]
    fn constant_residual_is_zero() {
        let patch = exact_solution("constant", &params(&[("value", 0.0)])).unwrap();
        let l = LagrangianDensity::nonlinear_wave(1, 1, Potential::SineGordon);
        assert_eq!(euler_lagrange_residual(&l, &patch, &[1.0, 2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn kink_residual() {
        let patch = exact_solution("sg_kink", &params(&[("c", 0.5)])).unwrap();
        let l = LagrangianDensity::nonlinear_wave(1, 1, Potential::SineGordon);
        for x in [[0.0, 0.0], [1.0, 0.3], [-2.0, -1.5], [4.0, 9.0]] {
            assert!(euler_lagrange_residual(&l, &patch, &x).unwrap()[0].abs() <= 1e-9);
        }
    }

    #[test]
    fn kink_derivatives_match_differences() {
        let sol = ExactSolution::SgKink { c: 0.5, x0: 0.3 };
        let (_, g, h) = sol.eval(0.2, 0.7);
        let e = 1e-6;
        let f = |t: f64, x: f64| sol.eval(t, x).0;
        assert!(((f(0.2 + e, 0.7) - f(0.2 - e, 0.7)) / (2.0 * e) - g[0]).abs() < 1e-8);
        assert!(((f(0.2, 0.7 + e) - f(0.2, 0.7 - e)) / (2.0 * e) - g[1]).abs() < 1e-8);
        let gx = |t: f64, x: f64| sol.eval(t, x).1[1];
        assert!(((gx(0.2, 0.7 + e) - gx(0.2, 0.7 - e)) / (2.0 * e) - h[3]).abs() < 1e-7);
        assert!(((gx(0.2 + e, 0.7) - gx(0.2 - e, 0.7)) / (2.0 * e) - h[2]).abs() < 1e-7);
    }

    #[test]
    fn errors() {
        assert!(matches!(exact_solution("soliton", &BTreeMap::new()), Err(Error::UnknownName(_))));
        assert!(matches!(
            exact_solution("sg_kink", &params(&[("c", 1.0)])),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            exact_solution("constant", &params(&[("mass", 1.0)])),
            Err(Error::InvalidParameter(_))
        ));
    }
}
