//! Built-in families with quadratic kinetic terms.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use super::{flat_index, Density, Partials, PhasePoint};
use crate::bundle::FieldSpec;
use crate::error::{Error, Result};

/// Self-interaction `V(y)`; all choices depend on `y` only through the
/// components or `|y|`.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Zero,
    /// `V = −½m²|y|²`
    KleinGordon { mass: f64 },
    /// `V = Σ_A (cos y^A − 1)`
    SineGordon,
    /// `V = ½λ|y|² + ¼γ|y|⁴`
    Duffing { lambda: f64, gamma: f64 },
}

impl Potential {
    pub fn value(&self, y: &[f64]) -> f64 {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        match *self {
            Potential::Zero => 0.0,
            Potential::KleinGordon { mass } => -0.5 * mass * mass * r2,
            Potential::SineGordon => y.iter().map(|v| v.cos() - 1.0).sum(),
            Potential::Duffing { lambda, gamma } => 0.5 * lambda * r2 + 0.25 * gamma * r2 * r2,
        }
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        match *self {
            Potential::Zero => vec![0.0; y.len()],
            Potential::KleinGordon { mass } => y.iter().map(|v| -mass * mass * v).collect(),
            Potential::SineGordon => y.iter().map(|v| -v.sin()).collect(),
            Potential::Duffing { lambda, gamma } => {
                y.iter().map(|v| (lambda + gamma * r2) * v).collect()
            }
        }
    }

    pub fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let n = y.len();
        let r2: f64 = y.iter().map(|v| v * v).sum();
        match *self {
            Potential::Zero => DMatrix::zeros(n, n),
            Potential::KleinGordon { mass } => DMatrix::identity(n, n) * (-mass * mass),
            Potential::SineGordon => DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                n,
                y.iter().map(|v| -v.cos()),
            )),
            Potential::Duffing { lambda, gamma } => DMatrix::from_fn(n, n, |i, j| {
                let diag = if i == j { lambda + gamma * r2 } else { 0.0 };
                diag + 2.0 * gamma * y[i] * y[j]
            }),
        }
    }

    /// `V` is unchanged by `y ↦ y + c` for every constant `c`.
    pub fn is_shift_invariant(&self) -> bool {
        *self == Potential::Zero
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Zero => write!(f, "zero"),
            Potential::KleinGordon { mass } => write!(f, "klein_gordon({mass})"),
            Potential::SineGordon => write!(f, "sine_gordon"),
            Potential::Duffing { lambda, gamma } => write!(f, "duffing({lambda}, {gamma})"),
        }
    }
}

impl FromStr for Potential {
    type Err = Error;

    /// Accepts `zero`, `klein_gordon`, `klein_gordon(m)`, `sine_gordon`,
    /// `duffing(λ, γ)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, args) = match s.find('(') {
            Some(open) => {
                let close = s
                    .rfind(')')
                    .filter(|&c| c > open && s[c + 1..].trim().is_empty())
                    .ok_or_else(|| Error::InvalidParameter(format!("unbalanced parentheses in `{s}`")))?;
                let args = s[open + 1..close]
                    .split(',')
                    .map(|a| {
                        a.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::InvalidParameter(format!("bad number `{}` in `{s}`", a.trim())))
                    })
                    .collect::<Result<Vec<_>>>()?;
                (s[..open].trim(), args)
            }
            None => (s, Vec::new()),
        };
        let arity = |want: usize| {
            if args.len() == want {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "`{head}` takes {want} parameter(s), got {}",
                    args.len()
                )))
            }
        };
        match head {
            "zero" => arity(0).map(|_| Potential::Zero),
            "klein_gordon" if args.is_empty() => Ok(Potential::KleinGordon { mass: 1.0 }),
            "klein_gordon" => arity(1).map(|_| Potential::KleinGordon { mass: args[0] }),
            "sine_gordon" => arity(0).map(|_| Potential::SineGordon),
            "duffing" => arity(2).map(|_| Potential::Duffing {
                lambda: args[0],
                gamma: args[1],
            }),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

/// Sign pattern of the kinetic term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KineticForm {
    /// `½(v₀² − Σ_i v_i²) + V`
    Wave,
    /// `½Σ_μ v_μ² − V`
    Elliptic,
}

impl KineticForm {
    pub fn signature(&self, mu: usize) -> f64 {
        match self {
            KineticForm::Wave if mu == 0 => 1.0,
            KineticForm::Wave => -1.0,
            KineticForm::Elliptic => 1.0,
        }
    }

    fn potential_sign(&self) -> f64 {
        match self {
            KineticForm::Wave => 1.0,
            KineticForm::Elliptic => -1.0,
        }
    }
}

/// `L = ½ Σ_{A,μ} σ_μ (v^A_μ)² ± V(y)` with closed-form partials.
#[derive(Debug, Clone)]
pub struct QuadraticDensity {
    spec: FieldSpec,
    kinetic: KineticForm,
    potential: Potential,
}

impl QuadraticDensity {
    pub fn new(spec: FieldSpec, kinetic: KineticForm, potential: Potential) -> Self {
        Self {
            spec,
            kinetic,
            potential,
        }
    }

    pub fn kinetic(&self) -> KineticForm {
        self.kinetic
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }
}

impl Density for QuadraticDensity {
    fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    fn name(&self) -> String {
        let family = match self.kinetic {
            KineticForm::Wave => "nonlinear_wave",
            KineticForm::Elliptic => "elliptic_pattern",
        };
        format!("{family}[{}]", self.potential)
    }

    fn value(&self, _x: &[f64], y: &[f64], v: &DMatrix<f64>) -> f64 {
        let mut kin = 0.0;
        for (mu, col) in v.column_iter().enumerate() {
            kin += self.kinetic.signature(mu) * col.norm_squared();
        }
        0.5 * kin + self.kinetic.potential_sign() * self.potential.value(y)
    }

    fn partials(&self, x: &[f64], y: &[f64], v: &DMatrix<f64>) -> Partials {
        let mut out = Partials::zeros(&self.spec);
        let s = self.kinetic.potential_sign();
        let n = self.spec.fiber_dim();
        out.l = self.value(x, y, v);
        out.dl_dy = self.potential.gradient(y).into_iter().map(|g| s * g).collect();
        out.d2l_dydy = self.potential.hessian(y) * s;
        for mu in 0..self.spec.base_dim() {
            let sig = self.kinetic.signature(mu);
            for a in 0..n {
                out.dl_dv[(a, mu)] = sig * v[(a, mu)];
                let i = flat_index(n, a, mu);
                out.d2l_dvdv[(i, i)] = sig;
            }
        }
        out
    }

    fn depends_on_x(&self) -> bool {
        false
    }

    fn depends_on_y(&self) -> bool {
        self.potential != Potential::Zero
    }

    fn closed_form_hamiltonian(&self, z: &PhasePoint) -> Option<f64> {
        if !self.spec.is_flat() {
            return None;
        }
        let mut kin = 0.0;
        for (mu, col) in z.p.column_iter().enumerate() {
            kin += self.kinetic.signature(mu) * col.norm_squared();
        }
        Some(0.5 * kin - self.kinetic.potential_sign() * self.potential.value(&z.y))
    }
}
