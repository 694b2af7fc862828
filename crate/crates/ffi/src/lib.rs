//! C ABI over `multisym`.
//!
//! Models are opaque handles created by `msym_model_new` and released with
//! `msym_model_free`. Every fallible call returns an `MsymStatus`; the
//! message of the last failure on the calling thread is available from
//! `msym_last_error_message`.
//!
//! Jet and multimomentum arrays are `N × (n+1)` stored time-first and
//! direction-major: entry `(A, μ)` is at `μ·N + A`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use multisym::bundle::JetPoint;
use multisym::integrate::{simulate, SimulationConfig};
use multisym::lagrangian::{self, LagrangianDensity, PhasePoint};
use multisym::multihamiltonian::assemble_structure_matrices;
use multisym::patterns::{hessian_index, IndexOptions};
use multisym::Error;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsymStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Unsupported = 4,
    NoConvergence = 5,
    SingularMatrix = 6,
    Io = 7,
    Internal = 8,
}

/// Opaque Lagrangian density.
pub struct MsymModel {
    inner: LagrangianDensity,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MsymSimulationSummary {
    pub steps: usize,
    pub rows: usize,
    pub max_newton_iterations: usize,
    pub energy_initial: f64,
    pub energy_rel_drift: f64,
    pub momentum_rel_drift: f64,
    pub max_div_residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MsymPatternSummary {
    pub dim: usize,
    pub index: usize,
    pub degenerate: bool,
    pub determinant: f64,
    pub asymmetry: f64,
    pub closure: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(MsymStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::ShapeMismatch { .. }
            | Error::StencilOutOfRange { .. }
            | Error::UnknownName(_)
            | Error::InvalidParameter(_)
            | Error::Config(_) => MsymStatus::InvalidArgument,
            Error::UnsupportedDimension(_) | Error::UnsupportedModel(_) => MsymStatus::Unsupported,
            Error::NoConvergence { .. }
            | Error::HyperbolicEquilibrium { .. }
            | Error::ContinuationFailure { .. }
            | Error::StepFailed { .. } => MsymStatus::NoConvergence,
            Error::SingularJacobian(_) => MsymStatus::SingularMatrix,
            Error::Io(_) | Error::Csv(_) => MsymStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> MsymStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MsymStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MsymStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(MsymStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(MsymStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn input<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(ptr, len))
}

unsafe fn model<'a>(m: *const MsymModel) -> Result<&'a LagrangianDensity, Failure> {
    m.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

struct Dims {
    base: usize,
    fiber: usize,
}

impl Dims {
    fn of(l: &LagrangianDensity) -> Self {
        Self {
            base: l.spec().base_dim(),
            fiber: l.spec().fiber_dim(),
        }
    }

    fn jet(&self) -> usize {
        self.base * self.fiber
    }
}

unsafe fn phase_point(l: &LagrangianDensity, x: *const f64, y: *const f64, p: *const f64) -> Result<PhasePoint, Failure> {
    let d = Dims::of(l);
    let x = input(x, d.base, "x")?.to_vec();
    let y = input(y, d.fiber, "y")?.to_vec();
    let p = DMatrix::from_column_slice(d.fiber, d.base, input(p, d.jet(), "p")?);
    Ok(PhasePoint::new(x, y, p))
}

/// Crate version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn msym_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn msym_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Built-in model by name (`nonlinear_wave`, `elliptic_pattern`,
/// `mechanics`, `harmonic_oscillator`) and potential string, e.g.
/// `"sine_gordon"` or `"duffing(-1, 0.5)"`.
///
/// # Safety
/// `name` and `potential` must be NUL-terminated strings; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn msym_model_new(
    name: *const c_char,
    n_space: usize,
    fiber_dim: usize,
    potential: *const c_char,
    out: *mut *mut MsymModel,
) -> MsymStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if fiber_dim == 0 {
            return Err(Failure(MsymStatus::InvalidArgument, "fiber_dim must be positive".into()));
        }
        let l = LagrangianDensity::builtin(text(name, "name")?, n_space, fiber_dim, text(potential, "potential")?)?;
        *out = Box::into_raw(Box::new(MsymModel { inner: l }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from `msym_model_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn msym_model_free(model: *mut MsymModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be valid; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn msym_model_dims(
    model: *const MsymModel,
    n_space: *mut usize,
    fiber_dim: *mut usize,
) -> MsymStatus {
    guard(|| {
        let l = self::model(model)?;
        if n_space.is_null() || fiber_dim.is_null() {
            return Err(null("output"));
        }
        *n_space = l.spec().n_space();
        *fiber_dim = l.spec().fiber_dim();
        Ok(())
    })
}

/// `p_A^μ = ∂L/∂v^A_μ` and `p = L − p·v` at the jet `(x, y, v)`.
///
/// # Safety
/// `x` has `n+1` entries, `y` has `N`, `v` and `p_out` have `N(n+1)`;
/// `p_affine_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn msym_legendre(
    model: *const MsymModel,
    x: *const f64,
    y: *const f64,
    v: *const f64,
    p_out: *mut f64,
    p_affine_out: *mut f64,
) -> MsymStatus {
    guard(|| {
        let l = self::model(model)?;
        let d = Dims::of(l);
        let jet = JetPoint::new(
            input(x, d.base, "x")?.to_vec(),
            input(y, d.fiber, "y")?.to_vec(),
            DMatrix::from_column_slice(d.fiber, d.base, input(v, d.jet(), "v")?),
        );
        let z = lagrangian::legendre(l, &jet)?;
        output(p_out, d.jet(), "p_out")?.copy_from_slice(z.p.as_slice());
        if !p_affine_out.is_null() {
            *p_affine_out = z.p_affine.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Jet `v` with `∂L/∂v = p` by Newton iteration.
///
/// # Safety
/// Array lengths as for `msym_legendre`.
#[no_mangle]
pub unsafe extern "C" fn msym_invert_legendre(
    model: *const MsymModel,
    x: *const f64,
    y: *const f64,
    p: *const f64,
    v_out: *mut f64,
) -> MsymStatus {
    guard(|| {
        let l = self::model(model)?;
        let z = phase_point(l, x, y, p)?;
        let jet = lagrangian::invert_legendre(l, &z, None)?;
        output(v_out, Dims::of(l).jet(), "v_out")?.copy_from_slice(jet.v.as_slice());
        Ok(())
    })
}

/// # Safety
/// Array lengths as for `msym_legendre`.
#[no_mangle]
pub unsafe extern "C" fn msym_hamiltonian(
    model: *const MsymModel,
    x: *const f64,
    y: *const f64,
    p: *const f64,
    h_out: *mut f64,
) -> MsymStatus {
    guard(|| {
        let l = self::model(model)?;
        let z = phase_point(l, x, y, p)?;
        if h_out.is_null() {
            return Err(null("h_out"));
        }
        *h_out = lagrangian::hamiltonian(l, &z)?;
        Ok(())
    })
}

/// `H` with `∂H/∂x` (`n+1`), `∂H/∂y` (`N`) and `∂H/∂p` (`N(n+1)`). Any
/// output may be null.
///
/// # Safety
/// Non-null pointers must have the stated lengths.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn msym_hamiltonian_partials(
    model: *const MsymModel,
    x: *const f64,
    y: *const f64,
    p: *const f64,
    h_out: *mut f64,
    dh_dx_out: *mut f64,
    dh_dy_out: *mut f64,
    dh_dp_out: *mut f64,
) -> MsymStatus {
    guard(|| {
        let l = self::model(model)?;
        let d = Dims::of(l);
        let z = phase_point(l, x, y, p)?;
        let hp = lagrangian::hamiltonian_partials(l, &z)?;
        if !h_out.is_null() {
            *h_out = hp.h;
        }
        if !dh_dx_out.is_null() {
            output(dh_dx_out, d.base, "dh_dx")?.copy_from_slice(&hp.dh_dx);
        }
        if !dh_dy_out.is_null() {
            output(dh_dy_out, d.fiber, "dh_dy")?.copy_from_slice(&hp.dh_dy);
        }
        if !dh_dp_out.is_null() {
            output(dh_dp_out, d.jet(), "dh_dp")?.copy_from_slice(hp.dh_dp.as_slice());
        }
        Ok(())
    })
}

/// Writes the `n+1` structure matrices, each `d × d` row-major with
/// `d = N(n+2)`, into `out` (`capacity` entries). `*d_out` receives `d`
/// even when `out` is null, so the call can size the buffer first.
///
/// # Safety
/// `out`, when non-null, must hold `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn msym_structure_matrices(
    n_space: usize,
    fiber_dim: usize,
    out: *mut i32,
    capacity: usize,
    d_out: *mut usize,
) -> MsymStatus {
    guard(|| {
        if fiber_dim == 0 {
            return Err(Failure(MsymStatus::InvalidArgument, "fiber_dim must be positive".into()));
        }
        let sm = assemble_structure_matrices(&multisym::bundle::FieldSpec::new(n_space, fiber_dim));
        let d = sm.d;
        if !d_out.is_null() {
            *d_out = d;
        }
        if out.is_null() {
            return Ok(());
        }
        let need = (n_space + 1) * d * d;
        if capacity < need {
            return Err(Failure(
                MsymStatus::InvalidArgument,
                format!("buffer holds {capacity} entries, need {need}"),
            ));
        }
        let buf = slice::from_raw_parts_mut(out, need);
        for mu in 0..=n_space {
            let m = sm.omega(mu);
            for r in 0..d {
                for c in 0..d {
                    buf[mu * d * d + r * d + c] = m[(r, c)];
                }
            }
        }
        Ok(())
    })
}

/// Runs a simulation from TOML text (null for the default kink run),
/// optionally writing the diagnostics CSV to `csv_path`.
///
/// # Safety
/// Strings must be NUL-terminated or null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msym_simulate_config(
    config_toml: *const c_char,
    csv_path: *const c_char,
    out: *mut MsymSimulationSummary,
) -> MsymStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = if config_toml.is_null() {
            SimulationConfig::default()
        } else {
            SimulationConfig::from_toml(text(config_toml, "config")?)?
        };
        let path = if csv_path.is_null() {
            None
        } else {
            Some(text(csv_path, "csv_path")?)
        };
        let r = simulate(&cfg, path.map(Path::new))?;
        let rel = |f: &dyn Fn(&multisym::integrate::DiagnosticsRow) -> f64| {
            let v0 = f(&r.rows[0]);
            r.rows.iter().fold(0.0f64, |m, row| m.max((f(row) - v0).abs())) / v0.abs().max(f64::MIN_POSITIVE)
        };
        *out = MsymSimulationSummary {
            steps: r.steps,
            rows: r.rows.len(),
            max_newton_iterations: r.max_newton_iterations,
            energy_initial: r.rows[0].energy,
            energy_rel_drift: rel(&|row| row.energy),
            momentum_rel_drift: rel(&|row| row.momentum),
            max_div_residual: r.rows.iter().fold(0.0f64, |m, row| m.max(row.max_div_residual)),
        };
        Ok(())
    })
}

/// Pattern index about `(amplitude, k)` with `k[free_index]` solved.
/// `k_out` and `levels_out` take `n+1` entries, `hessian_out` `(n+1)²`
/// row-major; each may be null.
///
/// # Safety
/// `k` has `k_len = n+1` entries; non-null outputs have the stated sizes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn msym_pattern_index(
    model: *const MsymModel,
    k: *const f64,
    k_len: usize,
    amplitude: f64,
    free_index: usize,
    k_out: *mut f64,
    levels_out: *mut f64,
    hessian_out: *mut f64,
    summary_out: *mut MsymPatternSummary,
) -> MsymStatus {
    guard(|| {
        let l = self::model(model)?;
        let k = input(k, k_len, "k")?;
        let opts = IndexOptions {
            free: free_index,
            ..IndexOptions::default()
        };
        let r = hessian_index(l, k, amplitude, &opts)?;
        let dim = r.k.len();
        if !k_out.is_null() {
            output(k_out, dim, "k_out")?.copy_from_slice(&r.k);
        }
        if !levels_out.is_null() {
            output(levels_out, dim, "levels_out")?.copy_from_slice(&r.levels);
        }
        if !hessian_out.is_null() {
            output(hessian_out, dim * dim, "hessian_out")?.copy_from_slice(r.hessian.transpose().as_slice());
        }
        if !summary_out.is_null() {
            *summary_out = MsymPatternSummary {
                dim,
                index: r.index,
                degenerate: r.degenerate,
                determinant: r.determinant,
                asymmetry: r.asymmetry,
                closure: r.orbit.closure,
            };
        }
        Ok(())
    })
}
