//! C ABI for `isskit`.
//!
//! Every fallible function returns an [`IsskitStatus`]; on failure the message
//! is kept per thread and read with [`isskit_last_error`]. Objects cross the
//! boundary as opaque handles created by `*_new`/`*_from_json` and released by
//! the matching `*_free`. Strings returned through `char **` are owned by the
//! caller and must be released with [`isskit_string_free`]. Indices are
//! 0-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use isskit::examples::{
    run_counterexample, run_coupled_linear, run_coupled_nonlinear, run_neumann_hurwitz, run_semilinear_energy,
    CounterexampleParams, CoupledLinearParams, CoupledNonlinearParams, ExampleConfig, NeumannParams,
    SemilinearParams,
};
use isskit::gains::{omega_path_build, omega_path_verify, small_gain_check};
use isskit::lyapunov::{lyapunov_residual, solve_lyapunov};
use isskit::pde::{simulate, spectral_abscissa, Field, Grid1D, InputSignal, Model, SimOptions, SystemSpec};
use isskit::{Error, GainMatrix, KFun};
use nalgebra::DMatrix;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IsskitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    InvalidJson = 4,
    ShapeMismatch = 5,
    NotHurwitz = 6,
    SmallGainViolated = 7,
    Numerical = 8,
    Io = 9,
    Panic = 10,
}

/// Comparison function handle.
pub struct IsskitKFun(KFun);

/// Gain matrix handle.
pub struct IsskitGainMatrix(GainMatrix);

/// Discretized system handle.
pub struct IsskitModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> IsskitStatus {
    match e {
        Error::Json(_) => IsskitStatus::InvalidJson,
        Error::Io(_) => IsskitStatus::Io,
        Error::DimensionMismatch { .. } | Error::ShapeMismatch(_) => IsskitStatus::ShapeMismatch,
        Error::NotHurwitz(_) => IsskitStatus::NotHurwitz,
        Error::SmallGainViolated => IsskitStatus::SmallGainViolated,
        Error::LinearSolveFailure(_)
        | Error::EigensolverFailure(_)
        | Error::NoPositiveRadius(_)
        | Error::NoFeasibleEnvelope(_)
        | Error::MethodUnavailable(_) => IsskitStatus::Numerical,
        _ => IsskitStatus::InvalidArgument,
    }
}

struct Fail(IsskitStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(IsskitStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> IsskitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            IsskitStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_last_error(&msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            IsskitStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(IsskitStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

fn json<T: serde::Serialize>(v: &T) -> Result<String, Fail> {
    serde_json::to_string(v).map_err(|e| Fail(IsskitStatus::InvalidJson, e.to_string()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn isskit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn isskit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn isskit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `k(r) = coeff · r^expo`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isskit_kfun_power(coeff: f64, expo: f64, out: *mut *mut IsskitKFun) -> IsskitStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = Box::into_raw(Box::new(IsskitKFun(KFun::power(coeff, expo)?)));
        Ok(())
    })
}

/// Parses a comparison function from its JSON form.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isskit_kfun_from_json(text: *const c_char, out: *mut *mut IsskitKFun) -> IsskitStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let out = out_ref(out, "out")?;
        let k: KFun = serde_json::from_str(text).map_err(|e| Fail(IsskitStatus::InvalidJson, e.to_string()))?;
        *out = Box::into_raw(Box::new(IsskitKFun(k)));
        Ok(())
    })
}

/// # Safety
/// `k` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isskit_kfun_eval(k: *const IsskitKFun, r: f64, out: *mut f64) -> IsskitStatus {
    guard(|| {
        let k = handle(k, "k")?;
        *out_ref(out, "out")? = k.0.eval(r)?;
        Ok(())
    })
}

/// `outer ∘ inner` as a new handle.
///
/// # Safety
/// Both handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isskit_kfun_compose(
    outer: *const IsskitKFun,
    inner: *const IsskitKFun,
    out: *mut *mut IsskitKFun,
) -> IsskitStatus {
    guard(|| {
        let (o, i) = (handle(outer, "outer")?, handle(inner, "inner")?);
        let out = out_ref(out, "out")?;
        *out = Box::into_raw(Box::new(IsskitKFun(o.0.compose(&i.0)?)));
        Ok(())
    })
}

/// Inverse function as a new handle.
///
/// # Safety
/// `k` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isskit_kfun_invert(k: *const IsskitKFun, out: *mut *mut IsskitKFun) -> IsskitStatus {
    guard(|| {
        let k = handle(k, "k")?;
        let out = out_ref(out, "out")?;
        *out = Box::into_raw(Box::new(IsskitKFun(k.0.invert()?)));
        Ok(())
    })
}

/// # Safety
/// `k` must come from this library and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn isskit_kfun_free(k: *mut IsskitKFun) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Empty `n × n` gain matrix.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isskit_gains_new(n: usize, out: *mut *mut IsskitGainMatrix) -> IsskitStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = Box::into_raw(Box::new(IsskitGainMatrix(GainMatrix::new(n)?)));
        Ok(())
    })
}

/// Parses a gain matrix from JSON (1-based `from`/`to` node labels).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isskit_gains_from_json(text: *const c_char, out: *mut *mut IsskitGainMatrix) -> IsskitStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let out = out_ref(out, "out")?;
        let g: GainMatrix = serde_json::from_str(text).map_err(|e| Fail(IsskitStatus::InvalidJson, e.to_string()))?;
        *out = Box::into_raw(Box::new(IsskitGainMatrix(g)));
        Ok(())
    })
}

/// Sets the gain from node `j` into node `i` to a copy of `k`.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn isskit_gains_set(
    g: *mut IsskitGainMatrix,
    i: usize,
    j: usize,
    k: *const IsskitKFun,
) -> IsskitStatus {
    guard(|| {
        let g = out_ref(g, "g")?;
        let k = handle(k, "k")?;
        g.0.set(i, j, k.0.clone())?;
        Ok(())
    })
}

/// Cycle small-gain check. Writes the verdict to `holds` and, when
/// `certificate_json` is non-null, the certificate as a JSON string.
///
/// # Safety
/// `g` must be a live handle, `holds` a valid pointer, and
/// `certificate_json` null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isskit_small_gain_check(
    g: *const IsskitGainMatrix,
    holds: *mut bool,
    certificate_json: *mut *mut c_char,
) -> IsskitStatus {
    guard(|| {
        let g = handle(g, "g")?;
        let holds = out_ref(holds, "holds")?;
        let cert = small_gain_check(&g.0)?;
        *holds = cert.verdict;
        if let Some(out) = certificate_json.as_mut() {
            *out = to_c_string(json(&cert)?);
        }
        Ok(())
    })
}

/// Builds `σ(t) = MAX{a t, Γ(a t), …}` and verifies it at `r_samples` radii.
/// Returns `SmallGainViolated` when the cycle condition fails. `path_json`
/// receives the verified path.
///
/// # Safety
/// `g` must be live, `a` must hold `n` values, and `verified`/`path_json`
/// must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn isskit_omega_path(
    g: *const IsskitGainMatrix,
    a: *const f64,
    n: usize,
    r_samples: usize,
    verified: *mut bool,
    path_json: *mut *mut c_char,
) -> IsskitStatus {
    guard(|| {
        let g = handle(g, "g")?;
        let a = slice(a, n, "a")?;
        let verified = out_ref(verified, "verified")?;
        let path_json = out_ref(path_json, "path_json")?;
        let mut path = omega_path_build(&g.0, a)?;
        let cert = omega_path_verify(&g.0, &mut path, r_samples)?;
        *verified = cert.verdict;
        *path_json = to_c_string(json(&path)?);
        Ok(())
    })
}

/// # Safety
/// `g` must come from this library and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn isskit_gains_free(g: *mut IsskitGainMatrix) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Discretizes a system spec (JSON) on `(0, d)` with `n_interior` points.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isskit_model_new(
    spec_json: *const c_char,
    d: f64,
    n_interior: usize,
    out: *mut *mut IsskitModel,
) -> IsskitStatus {
    guard(|| {
        let text = str_arg(spec_json, "spec_json")?;
        let out = out_ref(out, "out")?;
        let spec: SystemSpec =
            serde_json::from_str(text).map_err(|e| Fail(IsskitStatus::InvalidJson, e.to_string()))?;
        *out = Box::into_raw(Box::new(IsskitModel(Model::new(spec, Grid1D::new(d, n_interior)?)?)));
        Ok(())
    })
}

/// Number of species and of nodes per species.
///
/// # Safety
/// `m` must be live and both out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn isskit_model_shape(
    m: *const IsskitModel,
    species: *mut usize,
    nodes: *mut usize,
) -> IsskitStatus {
    guard(|| {
        let m = handle(m, "m")?;
        *out_ref(species, "species")? = m.0.species();
        *out_ref(nodes, "nodes")? = m.0.n();
        Ok(())
    })
}

/// Largest real part of the spectrum of the discretized linear part.
///
/// # Safety
/// `m` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn isskit_model_spectral_abscissa(m: *const IsskitModel, out: *mut f64) -> IsskitStatus {
    guard(|| {
        let m = handle(m, "m")?;
        let lin = Model::new(m.0.spec.linear_part(), m.0.grid.clone())?;
        *out_ref(out, "out")? = spectral_abscissa(&lin)?;
        Ok(())
    })
}

/// Simulates from `x0` (species-major, `species · nodes` values) with zero
/// input to `t_end` and writes the final state into `x_out`. `dt ≤ 0` picks
/// the default step. `blowup` receives whether the run was halted.
///
/// # Safety
/// `m` must be live; `x0` and `x_out` must each hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn isskit_model_simulate(
    m: *const IsskitModel,
    x0: *const f64,
    x_out: *mut f64,
    len: usize,
    t_end: f64,
    dt: f64,
    blowup: *mut bool,
) -> IsskitStatus {
    guard(|| {
        let m = handle(m, "m")?;
        let (k, n) = (m.0.species(), m.0.n());
        if len != k * n {
            return Err(Error::DimensionMismatch { expected: k * n, got: len }.into());
        }
        let x0 = Field::from_flat(k, n, slice(x0, len, "x0")?.to_vec())?;
        let out = slice_mut(x_out, len, "x_out")?;
        let blowup = out_ref(blowup, "blowup")?;
        let mut opts = SimOptions::new(t_end).stride(usize::MAX);
        if dt > 0.0 {
            opts = opts.dt(dt);
        }
        let traj = simulate(&m.0, &x0, &InputSignal::zero(), &opts)?;
        out.copy_from_slice(traj.last().values());
        *blowup = traj.blowup.is_some();
        Ok(())
    })
}

/// # Safety
/// `m` must come from this library and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn isskit_model_free(m: *mut IsskitModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Solves `RᵀP + PR = −I` for a Hurwitz `n × n` matrix `r` (row-major) and
/// writes `P` (row-major) and the residual `‖RᵀP + PR + I‖_max`.
///
/// # Safety
/// `r` and `p` must each hold `n · n` values; `residual` must be valid.
#[no_mangle]
pub unsafe extern "C" fn isskit_solve_lyapunov(
    r: *const f64,
    n: usize,
    p: *mut f64,
    residual: *mut f64,
) -> IsskitStatus {
    guard(|| {
        let rm = DMatrix::from_row_slice(n, n, slice(r, n * n, "r")?);
        let out = slice_mut(p, n * n, "p")?;
        let residual = out_ref(residual, "residual")?;
        let pm = solve_lyapunov(&rm)?;
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = pm[(i, j)];
            }
        }
        *residual = lyapunov_residual(&rm, &pm);
        Ok(())
    })
}

/// Runs a worked example with default parameters and writes its artifacts
/// under `out_dir/<id>/`. `verdict` receives the overall verdict and
/// `report_json`, when non-null, the report.
///
/// # Safety
/// `id` and `out_dir` must be NUL-terminated strings; `verdict` must be
/// valid; `report_json` null or valid.
#[no_mangle]
pub unsafe extern "C" fn isskit_run_example(
    id: *const c_char,
    out_dir: *const c_char,
    seed: u64,
    n_interior: usize,
    verdict: *mut bool,
    report_json: *mut *mut c_char,
) -> IsskitStatus {
    guard(|| {
        let id = str_arg(id, "id")?;
        let dir = str_arg(out_dir, "out_dir")?;
        let verdict = out_ref(verdict, "verdict")?;
        let cfg = ExampleConfig { n_interior, seed, ..Default::default() };
        let mut rep = match id {
            "counterexample" => run_counterexample(&CounterexampleParams::default())?,
            "neumann-hurwitz" => {
                run_neumann_hurwitz(&NeumannParams::new(vec![vec![-1.0, 0.5], vec![0.0, -2.0]], 1.0), &cfg)?
            }
            "semilinear-energy" => run_semilinear_energy(&SemilinearParams::default(), &cfg)?,
            "coupled-linear" => run_coupled_linear(&CoupledLinearParams::default(), &cfg)?,
            "coupled-nonlinear" => run_coupled_nonlinear(&CoupledNonlinearParams::default(), &cfg)?,
            other => return Err(Fail(IsskitStatus::InvalidArgument, format!("unknown example `{other}`"))),
        };
        rep.write(Path::new(dir))?;
        *verdict = rep.verdict;
        if let Some(out) = report_json.as_mut() {
            *out = to_c_string(json(&rep)?);
        }
        Ok(())
    })
}
