//! C interface to `kms_stationary`.
//!
//! A model is created from a JSON config with `kms_model_from_json` and released with
//! `kms_model_free`. Every fallible call returns a `KmsStatus`; on failure the message is
//! available from `kms_last_error` on the same thread. Matrices cross the boundary as two
//! row-major `double` arrays (real and imaginary parts) of length `dim * dim`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kms_stationary::experiment::{Experiment, ExperimentConfig};
use kms_stationary::generator::{LindbladGenerator, Superoperator};
use kms_stationary::linalg::{self, CMat};
use kms_stationary::{evolve, verify, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KmsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InvalidArgument = 4,
    Computation = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Opaque handle holding the exact and truncated generators of one config.
pub struct KmsModel {
    experiment: Experiment,
    exact: Superoperator,
    truncated: Superoperator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: KmsStatus, msg: impl Into<String>) -> KmsStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> KmsStatus {
    let status = match e {
        Error::Config { .. } | Error::Json(_) | Error::Parse(_) => KmsStatus::InvalidConfig,
        Error::Parameter(_) | Error::Size(_) => KmsStatus::InvalidArgument,
        _ => KmsStatus::Computation,
    };
    fail(status, e.to_string())
}

/// Run `f`, turning panics into `KmsStatus::Panic`.
fn guard(f: impl FnOnce() -> KmsStatus) -> KmsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(KmsStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn model_ref<'a>(model: *const KmsModel) -> Result<&'a KmsModel, KmsStatus> {
    model
        .as_ref()
        .ok_or_else(|| fail(KmsStatus::NullPointer, "model handle is null"))
}

fn check_out<T>(p: *mut T) -> Result<(), KmsStatus> {
    if p.is_null() {
        Err(fail(KmsStatus::NullPointer, "output pointer is null"))
    } else {
        Ok(())
    }
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

impl KmsModel {
    fn generator(&self, truncated: c_int) -> (&LindbladGenerator, &Superoperator) {
        if truncated != 0 {
            (&self.experiment.truncated, &self.truncated)
        } else {
            (&self.experiment.exact, &self.exact)
        }
    }

    fn dim(&self) -> usize {
        self.experiment.spectrum.dim()
    }
}

unsafe fn write_matrix(m: &CMat, re: *mut f64, im: *mut f64, len: usize) -> Result<(), KmsStatus> {
    check_out(re)?;
    check_out(im)?;
    let (r, c) = m.shape();
    if len < r * c {
        return Err(fail(
            KmsStatus::BufferTooSmall,
            format!("buffer holds {len} entries, {} needed", r * c),
        ));
    }
    let re = std::slice::from_raw_parts_mut(re, r * c);
    let im = std::slice::from_raw_parts_mut(im, r * c);
    for i in 0..r {
        for j in 0..c {
            re[i * c + j] = m[(i, j)].re;
            im[i * c + j] = m[(i, j)].im;
        }
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn kms_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Build a model from a JSON config (see the command-line `--help` for the fields).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kms_model_from_json(json: *const c_char, out: *mut *mut KmsModel) -> KmsStatus {
    guard(|| {
        if json.is_null() {
            return fail(KmsStatus::NullPointer, "json is null");
        }
        tri!(check_out(out));
        *out = ptr::null_mut();
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(e) => return fail(KmsStatus::InvalidUtf8, e.to_string()),
        };
        let build = || -> kms_stationary::Result<KmsModel> {
            let cfg = ExperimentConfig::from_json_str(text)?;
            let experiment = Experiment::build(&cfg)?;
            let (exact, truncated) = experiment.superoperators()?;
            Ok(KmsModel {
                experiment,
                exact,
                truncated,
            })
        };
        match build() {
            Ok(m) => {
                *out = Box::into_raw(Box::new(m));
                KmsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `model` must come from `kms_model_from_json` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn kms_model_free(model: *mut KmsModel) {
    if !model.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(model))));
    }
}

/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn kms_model_dim(model: *const KmsModel, out: *mut usize) -> KmsStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        tri!(check_out(out));
        *out = m.dim();
        KmsStatus::Ok
    })
}

/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn kms_model_num_jumps(model: *const KmsModel, out: *mut usize) -> KmsStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        tri!(check_out(out));
        *out = m.experiment.proposals.len();
        KmsStatus::Ok
    })
}

/// Energy bound `S` (half period of the target function).
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn kms_model_energy_bound(model: *const KmsModel, out: *mut f64) -> KmsStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        tri!(check_out(out));
        *out = m.experiment.spectrum.energy_bound();
        KmsStatus::Ok
    })
}

/// Truncation orders `M` and `M'`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kms_model_truncation(
    model: *const KmsModel,
    m: *mut usize,
    m_prime: *mut usize,
) -> KmsStatus {
    guard(|| {
        let md = tri!(model_ref(model));
        tri!(check_out(m));
        tri!(check_out(m_prime));
        *m = md.experiment.truncation.m;
        *m_prime = md.experiment.truncation.m_prime;
        KmsStatus::Ok
    })
}

/// Eigenvalues of `H` in ascending order; `len >= dim`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn kms_model_eigenvalues(model: *const KmsModel, buf: *mut f64, len: usize) -> KmsStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        tri!(check_out(buf));
        let e = m.experiment.spectrum.eigenvalues();
        if len < e.len() {
            return fail(KmsStatus::BufferTooSmall, format!("need {} entries", e.len()));
        }
        std::slice::from_raw_parts_mut(buf, e.len()).copy_from_slice(e);
        KmsStatus::Ok
    })
}

/// Target state `σ` with unit trace.
///
/// # Safety
/// `re` and `im` must hold `len` doubles each.
#[no_mangle]
pub unsafe extern "C" fn kms_model_sigma(model: *const KmsModel, re: *mut f64, im: *mut f64, len: usize) -> KmsStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        tri!(write_matrix(&m.experiment.exact.sigma(), re, im, len));
        KmsStatus::Ok
    })
}

/// Jump operator `index` of the exact (`truncated == 0`) or truncated generator.
///
/// # Safety
/// `re` and `im` must hold `len` doubles each.
#[no_mangle]
pub unsafe extern "C" fn kms_model_jump(
    model: *const KmsModel,
    index: usize,
    truncated: c_int,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> KmsStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        let (gen, _) = m.generator(truncated);
        let Some(l) = gen.jumps().get(index) else {
            return fail(KmsStatus::InvalidArgument, format!("jump index {index} out of range"));
        };
        tri!(write_matrix(l, re, im, len));
        KmsStatus::Ok
    })
}

/// Detailed-balance residual `‖σ^{-1/2} L σ^{1/2} - L†‖` of one jump.
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn kms_model_kms_residual(
    model: *const KmsModel,
    index: usize,
    truncated: c_int,
    out: *mut f64,
) -> KmsStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        tri!(check_out(out));
        let (gen, _) = m.generator(truncated);
        let Some(l) = gen.jumps().get(index) else {
            return fail(KmsStatus::InvalidArgument, format!("jump index {index} out of range"));
        };
        match verify::check_kms_condition(l, gen.state()) {
            Ok(r) => {
                *out = r;
                KmsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// `‖L(σ)‖_F / ‖L‖_F`
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn kms_model_stationarity_residual(
    model: *const KmsModel,
    truncated: c_int,
    out: *mut f64,
) -> KmsStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        tri!(check_out(out));
        let (gen, sup) = m.generator(truncated);
        *out = verify::stationarity_residual(sup, &gen.sigma());
        KmsStatus::Ok
    })
}

/// `e^{tL}(ρ)` for a density matrix given and returned as row-major real/imaginary parts.
///
/// # Safety
/// Input and output arrays must hold `len` doubles each.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn kms_model_propagate(
    model: *const KmsModel,
    rho_re: *const f64,
    rho_im: *const f64,
    len: usize,
    t: f64,
    truncated: c_int,
    out_re: *mut f64,
    out_im: *mut f64,
) -> KmsStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        if rho_re.is_null() || rho_im.is_null() {
            return fail(KmsStatus::NullPointer, "input state is null");
        }
        let d = m.dim();
        if len < d * d {
            return fail(KmsStatus::BufferTooSmall, format!("need {} entries", d * d));
        }
        let re = std::slice::from_raw_parts(rho_re, d * d);
        let im = std::slice::from_raw_parts(rho_im, d * d);
        let rho = CMat::from_fn(d, d, |i, j| linalg::c(re[i * d + j], im[i * d + j]));
        let (_, sup) = m.generator(truncated);
        match evolve::propagate(sup, &rho, t) {
            Ok(out) => {
                tri!(write_matrix(&out, out_re, out_im, len));
                KmsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Full verification report as a JSON string; release it with `kms_string_free`.
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn kms_model_verify_json(model: *const KmsModel, out: *mut *mut c_char) -> KmsStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        tri!(check_out(out));
        *out = ptr::null_mut();
        let manifest = m.experiment.config.manifest("ffi-verify");
        let report = match m.experiment.verify(&manifest) {
            Ok(r) => r,
            Err(e) => return from_error(e),
        };
        let checks: Vec<_> = report
            .checks()
            .into_iter()
            .map(|c| serde_json::json!({"name": c.name, "value": c.value, "limit": c.limit, "pass": c.pass}))
            .collect();
        let info: serde_json::Map<_, _> = report
            .info
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect();
        let doc = serde_json::json!({
            "manifest": report.manifest,
            "pass": report.pass(),
            "info": info,
            "checks": checks,
        });
        match CString::new(doc.to_string()) {
            Ok(s) => {
                *out = s.into_raw();
                KmsStatus::Ok
            }
            Err(e) => fail(KmsStatus::Computation, e.to_string()),
        }
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn kms_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

