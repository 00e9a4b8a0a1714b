//! C ABI for the simulation pipeline.  All entry points are panic-safe,
//! return status codes, and communicate details through a thread-local
//! error message retrievable with `gqme_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use gqme_lab::config::RunConfig;
use gqme_lab::gqme::{ergodic_average, qc_thermal_benchmark};
use gqme_lab::model::{build_bath, MappingKind, ModelSpec};
use gqme_lab::pipeline::run_pipeline;
use gqme_lab::Error;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GqmeStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidConfig = 2,
    Instability = 3,
    DegenerateStationary = 4,
    RuntimeError = 5,
}

/// Opaque handle to a loaded run configuration.
pub struct GqmeConfig {
    inner: RunConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: Vec<u8> = msg.bytes().filter(|&b| b != 0).collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn status_for(err: &Error) -> GqmeStatus {
    match err {
        Error::Config(_) | Error::InvalidSpec(_) => GqmeStatus::InvalidConfig,
        Error::TrajectoryBlowup { .. } | Error::Instability { .. } => GqmeStatus::Instability,
        Error::DegenerateStationary(_) => GqmeStatus::DegenerateStationary,
        _ => GqmeStatus::RuntimeError,
    }
}

fn guarded(f: impl FnOnce() -> GqmeStatus) -> GqmeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            GqmeStatus::RuntimeError
        }
    }
}

unsafe fn cstr_path(ptr: *const c_char) -> Result<PathBuf, GqmeStatus> {
    if ptr.is_null() {
        set_error("null path");
        return Err(GqmeStatus::NullArgument);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(GqmeStatus::InvalidConfig)
        }
    }
}

/// Copy the message of the last error on this thread into `buf`
/// (NUL-terminated, truncated to `cap` bytes).  Returns the full message
/// length in bytes, excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn gqme_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gqme_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parse and validate a TOML run configuration.  Returns NULL on failure;
/// inspect `gqme_last_error`.  Free with `gqme_config_free`.
#[no_mangle]
pub unsafe extern "C" fn gqme_config_load(path: *const c_char) -> *mut GqmeConfig {
    let mut out: *mut GqmeConfig = std::ptr::null_mut();
    guarded(|| {
        let path = match cstr_path(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match RunConfig::from_path(&path) {
            Ok(cfg) => {
                out = Box::into_raw(Box::new(GqmeConfig { inner: cfg }));
                GqmeStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_for(&e)
            }
        }
    });
    out
}

/// Release a configuration handle.  NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn gqme_config_free(cfg: *mut GqmeConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Execute the full pipeline for a loaded configuration.  `output_dir` may
/// be NULL to use the directory from the configuration file.
#[no_mangle]
pub unsafe extern "C" fn gqme_run(
    cfg: *const GqmeConfig,
    output_dir: *const c_char,
) -> GqmeStatus {
    guarded(|| {
        if cfg.is_null() {
            set_error("null config handle");
            return GqmeStatus::NullArgument;
        }
        let dir = if output_dir.is_null() {
            None
        } else {
            match cstr_path(output_dir) {
                Ok(p) => Some(p),
                Err(s) => return s,
            }
        };
        match run_pipeline(&(*cfg).inner, dir.as_deref().map(Path::new)) {
            Ok(_) => GqmeStatus::Ok,
            Err(e) => {
                set_error(&e.to_string());
                status_for(&e)
            }
        }
    })
}

fn spec_from_args(
    delta: f64,
    eps: f64,
    xi: f64,
    omega_c: f64,
    beta: f64,
    f_modes: u32,
) -> ModelSpec {
    ModelSpec {
        delta,
        eps,
        xi,
        omega_c,
        beta,
        f_modes: f_modes as usize,
        mass: 1.0,
    }
}

fn population_common(
    spec: ModelSpec,
    out: *mut f64,
    eval: impl FnOnce(&ModelSpec) -> Result<f64, Error>,
) -> GqmeStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return GqmeStatus::NullArgument;
        }
        if let Err(e) = spec.validate() {
            set_error(&e.to_string());
            return status_for(&e);
        }
        match eval(&spec) {
            Ok(v) => {
                unsafe { *out = v };
                GqmeStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_for(&e)
            }
        }
    })
}

/// Equilibrium upper-state population from the canonical phase-space average
/// of the mapped Hamiltonian.  `spin_mapping` selects the method: 0 for
/// mean-field (unit sphere), nonzero for the W-sphere of radius sqrt(3).
#[no_mangle]
pub unsafe extern "C" fn gqme_ergodic_population(
    delta: f64,
    eps: f64,
    xi: f64,
    omega_c: f64,
    beta: f64,
    f_modes: u32,
    spin_mapping: i32,
    out: *mut f64,
) -> GqmeStatus {
    let kind = if spin_mapping != 0 {
        MappingKind::SpinW
    } else {
        MappingKind::Ehrenfest
    };
    population_common(
        spec_from_args(delta, eps, xi, omega_c, beta, f_modes),
        out,
        |spec| {
            let bath = build_bath(spec)?;
            ergodic_average(spec, &bath, kind)
        },
    )
}

/// Quantum-classical equilibrium upper-state population from the
/// one-dimensional reaction-coordinate integral.
#[no_mangle]
pub unsafe extern "C" fn gqme_thermal_population(
    delta: f64,
    eps: f64,
    xi: f64,
    omega_c: f64,
    beta: f64,
    f_modes: u32,
    out: *mut f64,
) -> GqmeStatus {
    population_common(
        spec_from_args(delta, eps, xi, omega_c, beta, f_modes),
        out,
        |spec| {
            let bath = build_bath(spec)?;
            qc_thermal_benchmark(spec, &bath)
        },
    )
}
