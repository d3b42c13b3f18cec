//! C ABI for `fellgeom`.
//!
//! Models are opaque handles created by [`fg_model_load`] or
//! [`fg_model_from_toml`] and released with [`fg_model_free`]. Every fallible
//! call returns an [`FgStatus`]; on failure the message is available from
//! [`fg_last_error`] on the same thread. Strings returned through out
//! parameters are owned by the caller and must be released with
//! [`fg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fellgeom::cli::{load_config_text, parse_config, Model};
use fellgeom::triple::{spectral_action, SpectralFunction};
use fellgeom::Error;

/// Result codes shared by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Unknown config name, unreadable file, or malformed TOML.
    Config = 3,
    /// The config parsed but describes an inconsistent geometry.
    Geometry = 4,
    /// A numerical routine rejected its input.
    Numerical = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Loaded geometry. Opaque to C.
pub struct FgModel {
    inner: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> FgStatus {
    match e {
        Error::Config(_) | Error::Io(_) => FgStatus::Config,
        Error::Geometry(_)
        | Error::Representation(_)
        | Error::RealStructure(_)
        | Error::InconsistentPattern(_)
        | Error::InvalidState(_)
        | Error::EmptyStateSet => FgStatus::Geometry,
        _ => FgStatus::Numerical,
    }
}

/// Run `f`, recording errors and converting panics into [`FgStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), (FgStatus, String)>) -> FgStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FgStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            FgStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (FgStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (FgStatus, String) {
    (FgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (FgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (FgStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn model_ref<'a>(m: *const FgModel) -> Result<&'a Model, (FgStatus, String)> {
    m.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("interior NULs were replaced")
        .into_raw()
}

fn build(text: &str) -> Result<Box<FgModel>, (FgStatus, String)> {
    let config = parse_config(text).map_err(lib_err)?;
    let inner = Model::from_config(config, text).map_err(lib_err)?;
    Ok(Box::new(FgModel { inner }))
}

/// Load a bundled config by name, or a TOML file by path.
///
/// # Safety
/// `name_or_path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fg_model_load(
    name_or_path: *const c_char,
    out: *mut *mut FgModel,
) -> FgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let name = read_str(name_or_path, "name_or_path")?;
        let (_, text) = load_config_text(name).map_err(lib_err)?;
        *out = Box::into_raw(build(&text)?);
        Ok(())
    })
}

/// Build a model from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fg_model_from_toml(
    toml: *const c_char,
    out: *mut *mut FgModel,
) -> FgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = read_str(toml, "toml")?;
        *out = Box::into_raw(build(text)?);
        Ok(())
    })
}

/// Release a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fg_model_free(model: *mut FgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Hilbert space dimension.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fg_model_dimension(model: *const FgModel, out: *mut usize) -> FgStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = m.dirac.nrows();
        Ok(())
    })
}

/// Number of objects of the groupoid.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fg_model_object_count(model: *const FgModel, out: *mut usize) -> FgStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = m.object_ids().len();
        Ok(())
    })
}

/// Copy the Dirac operator in row-major order into `re` and `im`, each of
/// length `len >= dimension²`.
///
/// # Safety
/// `re` and `im` must point to at least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fg_model_dirac(
    model: *const FgModel,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> FgStatus {
    guard(|| {
        let m = model_ref(model)?;
        if re.is_null() || im.is_null() {
            return Err(null("output buffer"));
        }
        let n = m.dirac.nrows();
        if len < n * n {
            return Err((
                FgStatus::BufferTooSmall,
                format!("need {} entries, got {len}", n * n),
            ));
        }
        let re = std::slice::from_raw_parts_mut(re, n * n);
        let im = std::slice::from_raw_parts_mut(im, n * n);
        for i in 0..n {
            for j in 0..n {
                let z = m.dirac[(i, j)];
                re[i * n + j] = z.re;
                im[i * n + j] = z.im;
            }
        }
        Ok(())
    })
}

/// `Tr f(D)` for a spectral function spec: `x2`, `x4`, `poly:c0,c1,...` or
/// `cutoff:L`.
///
/// # Safety
/// `function` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fg_model_spectral_action(
    model: *const FgModel,
    function: *const c_char,
    out: *mut f64,
) -> FgStatus {
    guard(|| {
        let m = model_ref(model)?;
        let spec = read_str(function, "function")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let f: SpectralFunction = spec.parse().map_err(lib_err)?;
        *out = spectral_action(&m.dirac, &f).map_err(lib_err)?;
        Ok(())
    })
}

/// Run the command-line front end in process. `argv` excludes the program
/// name. The report and diagnostics are returned as strings in `out_text`
/// and `err_text` (either may be null to discard), and the process exit code
/// in `exit_code`.
///
/// # Safety
/// `argv` must point to `argc` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn fg_run(
    argv: *const *const c_char,
    argc: usize,
    exit_code: *mut c_int,
    out_text: *mut *mut c_char,
    err_text: *mut *mut c_char,
) -> FgStatus {
    guard(|| {
        let code = exit_code.as_mut().ok_or_else(|| null("exit_code"))?;
        if argv.is_null() && argc > 0 {
            return Err(null("argv"));
        }
        let mut args = vec!["fellgeom".to_string()];
        for i in 0..argc {
            args.push(read_str(*argv.add(i), "argv entry")?.to_string());
        }
        let (mut out, mut err) = (Vec::new(), Vec::new());
        *code = fellgeom::cli::run(args, &mut out, &mut err);
        if let Some(p) = out_text.as_mut() {
            *p = into_c_string(String::from_utf8_lossy(&out).into_owned());
        }
        if let Some(p) = err_text.as_mut() {
            *p = into_c_string(String::from_utf8_lossy(&err).into_owned());
        }
        Ok(())
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn fg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
