//! C ABI for circkde.
//!
//! Every fallible function returns a [`CkStatus`]; on failure a message is
//! available from [`ck_last_error_message`] on the same thread. Samples are
//! opaque handles released with [`ck_sample_free`]. Strings returned through
//! `char **` are released with [`ck_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use circkde::estimators::{CircularSample, KernelDensity};
use circkde::kernels::{bandwidth_h, FourierTruncation, KernelFamily, KernelSpec};
use circkde::selectors::{select, Method, SelectorConfig, SmoothingSelection};
use circkde::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Unsupported = 3,
    ToleranceNotMet = 4,
    NoBracket = 5,
    FitFailed = 6,
    Parse = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkKernel {
    VonMises = 0,
    WrappedNormal = 1,
    WrappedCauchy = 2,
    WrappedEpanechnikov = 3,
    Cardioid = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkMethod {
    Rt = 0,
    Dpi = 1,
    Ste = 2,
    Lcv = 3,
}

/// Selector options; start from [`ck_selector_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CkSelectorOptions {
    pub kernel: CkKernel,
    pub pilot: CkKernel,
    pub deriv_order: u32,
    pub nstage: u32,
    pub m_max: u32,
    pub exact_inversion: bool,
    pub seed: u64,
}

/// A selected smoothing parameter. `kappa_or_lambda` is NaN when the
/// kernel has no native parameter or the uniform kernel was chosen.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CkSelection {
    pub nu: f64,
    pub h: f64,
    pub kappa_or_lambda: f64,
    pub fallback_uniform: bool,
}

/// Opaque sample of angles.
pub struct CkSample(CircularSample);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CkStatus {
    match e {
        Error::Domain(_) => CkStatus::InvalidArgument,
        Error::Capability(_) => CkStatus::Unsupported,
        Error::ToleranceNotMet { .. } => CkStatus::ToleranceNotMet,
        Error::NoBracket { .. } => CkStatus::NoBracket,
        Error::FitFailed(_) => CkStatus::FitFailed,
        Error::Parse { .. } => CkStatus::Parse,
        Error::Io(_) => CkStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CkStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CkStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CkStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CkStatus::Panic
        }
    }
}

fn nonnull<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: caller contract is a valid pointer or null
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

fn nonnull_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: caller contract is a valid pointer or null
    unsafe { p.as_mut() }.ok_or(Failure::Null(what))
}

fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    nonnull(p, what)?;
    // SAFETY: non-null and the caller guarantees `len` readable elements
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn family(k: CkKernel) -> KernelFamily {
    match k {
        CkKernel::VonMises => KernelFamily::VonMises,
        CkKernel::WrappedNormal => KernelFamily::WrappedNormal,
        CkKernel::WrappedCauchy => KernelFamily::WrappedCauchy,
        CkKernel::WrappedEpanechnikov => KernelFamily::WrappedEpanechnikov,
        CkKernel::Cardioid => KernelFamily::Cardioid,
    }
}

fn method(m: CkMethod) -> Method {
    match m {
        CkMethod::Rt => Method::Rt,
        CkMethod::Dpi => Method::Dpi,
        CkMethod::Ste => Method::Ste,
        CkMethod::Lcv => Method::Lcv,
    }
}

impl CkSelectorOptions {
    fn config(&self) -> SelectorConfig {
        SelectorConfig {
            kernel: family(self.kernel),
            pilot: family(self.pilot),
            r: self.deriv_order as usize,
            nstage: self.nstage as usize,
            m_max: self.m_max as usize,
            exact_inversion: self.exact_inversion,
            seed: self.seed,
            ..SelectorConfig::default()
        }
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ck_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ck_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `n` angles (radians, wrapped to `[-pi, pi)`) into a new sample.
///
/// # Safety
/// `angles` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_sample_new(
    angles: *const f64,
    n: usize,
    out: *mut *mut CkSample,
) -> CkStatus {
    guard(|| {
        let out = nonnull_mut(out, "out")?;
        let angles = slice(angles, n, "angles")?;
        let sample = CircularSample::new(angles.iter().copied())?;
        *out = Box::into_raw(Box::new(CkSample(sample)));
        Ok(())
    })
}

/// Releases a sample; NULL is ignored.
///
/// # Safety
/// `sample` must come from [`ck_sample_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ck_sample_free(sample: *mut CkSample) {
    if !sample.is_null() {
        // SAFETY: pointer came from Box::into_raw in ck_sample_new
        drop(unsafe { Box::from_raw(sample) });
    }
}

/// Number of observations, or 0 for NULL.
///
/// # Safety
/// `sample` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_sample_len(sample: *const CkSample) -> usize {
    // SAFETY: caller contract
    unsafe { sample.as_ref() }.map_or(0, |s| s.0.len())
}

/// Defaults: von Mises kernel and pilot, density (order 0), two stages,
/// single-component reference, asymptotic inversion, seed 0.
#[no_mangle]
pub extern "C" fn ck_selector_options_default() -> CkSelectorOptions {
    CkSelectorOptions {
        kernel: CkKernel::VonMises,
        pilot: CkKernel::VonMises,
        deriv_order: 0,
        nstage: 2,
        m_max: 1,
        exact_inversion: false,
        seed: 0,
    }
}

fn run_select(
    sample: *const CkSample,
    m: CkMethod,
    options: *const CkSelectorOptions,
) -> Result<SmoothingSelection, Failure> {
    let sample = nonnull(sample, "sample")?;
    let cfg = match nonnull(options, "options") {
        Ok(o) => o.config(),
        Err(_) => ck_selector_options_default().config(),
    };
    Ok(select(&sample.0, method(m), &cfg)?)
}

/// Runs a selector. `options` may be NULL for defaults.
///
/// # Safety
/// `sample` must be a live handle, `options` NULL or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ck_select(
    sample: *const CkSample,
    method: CkMethod,
    options: *const CkSelectorOptions,
    out: *mut CkSelection,
) -> CkStatus {
    guard(|| {
        let out = nonnull_mut(out, "out")?;
        let sel = run_select(sample, method, options)?;
        *out = CkSelection {
            nu: sel.nu,
            h: sel.h,
            kappa_or_lambda: sel.kappa_or_lambda.unwrap_or(f64::NAN),
            fallback_uniform: sel.fallback_uniform,
        };
        Ok(())
    })
}

/// Runs a selector and returns the full selection, including its trace, as
/// a JSON string to be released with [`ck_string_free`].
///
/// # Safety
/// As [`ck_select`]; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_select_json(
    sample: *const CkSample,
    method: CkMethod,
    options: *const CkSelectorOptions,
    out_json: *mut *mut c_char,
) -> CkStatus {
    guard(|| {
        let out = nonnull_mut(out_json, "out_json")?;
        let sel = run_select(sample, method, options)?;
        let text = serde_json::to_string(&sel).map_err(|e| Error::Io(e.to_string()))?;
        *out = CString::new(text).expect("json has no nul").into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library; NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ck_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: pointer came from CString::into_raw
        drop(unsafe { CString::from_raw(s) });
    }
}

/// `h_K(nu)`, the circular second moment of the kernel.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_bandwidth_h(kernel: CkKernel, nu: f64, out: *mut f64) -> CkStatus {
    guard(|| {
        let out = nonnull_mut(out, "out")?;
        let k = KernelSpec::new(family(kernel), nu)?;
        *out = bandwidth_h(&k, &FourierTruncation::default())?;
        Ok(())
    })
}

/// Evaluates the `deriv_order`-th derivative of the kernel density estimate
/// at `m` angles.
///
/// # Safety
/// `thetas` must hold `m` readable doubles and `out` `m` writable ones.
#[no_mangle]
pub unsafe extern "C" fn ck_kde(
    sample: *const CkSample,
    kernel: CkKernel,
    nu: f64,
    deriv_order: u32,
    thetas: *const f64,
    m: usize,
    out: *mut f64,
) -> CkStatus {
    guard(|| {
        let sample = nonnull(sample, "sample")?;
        let thetas = slice(thetas, m, "thetas")?;
        if m > 0 {
            nonnull_mut(out, "out")?;
        }
        let k = KernelSpec::new(family(kernel), nu)?;
        let est = KernelDensity::new(
            &sample.0,
            &k,
            deriv_order as usize,
            &FourierTruncation::default(),
        )?;
        for (i, &t) in thetas.iter().enumerate() {
            // SAFETY: non-null and the caller guarantees `m` writable slots
            unsafe { *out.add(i) = est.value(t) };
        }
        Ok(())
    })
}

/// Name of a status code as a static string.
#[no_mangle]
pub extern "C" fn ck_status_name(status: CkStatus) -> *const c_char {
    let s: &'static CStr = match status {
        CkStatus::Ok => c"ok",
        CkStatus::NullPointer => c"null_pointer",
        CkStatus::InvalidArgument => c"invalid_argument",
        CkStatus::Unsupported => c"unsupported",
        CkStatus::ToleranceNotMet => c"tolerance_not_met",
        CkStatus::NoBracket => c"no_bracket",
        CkStatus::FitFailed => c"fit_failed",
        CkStatus::Parse => c"parse",
        CkStatus::Io => c"io",
        CkStatus::Panic => c"panic",
    };
    s.as_ptr()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes_are_stable() {
        assert_eq!(CkStatus::Ok as i32, 0);
        assert_eq!(
            status_of(&Error::Capability("x".into())),
            CkStatus::Unsupported
        );
        assert_eq!(
            status_of(&Error::Parse {
                line: 1,
                message: String::new()
            }),
            CkStatus::Parse
        );
    }

    #[test]
    fn guard_records_messages() {
        assert_eq!(guard(|| Err(Failure::Null("p"))), CkStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(ck_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("p"));
        assert_eq!(guard(|| Ok(())), CkStatus::Ok);
        assert!(ck_last_error_message().is_null());
    }
}
