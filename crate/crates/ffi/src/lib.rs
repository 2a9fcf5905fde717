//! C ABI over the `macfcs` toolkit.
//!
//! Objects cross the boundary as opaque handles created by `*_from_json` or
//! `macfcs_check_*` and released with the matching `*_free`. Every fallible
//! function returns a [`MacfcsStatus`]; on failure a message is available from
//! [`macfcs_last_error`] on the same thread. Strings returned to the caller
//! are owned by the caller and released with [`macfcs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use macfcs::model::{build_cf_joint, build_df_joint, source_stats, CfInput, Channel, DfInput, SourcePair};
use macfcs::optimizer::{search, SearchConfig, Strategy};
use macfcs::regions::{
    cf_constraints_with, df_constraints_with, mac_sum_capacity, system_feasible, FeasibilityReport,
    RateConstraintSystem, Tolerances,
};
use macfcs::Error;

/// Selects decode-forward in [`macfcs_optimize`].
pub const MACFCS_STRATEGY_DF: c_int = 0;
/// Selects compress-forward in [`macfcs_optimize`].
pub const MACFCS_STRATEGY_CF: c_int = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacfcsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArg = 1,
    /// A string argument was not valid UTF-8.
    Utf8 = 2,
    /// A JSON document could not be parsed.
    Parse = 3,
    /// Input was well-formed but violated a model constraint.
    Validation = 4,
    /// An internal panic was caught at the boundary.
    Panic = 5,
}

/// Three-node channel law.
pub struct MacfcsChannel(Channel);

/// Correlated source pair.
pub struct MacfcsSource(SourcePair);

/// Feasibility report of one candidate.
pub struct MacfcsReport(FeasibilityReport);

/// Entropy statistics of a source pair, in bits.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MacfcsSourceStats {
    pub h_s1: f64,
    pub h_s2: f64,
    pub h_s1_given_s2: f64,
    pub h_s2_given_s1: f64,
    pub h_joint: f64,
    pub i_s1_s2: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(MacfcsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Json(_) => MacfcsStatus::Parse,
            _ => MacfcsStatus::Validation,
        };
        Fail(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MacfcsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MacfcsStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal panic: {msg}"));
            MacfcsStatus::Panic
        }
    }
}

fn null(name: &str) -> Fail {
    Fail(MacfcsStatus::NullArg, format!("`{name}` is null"))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(MacfcsStatus::Utf8, format!("`{name}` is not valid UTF-8")))
}

/// # Safety
/// `p` must be null or point to a live `T`.
unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(name))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message describing the last failure on this thread, or an empty string.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn macfcs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn macfcs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a pointer returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn macfcs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a channel document into a new handle.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn macfcs_channel_from_json(json: *const c_char, out: *mut *mut MacfcsChannel) -> MacfcsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ch = Channel::load(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(MacfcsChannel(ch)));
        Ok(())
    })
}

/// # Safety
/// `ch` must be null or a handle from [`macfcs_channel_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn macfcs_channel_free(ch: *mut MacfcsChannel) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

/// Sum capacity of the destination link over cooperative inputs, in bits.
///
/// # Safety
/// `ch` must be a live channel handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn macfcs_mac_sum_capacity(ch: *const MacfcsChannel, out: *mut f64) -> MacfcsStatus {
    guard(|| {
        let ch = borrow(ch, "ch")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = mac_sum_capacity(&ch.0)?;
        Ok(())
    })
}

/// Parses a source document into a new handle.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn macfcs_source_from_json(json: *const c_char, out: *mut *mut MacfcsSource) -> MacfcsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let src = SourcePair::load(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(MacfcsSource(src)));
        Ok(())
    })
}

/// # Safety
/// `src` must be null or a handle from [`macfcs_source_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn macfcs_source_free(src: *mut MacfcsSource) {
    if !src.is_null() {
        drop(Box::from_raw(src));
    }
}

/// # Safety
/// `src` must be a live source handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn macfcs_source_stats(src: *const MacfcsSource, out: *mut MacfcsSourceStats) -> MacfcsStatus {
    guard(|| {
        let src = borrow(src, "src")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let st = source_stats(&src.0);
        *out = MacfcsSourceStats {
            h_s1: st.h_s1,
            h_s2: st.h_s2,
            h_s1_given_s2: st.h_s1_given_s2,
            h_s2_given_s1: st.h_s2_given_s1,
            h_joint: st.h_joint,
            i_s1_s2: st.i_s1_s2,
        };
        Ok(())
    })
}

unsafe fn check(
    ch: *const MacfcsChannel,
    src: *const MacfcsSource,
    candidate: *const c_char,
    out: *mut *mut MacfcsReport,
    strategy: Strategy,
) -> MacfcsStatus {
    guard(|| {
        let ch = borrow(ch, "ch")?;
        let src = borrow(src, "src")?;
        let doc = text(candidate, "candidate")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let st = source_stats(&src.0);
        let tol = Tolerances::default();
        let report = match strategy {
            Strategy::Df => df_constraints_with(&build_df_joint(&ch.0, &DfInput::load(doc)?)?, &st, &tol)?,
            Strategy::Cf => cf_constraints_with(&build_cf_joint(&ch.0, &CfInput::load(doc)?)?, &st, &tol)?,
        };
        *out = Box::into_raw(Box::new(MacfcsReport(report)));
        Ok(())
    })
}

/// Evaluates the decode-forward conditions for a candidate document.
///
/// # Safety
/// `ch` and `src` must be live handles, `candidate` a valid NUL-terminated
/// string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn macfcs_check_df(
    ch: *const MacfcsChannel,
    src: *const MacfcsSource,
    candidate: *const c_char,
    out: *mut *mut MacfcsReport,
) -> MacfcsStatus {
    check(ch, src, candidate, out, Strategy::Df)
}

/// Evaluates the compress-forward conditions for a candidate document.
///
/// # Safety
/// Same contract as [`macfcs_check_df`].
#[no_mangle]
pub unsafe extern "C" fn macfcs_check_cf(
    ch: *const MacfcsChannel,
    src: *const MacfcsSource,
    candidate: *const c_char,
    out: *mut *mut MacfcsReport,
) -> MacfcsStatus {
    check(ch, src, candidate, out, Strategy::Cf)
}

/// # Safety
/// `report` must be null or a handle from a `macfcs_check_*` call not yet freed.
#[no_mangle]
pub unsafe extern "C" fn macfcs_report_free(report: *mut MacfcsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// 1 if every constraint holds (and independence, for compress-forward), else 0.
/// Returns -1 for a null handle.
///
/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn macfcs_report_feasible(report: *const MacfcsReport) -> c_int {
    match report.as_ref() {
        Some(r) => c_int::from(r.0.feasible),
        None => -1,
    }
}

/// Smallest margin over non-vacuous constraints; +infinity when all are vacuous.
///
/// # Safety
/// `report` must be a live report handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn macfcs_report_min_margin(report: *const MacfcsReport, out: *mut f64) -> MacfcsStatus {
    guard(|| {
        let r = borrow(report, "report")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = r.0.min_margin;
        Ok(())
    })
}

/// Margin of the constraint with the given label (e.g. "1a").
///
/// # Safety
/// `report` must be a live report handle, `label` a valid NUL-terminated
/// string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn macfcs_report_margin(
    report: *const MacfcsReport,
    label: *const c_char,
    out: *mut f64,
) -> MacfcsStatus {
    guard(|| {
        let r = borrow(report, "report")?;
        let label = text(label, "label")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = r
            .0
            .get(label)
            .ok_or_else(|| Fail(MacfcsStatus::Validation, format!("no constraint labeled `{label}`")))?;
        *out = c.margin;
        Ok(())
    })
}

/// Report as a JSON string; release with [`macfcs_string_free`].
///
/// # Safety
/// `report` must be a live report handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn macfcs_report_to_json(report: *const MacfcsReport, out: *mut *mut c_char) -> MacfcsStatus {
    guard(|| {
        let r = borrow(report, "report")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = into_c_string(r.0.to_json_string());
        Ok(())
    })
}

/// Searches auxiliary distributions. `config_json` may be null for defaults;
/// otherwise it is a search configuration object (`restarts`, `seed`,
/// `cards`, ...). Writes the result JSON to `out_json` and 1 or 0 to
/// `out_feasible`.
///
/// # Safety
/// `ch` and `src` must be live handles, `config_json` null or a valid
/// NUL-terminated string, and both out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn macfcs_optimize(
    ch: *const MacfcsChannel,
    src: *const MacfcsSource,
    strategy: c_int,
    config_json: *const c_char,
    out_feasible: *mut c_int,
    out_json: *mut *mut c_char,
) -> MacfcsStatus {
    guard(|| {
        let ch = borrow(ch, "ch")?;
        let src = borrow(src, "src")?;
        if out_feasible.is_null() || out_json.is_null() {
            return Err(null("out"));
        }
        let strategy = match strategy {
            MACFCS_STRATEGY_DF => Strategy::Df,
            MACFCS_STRATEGY_CF => Strategy::Cf,
            other => return Err(Fail(MacfcsStatus::Validation, format!("unknown strategy {other}"))),
        };
        let cfg: SearchConfig = if config_json.is_null() {
            SearchConfig::default()
        } else {
            serde_json::from_str(text(config_json, "config_json")?).map_err(Error::from)?
        };
        let r = search(strategy, &ch.0, &source_stats(&src.0), &cfg)?;
        *out_feasible = c_int::from(r.feasible);
        *out_json = into_c_string(r.to_json_string());
        Ok(())
    })
}

/// Decides a linear rate system by Fourier-Motzkin elimination. Writes 1 or 0
/// to `out_feasible` and the verdict JSON (with witness) to `out_json`.
///
/// # Safety
/// `system_json` must be a valid NUL-terminated string and both out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn macfcs_system_feasible(
    system_json: *const c_char,
    out_feasible: *mut c_int,
    out_json: *mut *mut c_char,
) -> MacfcsStatus {
    guard(|| {
        if out_feasible.is_null() || out_json.is_null() {
            return Err(null("out"));
        }
        let sys = RateConstraintSystem::load(text(system_json, "system_json")?)?;
        let v = system_feasible(&sys);
        *out_feasible = c_int::from(v.feasible);
        *out_json = into_c_string(serde_json::to_string_pretty(&v).map_err(Error::from)?);
        Ok(())
    })
}
