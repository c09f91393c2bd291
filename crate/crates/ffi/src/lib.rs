//! C ABI over the llmdrift toolkit.
//!
//! Every function returns an `LdStatus` code; results come back through out
//! pointers. On failure a message is stored per thread and can be read with
//! `ld_last_error`. Corpora and reports are opaque handles released with
//! their `_free` function; strings returned by the library are released
//! with `ld_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use llmdrift::corpus::{load_corpus, Corpus};
use llmdrift::detect::{compare_corpora, render_report, split_sanity_check, AggregateMode, DecisionReport, DetectorConfig, ReportFormat, Verdict};
use llmdrift::features::{annotate_corpus, Feature, Lexicons};
use llmdrift::stats::{chi2_sf, fisher_combine, ks_test};
use llmdrift::Error;

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdStatus {
    Ok = 0,
    NullArg = 1,
    InvalidArg = 2,
    Io = 3,
    Parse = 4,
    InsufficientData = 5,
    UnknownFeature = 6,
    Internal = 99,
}

/// Decision rule for comparisons, passed as its integer value.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdDecision {
    PerFeature = 0,
    Bonferroni = 1,
    Fisher = 2,
}

/// Report rendering format, passed as its integer value.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdFormat {
    Text = 0,
    Csv = 1,
    Json = 2,
}

/// Outcome of a two-sample Kolmogorov-Smirnov test.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LdKsResult {
    pub d_stat: f64,
    pub p_value: f64,
    /// −log2 of `p_value`.
    pub surprisal: f64,
    pub reject: bool,
    /// The p-value was floored because it underflowed.
    pub underflow: bool,
}

/// Outcome of Fisher's combination of p-values.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LdFisherResult {
    pub psi: f64,
    pub dof: u32,
    pub p_value: f64,
    pub surprisal: f64,
    pub underflow: bool,
}

/// Opaque corpus handle.
pub struct LdCorpus(Corpus);

/// Opaque comparison report handle.
pub struct LdReport(DecisionReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> LdStatus {
    if err.is_insufficient_data() {
        return LdStatus::InsufficientData;
    }
    match err {
        Error::Io { .. } => LdStatus::Io,
        Error::MalformedLine { .. }
        | Error::DuplicateId { .. }
        | Error::EmptyText { .. }
        | Error::BadCell { .. }
        | Error::Csv { .. }
        | Error::Lexicon { .. }
        | Error::Json(_) => LdStatus::Parse,
        Error::UnknownFeature { .. } | Error::UnknownCategory { .. } => LdStatus::UnknownFeature,
        Error::InvalidArgument(_) | Error::Config(_) => LdStatus::InvalidArg,
        _ => LdStatus::Internal,
    }
}

struct Fail(LdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LdStatus::NullArg, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(LdStatus::InvalidArg, msg.into())
}

/// Runs `f`, records any error or panic, and converts it to a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            LdStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            LdStatus::Internal
        }
    }
}

unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn string<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

/// Comma-separated feature list; null selects all built-in features.
unsafe fn feature_list(s: *const c_char) -> Result<Vec<String>, Fail> {
    if s.is_null() {
        return Ok(Feature::names().into_iter().map(String::from).collect());
    }
    let list: Vec<String> = string(s, "features")?
        .split(',')
        .map(str::trim)
        .filter(|f| !f.is_empty())
        .map(String::from)
        .collect();
    if list.is_empty() {
        return Err(invalid("feature list is empty"));
    }
    Ok(list)
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn detector(alpha: f64, features: Vec<String>, decision: i32) -> Result<DetectorConfig, Fail> {
    let mode = match decision {
        d if d == LdDecision::PerFeature as i32 => AggregateMode::PerFeature,
        d if d == LdDecision::Bonferroni as i32 => AggregateMode::Bonferroni,
        d if d == LdDecision::Fisher as i32 => AggregateMode::Fisher,
        other => return Err(invalid(format!("unknown decision rule {other}"))),
    };
    let mut cfg = DetectorConfig::default().with_features(features).with_decision(mode);
    cfg.aggregate_modes = vec![mode];
    cfg.alpha = alpha;
    Ok(cfg)
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call into the library on this
/// thread and must not be freed.
#[no_mangle]
pub extern "C" fn ld_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ld_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Two-sample K-S test on raw values. NaN entries are rejected.
///
/// # Safety
/// `xs`/`ys` must point to `n1`/`n2` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ld_ks_two_sample(
    xs: *const f64,
    n1: usize,
    ys: *const f64,
    n2: usize,
    alpha: f64,
    out: *mut LdKsResult,
) -> LdStatus {
    guard(|| {
        let (a, b) = (slice(xs, n1, "xs")?, slice(ys, n2, "ys")?);
        let r = ks_test("values", a.to_vec(), b.to_vec(), alpha)?;
        write(
            out,
            LdKsResult {
                d_stat: r.d_stat,
                p_value: r.p_value,
                surprisal: r.surprisal,
                reject: r.reject,
                underflow: r.underflow,
            },
            "out",
        )
    })
}

/// Fisher's method over `k` p-values in (0, 1].
///
/// # Safety
/// `p_values` must point to `k` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ld_fisher_combine(p_values: *const f64, k: usize, out: *mut LdFisherResult) -> LdStatus {
    guard(|| {
        let r = fisher_combine(slice(p_values, k, "p_values")?)?;
        write(
            out,
            LdFisherResult {
                psi: r.psi,
                dof: r.dof,
                p_value: r.p_value,
                surprisal: r.surprisal,
                underflow: r.underflow,
            },
            "out",
        )
    })
}

/// Chi-square survival function for even degrees of freedom.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ld_chi2_sf(x: f64, dof: u32, out: *mut f64) -> LdStatus {
    guard(|| write(out, chi2_sf(x, dof)?, "out"))
}

/// Loads a JSONL corpus. Items with empty text are an error unless
/// `allow_empty_text` is set.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ld_corpus_load(path: *const c_char, allow_empty_text: bool, out: *mut *mut LdCorpus) -> LdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let c = load_corpus(string(path, "path")?, allow_empty_text)?;
        out.write(Box::into_raw(Box::new(LdCorpus(c))));
        Ok(())
    })
}

/// Number of items in a corpus.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ld_corpus_len(corpus: *const LdCorpus, out: *mut usize) -> LdStatus {
    guard(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        write(out, c.0.len(), "out")
    })
}

/// Annotates the corpus in place with the comma-separated `features`, or
/// with every built-in feature when `features` is null. Uses the bundled
/// lexicons.
///
/// # Safety
/// `corpus` must be a live handle; `features` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ld_corpus_annotate(corpus: *mut LdCorpus, features: *const c_char) -> LdStatus {
    guard(|| {
        let c = corpus.as_mut().ok_or_else(|| null("corpus"))?;
        let list = feature_list(features)?;
        c.0 = annotate_corpus(&c.0, &list, &Lexicons::default())?;
        Ok(())
    })
}

/// Releases a corpus. Null is ignored.
///
/// # Safety
/// `corpus` must come from `ld_corpus_load` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ld_corpus_free(corpus: *mut LdCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Compares two annotated corpora over `features` (null for all built-in
/// features) under the given decision rule.
///
/// # Safety
/// Handles must be live; `features` null or NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ld_compare(
    a: *const LdCorpus,
    b: *const LdCorpus,
    alpha: f64,
    features: *const c_char,
    decision: i32,
    out: *mut *mut LdReport,
) -> LdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = a.as_ref().ok_or_else(|| null("a"))?;
        let b = b.as_ref().ok_or_else(|| null("b"))?;
        let cfg = detector(alpha, feature_list(features)?, decision)?;
        let r = compare_corpora(&a.0, &b.0, &cfg)?;
        out.write(Box::into_raw(Box::new(LdReport(r))));
        Ok(())
    })
}

/// Compares two random halves of one annotated corpus; a healthy source
/// should come out unchanged.
///
/// # Safety
/// `corpus` must be live; `features` null or NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ld_split_check(
    corpus: *const LdCorpus,
    alpha: f64,
    features: *const c_char,
    decision: i32,
    seed: u64,
    out: *mut *mut LdReport,
) -> LdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let cfg = detector(alpha, feature_list(features)?, decision)?;
        let r = split_sanity_check(&c.0, &cfg, seed)?;
        out.write(Box::into_raw(Box::new(LdReport(r))));
        Ok(())
    })
}

/// Writes true to `changed` when the report's decision rule rejected.
///
/// # Safety
/// `report` must be live; `changed` writable.
#[no_mangle]
pub unsafe extern "C" fn ld_report_changed(report: *const LdReport, changed: *mut bool) -> LdStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        write(changed, r.0.verdict == Verdict::Changed, "changed")
    })
}

/// Renders a report. The string must be released with `ld_string_free`.
///
/// # Safety
/// `report` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ld_report_render(report: *const LdReport, format: i32, out: *mut *mut c_char) -> LdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let fmt = match format {
            f if f == LdFormat::Text as i32 => ReportFormat::Text,
            f if f == LdFormat::Csv as i32 => ReportFormat::Csv,
            f if f == LdFormat::Json as i32 => ReportFormat::Json,
            other => return Err(invalid(format!("unknown report format {other}"))),
        };
        let s = CString::new(render_report(&r.0, fmt)).map_err(|_| Fail(LdStatus::Internal, "report contains NUL".into()))?;
        out.write(s.into_raw());
        Ok(())
    })
}

/// Releases a report. Null is ignored.
///
/// # Safety
/// `report` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ld_report_free(report: *mut LdReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
