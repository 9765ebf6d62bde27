//! C ABI for the sqflow calculator. Diagrams and reports are opaque handles;
//! every call returns an `SqflowStatus` and leaves a message for
//! `sqflow_last_error` when it fails.

use sqflow::cli::{analyze, prepare, DiagramSource, Report, RunConfig};
use sqflow::diagram::{gen_pretzel, gen_torus_braid, GluedDiagram};
use sqflow::flowcat::Ladybug;
use sqflow::resolution::Mode;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SqflowStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Validation = 3,
    Panic = 4,
}

/// Grading convention.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SqflowMode {
    Kh = 0,
    Sln = 1,
}

/// An owned glued diagram.
pub struct SqflowDiagram(GluedDiagram);

/// An owned computation result and its JSON rendering.
pub struct SqflowReport {
    report: Report,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: SqflowStatus, msg: impl Into<String>) -> SqflowStatus {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
    status
}

fn guard(f: impl FnOnce() -> SqflowStatus) -> SqflowStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(SqflowStatus::Panic, "internal panic"),
    }
}

fn put<T>(out: *mut *mut T, v: T) -> SqflowStatus {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(v)) };
    SqflowStatus::Ok
}

/// Message of the last failed call on this thread; valid until the next
/// failing call. Never null.
#[no_mangle]
pub extern "C" fn sqflow_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Pretzel diagram with `len` indices.
///
/// # Safety
/// `indices` must point to `len` readable values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqflow_diagram_pretzel(indices: *const i32, len: usize, out: *mut *mut SqflowDiagram) -> SqflowStatus {
    guard(|| {
        if indices.is_null() || out.is_null() {
            return fail(SqflowStatus::NullPointer, "null argument");
        }
        let r = std::slice::from_raw_parts(indices, len);
        match gen_pretzel(r) {
            Ok(d) => put(out, SqflowDiagram(d)),
            Err(e) => fail(SqflowStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Torus link: closure of the braid `(s_1 ... s_{strands-1})^power`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqflow_diagram_torus(strands: usize, power: usize, out: *mut *mut SqflowDiagram) -> SqflowStatus {
    guard(|| {
        if out.is_null() {
            return fail(SqflowStatus::NullPointer, "null argument");
        }
        match gen_torus_braid(strands, power) {
            Ok(d) => put(out, SqflowDiagram(d)),
            Err(e) => fail(SqflowStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Diagram from the JSON diagram format.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqflow_diagram_parse(json: *const c_char, out: *mut *mut SqflowDiagram) -> SqflowStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(SqflowStatus::NullPointer, "null argument");
        }
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            return fail(SqflowStatus::InvalidArgument, "diagram text is not UTF-8");
        };
        match GluedDiagram::parse(text) {
            Ok(d) => put(out, SqflowDiagram(d)),
            Err(e) => fail(SqflowStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Number of tangles of a diagram.
///
/// # Safety
/// `d` must be a live diagram handle or null.
#[no_mangle]
pub unsafe extern "C" fn sqflow_diagram_tangles(d: *const SqflowDiagram) -> usize {
    d.as_ref().map_or(0, |d| d.0.num_tangles())
}

/// # Safety
/// `d` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sqflow_diagram_free(d: *mut SqflowDiagram) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Cohomology of the selected quantum degrees (all when `qs` is null), with
/// Sq^2 and decompositions when `steenrod` is set.
///
/// # Safety
/// `d` must be a live diagram, `qs` null or `nq` readable values, and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqflow_compute(
    d: *const SqflowDiagram,
    n: u8,
    mode: SqflowMode,
    qs: *const i64,
    nq: usize,
    steenrod: bool,
    out: *mut *mut SqflowReport,
) -> SqflowStatus {
    guard(|| {
        let Some(d) = d.as_ref() else {
            return fail(SqflowStatus::NullPointer, "null diagram");
        };
        if out.is_null() {
            return fail(SqflowStatus::NullPointer, "null output");
        }
        let q = if qs.is_null() { vec![] } else { std::slice::from_raw_parts(qs, nq).to_vec() };
        let cfg = RunConfig {
            source: DiagramSource::Given,
            n,
            mode: match mode {
                SqflowMode::Kh => Mode::Kh,
                SqflowMode::Sln => Mode::Sln,
            },
            q,
            ladybug: Ladybug::Right,
            eliminate: true,
            trials: 0,
            seed: 0,
            max_objects: 4_000_000,
        };
        let run = prepare(&cfg, d.0.clone()).and_then(|(setup, qs)| analyze(&cfg, &setup, &qs, steenrod));
        match run {
            Ok(report) => {
                let json = CString::new(sqflow::cli::to_json(&report)).unwrap_or_default();
                put(out, SqflowReport { report, json })
            }
            Err(e) => fail(SqflowStatus::Validation, e.to_string()),
        }
    })
}

/// JSON rendering of a report, owned by the report.
///
/// # Safety
/// `r` must be a live report handle or null.
#[no_mangle]
pub unsafe extern "C" fn sqflow_report_json(r: *const SqflowReport) -> *const c_char {
    r.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// Rank of Sq^2 summed over all degrees of quantum degree `q`; zero when
/// `q` was not computed or had no Steenrod data.
///
/// # Safety
/// `r` must be a live report handle or null.
#[no_mangle]
pub unsafe extern "C" fn sqflow_report_sq2_rank(r: *const SqflowReport, q: i64) -> usize {
    let Some(r) = r.as_ref() else { return 0 };
    r.report
        .buckets
        .iter()
        .filter(|b| b.q == q)
        .filter_map(|b| b.steenrod.as_ref())
        .flat_map(|s| s.sq2.iter().map(|o| o.rank))
        .sum()
}

/// # Safety
/// `r` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sqflow_report_free(r: *mut SqflowReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
