//! The C ABI driven from Rust through the rlib.

use sqflow_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sqflow_last_error()) }.to_str().unwrap().to_string()
}

fn pretzel(r: &[i32]) -> *mut SqflowDiagram {
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { sqflow_diagram_pretzel(r.as_ptr(), r.len(), &mut d) }, SqflowStatus::Ok);
    assert!(!d.is_null());
    d
}

#[test]
fn steenrod_square_of_8_19() {
    let d = pretzel(&[-2, 3, 3]);
    assert_eq!(unsafe { sqflow_diagram_tangles(d) }, 3);
    let qs = [11i64];
    let mut r = ptr::null_mut();
    let st = unsafe { sqflow_compute(d, 2, SqflowMode::Kh, qs.as_ptr(), qs.len(), true, &mut r) };
    assert_eq!(st, SqflowStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { sqflow_report_sq2_rank(r, 11) }, 1);
    assert_eq!(unsafe { sqflow_report_sq2_rank(r, 13) }, 0);
    let json = unsafe { CStr::from_ptr(sqflow_report_json(r)) }.to_str().unwrap();
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    assert_eq!(v["buckets"][0]["objects"], 31);
    assert_eq!(v["buckets"][0]["steenrod"]["decomposition"]["summands"][0], "X(_2η,2)");
    unsafe {
        sqflow_report_free(r);
        sqflow_diagram_free(d);
    }
}

#[test]
fn all_quantum_degrees_when_none_given() {
    let d = pretzel(&[2, -2, -2]);
    let mut r = ptr::null_mut();
    let st = unsafe { sqflow_compute(d, 3, SqflowMode::Sln, ptr::null(), 0, true, &mut r) };
    assert_eq!(st, SqflowStatus::Ok, "{}", last_error());
    let ranks: Vec<usize> = (-16..=6).map(|q| unsafe { sqflow_report_sq2_rank(r, q) }).collect();
    assert_eq!(ranks.iter().sum::<usize>(), 1);
    assert_eq!(unsafe { sqflow_report_sq2_rank(r, -6) }, 1);
    unsafe {
        sqflow_report_free(r);
        sqflow_diagram_free(d);
    }
}

#[test]
fn torus_and_parsed_diagrams() {
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { sqflow_diagram_torus(3, 4, &mut t) }, SqflowStatus::Ok);
    assert_eq!(unsafe { sqflow_diagram_tangles(t) }, 8);
    unsafe { sqflow_diagram_free(t) };

    let text = sqflow::diagram::gen_pretzel(&[-2, 3, 3]).unwrap().to_json();
    let c = CString::new(text).unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { sqflow_diagram_parse(c.as_ptr(), &mut d) }, SqflowStatus::Ok);
    assert_eq!(unsafe { sqflow_diagram_tangles(d) }, 3);
    unsafe { sqflow_diagram_free(d) };
}

#[test]
fn error_codes() {
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { sqflow_diagram_pretzel(ptr::null(), 0, &mut d) }, SqflowStatus::NullPointer);
    assert_eq!(unsafe { sqflow_diagram_torus(1, 3, &mut d) }, SqflowStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    let bad = CString::new("{\"tangles\": 3}").unwrap();
    assert_eq!(unsafe { sqflow_diagram_parse(bad.as_ptr(), &mut d) }, SqflowStatus::InvalidArgument);
    assert!(d.is_null());

    // n = 3 needs a matched diagram.
    let d = pretzel(&[-2, 3, 3]);
    let mut r = ptr::null_mut();
    let st = unsafe { sqflow_compute(d, 3, SqflowMode::Sln, ptr::null(), 0, false, &mut r) };
    assert_eq!(st, SqflowStatus::Validation);
    assert!(r.is_null());
    assert!(last_error().contains("matched"), "{}", last_error());
    assert_eq!(unsafe { sqflow_compute(ptr::null(), 2, SqflowMode::Kh, ptr::null(), 0, false, &mut r) }, SqflowStatus::NullPointer);
    unsafe { sqflow_diagram_free(d) };
}

#[test]
fn null_handles_are_harmless() {
    unsafe {
        sqflow_diagram_free(ptr::null_mut());
        sqflow_report_free(ptr::null_mut());
        assert_eq!(sqflow_diagram_tangles(ptr::null()), 0);
        assert!(sqflow_report_json(ptr::null()).is_null());
        assert_eq!(sqflow_report_sq2_rank(ptr::null(), 0), 0);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/sqflow.h")).unwrap();
    for f in [
        "sqflow_last_error",
        "sqflow_diagram_pretzel",
        "sqflow_diagram_torus",
        "sqflow_diagram_parse",
        "sqflow_diagram_tangles",
        "sqflow_diagram_free",
        "sqflow_compute",
        "sqflow_report_json",
        "sqflow_report_sq2_rank",
        "sqflow_report_free",
    ] {
        assert!(header.contains(&format!("{}(", f)), "{} missing from the header", f);
    }
    assert!(header.contains("SQFLOW_STATUS_VALIDATION = 3"));
}
