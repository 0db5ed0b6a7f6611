use std::ffi::{CStr, CString};
use std::ptr;

use biqrank_ffi::*;

fn last_error() -> Option<String> {
    let p = biq_last_error_message();
    if p.is_null() {
        return None;
    }
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { biq_string_free(p) };
    Some(s)
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { biq_string_free(p) };
    s
}

fn seven_edge_graph() -> *mut BiqGraph {
    let edges: [usize; 14] = [0, 0, 1, 0, 2, 0, 0, 1, 3, 1, 1, 2, 3, 2];
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { biq_graph_new(4, 3, edges.as_ptr(), 7, &mut g) }, BiqStatus::Ok);
    g
}

#[test]
fn version_is_nonempty() {
    let v = unsafe { CStr::from_ptr(biq_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn zarankiewicz_three_by_three() {
    let mut z = 0usize;
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { biq_zarankiewicz(3, 3, 12, 1, &mut z, &mut w) }, BiqStatus::Ok);
    assert_eq!(z, 6);
    let (mut m, mut n, mut e, mut free) = (0, 0, 0, false);
    assert_eq!(unsafe { biq_graph_info(w, &mut m, &mut n, &mut e, &mut free) }, BiqStatus::Ok);
    assert_eq!((m, n, e, free), (3, 3, 6, true));
    unsafe { biq_graph_free(w) };

    assert_eq!(unsafe { biq_zarankiewicz(2, 2, 12, 1, &mut z, ptr::null_mut()) }, BiqStatus::Ok);
    assert_eq!(z, 3);
}

#[test]
fn size_limit_is_reported() {
    let mut z = 0usize;
    assert_eq!(unsafe { biq_zarankiewicz(6, 4, 3, 1, &mut z, ptr::null_mut()) }, BiqStatus::SizeLimit);
    assert!(last_error().is_some());
}

#[test]
fn null_pointers_are_rejected() {
    let mut z = 0usize;
    assert_eq!(unsafe { biq_zarankiewicz(2, 2, 12, 1, ptr::null_mut(), ptr::null_mut()) }, BiqStatus::NullPointer);
    assert!(last_error().unwrap().contains("out_z"));

    let mut f = ptr::null_mut();
    assert_eq!(unsafe { biq_form_from_json(ptr::null(), &mut f) }, BiqStatus::NullPointer);
    assert!(f.is_null());
    assert_eq!(unsafe { biq_simple_rank_exact(ptr::null(), &mut z) }, BiqStatus::NullPointer);

    unsafe {
        biq_form_free(ptr::null_mut());
        biq_graph_free(ptr::null_mut());
        biq_certificate_free(ptr::null_mut());
        biq_string_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_last_error() {
    let mut z = 0usize;
    assert_ne!(unsafe { biq_zarankiewicz(6, 4, 3, 1, &mut z, ptr::null_mut()) }, BiqStatus::Ok);
    assert!(last_error().is_some());
    assert_eq!(unsafe { biq_zarankiewicz(1, 1, 12, 1, &mut z, ptr::null_mut()) }, BiqStatus::Ok);
    assert_eq!(last_error(), None);
}

#[test]
fn invalid_inputs() {
    let bad = CString::new("{\"m\": 2").unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { biq_form_from_json(bad.as_ptr(), &mut f) }, BiqStatus::ParseError);

    let edges: [usize; 2] = [5, 0];
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { biq_graph_new(2, 2, edges.as_ptr(), 1, &mut g) }, BiqStatus::InvalidArgument);
    assert!(g.is_null());

    let idx: [usize; 4] = [0, 0, 0, 0];
    let vals = [1.0];
    assert_eq!(unsafe { biq_form_new(0, 2, idx.as_ptr(), vals.as_ptr(), 1, &mut f) }, BiqStatus::InvalidArgument);
}

#[test]
fn simple_rank_of_seven_edge_graph() {
    let g = seven_edge_graph();
    let mut r = 0usize;
    assert_eq!(unsafe { biq_simple_rank_exact(g, &mut r) }, BiqStatus::Ok);
    assert_eq!(r, 7);

    let mut form = ptr::null_mut();
    assert_eq!(unsafe { biq_form_from_graph(g, &mut form) }, BiqStatus::Ok);
    let (mut upper, mut lower, mut residual) = (0usize, 0usize, f64::NAN);
    assert_eq!(
        unsafe { biq_sos_rank(form, 1, 12, 42, &mut upper, &mut lower, &mut residual) },
        BiqStatus::Ok
    );
    assert_eq!(upper, 7);
    assert_eq!(lower, 7);
    assert!(residual <= 1e-8);
    unsafe {
        biq_form_free(form);
        biq_graph_free(g);
    }
}

#[test]
fn four_cycle_has_no_exact_rank() {
    let edges: [usize; 8] = [0, 0, 0, 1, 1, 0, 1, 1];
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { biq_graph_new(2, 2, edges.as_ptr(), 4, &mut g) }, BiqStatus::Ok);
    let mut r = 0usize;
    assert_eq!(unsafe { biq_simple_rank_exact(g, &mut r) }, BiqStatus::NotC4Free);

    let mut form = ptr::null_mut();
    assert_eq!(unsafe { biq_form_from_graph(g, &mut form) }, BiqStatus::Ok);
    let (mut upper, mut lower, mut residual) = (0usize, 0usize, 0.0);
    assert_eq!(
        unsafe { biq_sos_rank(form, 1, 4, 1, &mut upper, &mut lower, &mut residual) },
        BiqStatus::Ok
    );
    assert_eq!(lower, BIQ_NO_RANK);
    assert!(upper <= 4);
    unsafe {
        biq_form_free(form);
        biq_graph_free(g);
    }
}

#[test]
fn choi_is_not_sos() {
    for variant in [BiqChoi::Classical, BiqChoi::Printed] {
        let mut f = ptr::null_mut();
        assert_eq!(unsafe { biq_form_choi(variant, &mut f) }, BiqStatus::Ok);
        let mut cert = ptr::null_mut();
        assert_eq!(unsafe { biq_certify(f, 7, &mut cert) }, BiqStatus::Ok);
        let mut status = BiqSosStatus::Sos;
        let mut lambda = 0.0;
        assert_eq!(unsafe { biq_certificate_result(cert, &mut status, &mut lambda) }, BiqStatus::Ok);
        assert_eq!(status, BiqSosStatus::NotSos);
        assert!(lambda < 0.0);

        let mut json = ptr::null_mut();
        assert_eq!(unsafe { biq_certificate_to_json(cert, &mut json) }, BiqStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert!(v.get("lambda_star").is_some());

        let mut r = (0usize, 0usize, 0.0);
        assert_eq!(
            unsafe { biq_sos_rank(f, 1, 3, 7, &mut r.0, &mut r.1, &mut r.2) },
            BiqStatus::NotCertified
        );
        unsafe {
            biq_certificate_free(cert);
            biq_form_free(f);
        }
    }
}

#[test]
fn form_json_roundtrip_and_evaluate() {
    let idx: [usize; 8] = [0, 0, 0, 0, 1, 1, 1, 1];
    let vals = [2.0, 3.0];
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { biq_form_new(2, 2, idx.as_ptr(), vals.as_ptr(), 2, &mut f) }, BiqStatus::Ok);

    let (x, y) = ([1.0, 2.0], [3.0, 1.0]);
    let mut v = 0.0;
    assert_eq!(unsafe { biq_form_evaluate(f, x.as_ptr(), 2, y.as_ptr(), 2, &mut v) }, BiqStatus::Ok);
    assert!((v - (2.0 * 9.0 + 3.0 * 4.0)).abs() < 1e-12);
    assert_eq!(
        unsafe { biq_form_evaluate(f, x.as_ptr(), 1, y.as_ptr(), 2, &mut v) },
        BiqStatus::InvalidArgument
    );

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { biq_form_to_json(f, &mut json) }, BiqStatus::Ok);
    let text = CString::new(take_string(json)).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { biq_form_from_json(text.as_ptr(), &mut g) }, BiqStatus::Ok);
    let mut w = 0.0;
    assert_eq!(unsafe { biq_form_evaluate(g, x.as_ptr(), 2, y.as_ptr(), 2, &mut w) }, BiqStatus::Ok);
    assert_eq!(v, w);
    unsafe {
        biq_form_free(f);
        biq_form_free(g);
    }
}

#[test]
fn graph_json_roundtrip() {
    let g = seven_edge_graph();
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { biq_graph_to_json(g, &mut json) }, BiqStatus::Ok);
    let text = CString::new(take_string(json)).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { biq_graph_from_json(text.as_ptr(), &mut h) }, BiqStatus::Ok);
    let (mut m, mut n, mut e, mut free) = (0, 0, 0, false);
    assert_eq!(unsafe { biq_graph_info(h, &mut m, &mut n, &mut e, &mut free) }, BiqStatus::Ok);
    assert_eq!((m, n, e, free), (4, 3, 7, true));
    unsafe {
        biq_graph_free(g);
        biq_graph_free(h);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/biqrank.h")).unwrap();
    for name in [
        "biq_version",
        "biq_last_error_message",
        "biq_string_free",
        "biq_form_new",
        "biq_form_choi",
        "biq_zarankiewicz",
        "biq_certify",
        "biq_sos_rank",
        "BIQ_STATUS_NOT_C4_FREE",
        "BIQ_NO_RANK",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
