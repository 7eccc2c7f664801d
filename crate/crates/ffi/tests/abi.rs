use std::ffi::{CStr, CString};
use std::ptr;

use modvar_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(modvar_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn squeezing_matches_known_values() {
    let (mut s1, mut s2) = (0.0, 0.0);
    assert_eq!(modvar_squeezing(2, &mut s1, &mut s2), ModvarStatus::Ok);
    assert!((s1 - 0.607927).abs() < 1e-6);
    assert!((s2 - 0.303964).abs() < 1e-6);
    assert_eq!(last_error(), "");
}

#[test]
fn invalid_rank_sets_status_and_message() {
    let mut out = 0.0;
    assert_eq!(modvar_fringe(0, 0.1, &mut out), ModvarStatus::InvalidParameter);
    assert!(last_error().starts_with("invalid_parameter"));
    assert_eq!(modvar_squeezing(2, ptr::null_mut(), &mut out), ModvarStatus::NullPointer);
}

#[test]
fn constant_from_shooting_and_perturbation() {
    let mut c = 0.0;
    assert_eq!(modvar_solve_c(1e-12, &mut c), ModvarStatus::Ok);
    assert!((c - 0.078235).abs() < 1e-6);
    assert!((modvar_perturbative_c() - 7.0 / 90.0).abs() < 1e-15);
    assert_eq!(modvar_solve_c(1e-14, &mut c), ModvarStatus::InvalidParameter);
}

#[test]
fn mpe_handle_lifecycle_and_criterion() {
    let mut mpe = ptr::null_mut();
    let mut cls = ptr::null_mut();
    assert_eq!(modvar_state_new_mpe(2, 0.0, 0, 1.0, 5.0, &mut mpe), ModvarStatus::Ok);
    assert_eq!(modvar_state_new_classical(2, 0.0, 0, 1.0, 5.0, &mut cls), ModvarStatus::Ok);

    let mut r = ModvarCriterion::default();
    assert_eq!(modvar_evaluate_criterion(mpe, 1 << 14, &mut r), ModvarStatus::Ok);
    assert!(r.violated);
    assert!((r.lhs - 0.116006).abs() < 1e-3);

    let mut rc = ModvarCriterion::default();
    assert_eq!(modvar_evaluate_criterion(cls, 1 << 14, &mut rc), ModvarStatus::Ok);
    assert!(!rc.violated);

    let mut mixed = ptr::null_mut();
    assert_eq!(modvar_state_mix(mpe, 0.5, cls, 0.5, &mut mixed), ModvarStatus::Ok);
    let mut rm = ModvarCriterion::default();
    assert_eq!(modvar_evaluate_criterion(mixed, 1 << 14, &mut rm), ModvarStatus::Ok);
    assert!(rm.lhs > r.lhs && rm.lhs < rc.lhs);

    let mut text = ptr::null_mut();
    assert_eq!(modvar_state_to_json(mixed, &mut text), ModvarStatus::Ok);
    let s = unsafe { CStr::from_ptr(text) }.to_str().unwrap().to_owned();
    assert!(s.contains("components"));
    unsafe {
        modvar_string_free(text);
        modvar_state_free(mixed);
        modvar_state_free(mpe);
        modvar_state_free(cls);
        modvar_state_free(ptr::null_mut());
    }
}

#[test]
fn descriptor_round_trip() {
    let json = CString::new(
        r#"{"kind":"mpe","N":3,"lambda":1.0,"envelope":{"kind":"gaussian","sigma":5.0}}"#,
    )
    .unwrap();
    let mut h = ptr::null_mut();
    let status = unsafe { modvar_state_from_json(json.as_ptr(), &mut h) };
    assert_eq!(status, ModvarStatus::Ok, "{}", last_error());
    let mut text = ptr::null_mut();
    assert_eq!(modvar_state_to_json(h, &mut text), ModvarStatus::Ok);
    let s = unsafe { CStr::from_ptr(text) }.to_str().unwrap().to_owned();
    assert!(s.contains("\"mpe\""));
    unsafe {
        modvar_string_free(text);
        modvar_state_free(h);
    }

    let bad = CString::new(r#"{"kind":"mpe","bogus":1}"#).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { modvar_state_from_json(bad.as_ptr(), &mut h) }, ModvarStatus::Json);
    assert!(h.is_null());
}

#[test]
fn mixing_different_scales_is_rejected() {
    let (mut a, mut b, mut m) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
    assert_eq!(modvar_state_new_mpe(2, 0.0, 0, 1.0, 5.0, &mut a), ModvarStatus::Ok);
    assert_eq!(modvar_state_new_mpe(2, 0.0, 0, 2.0, 10.0, &mut b), ModvarStatus::Ok);
    assert_eq!(modvar_state_mix(a, 0.5, b, 0.5, &mut m), ModvarStatus::InvalidParameter);
    unsafe {
        modvar_state_free(a);
        modvar_state_free(b);
    }
}

#[test]
fn visibility_and_robustness() {
    let mut v = 0.0;
    assert_eq!(modvar_visibility(0.0, 2, &mut v), ModvarStatus::Ok);
    assert!((v - 1.0).abs() < 1e-12);
    let mut r = ModvarRobustness::default();
    assert_eq!(modvar_robustness(2, 1.0, 5.0, 0, &mut r), ModvarStatus::Ok);
    assert!((r.epsilon_closed_form - 0.798729).abs() < 1e-5);
    assert!(r.discrepancy < 1e-3);
    assert_eq!(modvar_protocol_visibility(2, 0.0, 1.0, 5.0, 1.0, 10.0, &mut v), ModvarStatus::Ok);
    assert!((v - 1.0).abs() < 1e-3);
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/modvar.h");
    let src = std::env::temp_dir().join("modvar_header_check.c");
    std::fs::write(&src, format!("#include \"{header}\"\nint main(void) {{ return MODVAR_STATUS_OK; }}\n")).unwrap();
    match std::process::Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).status() {
        Ok(s) => assert!(s.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler found; header check skipped"),
    }
}
