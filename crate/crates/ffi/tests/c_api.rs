use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use specshare_ffi::*;

fn last_error() -> String {
    let p = ss_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn model_round_trip() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(ss_model_new(100.0, 100.0, SsFamily::Linear as u32, &mut m), SsStatus::Ok);
        let mut v = 0.0;
        assert_eq!(ss_model_full_spectrum_utility(m, 2, 0.5, &mut v), SsStatus::Ok);
        let expect = 0.5 * 100.0 * (1.0f64 + 100.0 / 101.0).log2();
        assert!((v - expect).abs() < 1e-9);
        let mut n = 0usize;
        assert_eq!(ss_max_entrants(m, 40.0, 0.5, &mut n), SsStatus::Ok);
        assert_eq!(n, 2);
        assert_eq!(ss_model_full_spectrum_utility(m, 0, 0.5, &mut v), SsStatus::Domain);
        assert!(!last_error().is_empty());
        ss_model_free(m);
    }
}

#[test]
fn bad_arguments_are_reported() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(ss_model_new(100.0, 100.0, 7, &mut m), SsStatus::Domain);
        assert!(m.is_null());
        assert_eq!(ss_model_new(100.0, 100.0, 0, ptr::null_mut()), SsStatus::NullPointer);
        let mut v = 0.0;
        assert_eq!(ss_model_pi(ptr::null(), 1.0, 1.0, &mut v), SsStatus::NullPointer);
        ss_model_free(ptr::null_mut());
        let mut s = ptr::null_mut();
        let text = CString::new("scheme.kind = full\nbogus = 1\n").unwrap();
        assert_eq!(ss_scenario_parse(text.as_ptr(), &mut s), SsStatus::Parse);
        assert!(last_error().starts_with("line 2"));
    }
}

#[test]
fn simulate_and_verify() {
    unsafe {
        let text = CString::new(
            "scheme.kind = static\nscheme.punishment_T = 2\nsim.horizon = 200\nsim.replications = 4\n",
        )
        .unwrap();
        let mut s = ptr::null_mut();
        assert_eq!(ss_scenario_parse(text.as_ptr(), &mut s), SsStatus::Ok);
        let mut n = 0;
        assert_eq!(ss_scenario_operators(s, &mut n), SsStatus::Ok);
        assert_eq!(n, 2);

        let mut r = ptr::null_mut();
        assert_eq!(ss_simulate(s, &mut r), SsStatus::Ok);
        let (mut mean, mut se) = (0.0, 0.0);
        assert_eq!(ss_report_revenue(r, 1, &mut mean, &mut se), SsStatus::Ok);
        assert!(mean > 0.0 && se >= 0.0);
        assert_eq!(ss_report_revenue(r, 2, &mut mean, &mut se), SsStatus::OutOfRange);
        ss_report_free(r);

        // T = 2 is one short of the minimum at these parameters
        let mut f = ptr::null_mut();
        assert_eq!(ss_verify(s, &mut f), SsStatus::Ok);
        let (mut len, mut bad) = (0, 0);
        assert_eq!(ss_findings_len(f, &mut len), SsStatus::Ok);
        assert_eq!(ss_findings_profitable(f, &mut bad), SsStatus::Ok);
        assert_eq!(len, 4);
        assert!(bad > 0);
        let mut state = ptr::null();
        let mut profitable = false;
        assert_eq!(
            ss_findings_get(f, 1, &mut state, ptr::null_mut(), ptr::null_mut(), &mut profitable),
            SsStatus::Ok
        );
        assert_eq!(CStr::from_ptr(state).to_str().unwrap(), "op1;coop;lambda=1");
        assert!(profitable);
        assert_eq!(
            ss_findings_get(f, 9, &mut state, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()),
            SsStatus::OutOfRange
        );
        ss_findings_free(f);
        ss_scenario_free(s);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/specshare.h");
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .output()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
