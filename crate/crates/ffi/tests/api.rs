use std::ffi::{CStr, CString};
use std::ptr;

use isskit_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(isskit_last_error()) }.to_string_lossy().into_owned()
}

fn take(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_string_lossy().into_owned();
    unsafe { isskit_string_free(s) };
    out
}

#[test]
fn kfun_roundtrip() {
    unsafe {
        let mut k = ptr::null_mut();
        assert_eq!(isskit_kfun_power(2.0, 0.5, &mut k), IsskitStatus::Ok);
        let mut v = 0.0;
        assert_eq!(isskit_kfun_eval(k, 4.0, &mut v), IsskitStatus::Ok);
        assert_eq!(v, 4.0);

        let mut inv = ptr::null_mut();
        assert_eq!(isskit_kfun_invert(k, &mut inv), IsskitStatus::Ok);
        let mut c = ptr::null_mut();
        assert_eq!(isskit_kfun_compose(k, inv, &mut c), IsskitStatus::Ok);
        assert_eq!(isskit_kfun_eval(c, 3.0, &mut v), IsskitStatus::Ok);
        assert!((v - 3.0).abs() < 1e-12);

        assert_eq!(isskit_kfun_eval(k, -1.0, &mut v), IsskitStatus::InvalidArgument);
        assert!(last_error().contains("negative"));

        for h in [k, inv, c] {
            isskit_kfun_free(h);
        }
        isskit_kfun_free(ptr::null_mut());
    }
}

#[test]
fn null_and_bad_input_are_reported() {
    unsafe {
        let mut v = 0.0;
        assert_eq!(isskit_kfun_eval(ptr::null(), 1.0, &mut v), IsskitStatus::NullPointer);
        assert!(last_error().contains("null"));
        let mut k = ptr::null_mut();
        assert_eq!(isskit_kfun_power(-1.0, 1.0, &mut k), IsskitStatus::InvalidArgument);
        assert!(k.is_null());
        let bad = CString::new("{not json").unwrap();
        assert_eq!(isskit_kfun_from_json(bad.as_ptr(), &mut k), IsskitStatus::InvalidJson);
        let ok = CString::new(r#"{"kind":"power","coeff":1,"expo":2}"#).unwrap();
        assert_eq!(isskit_kfun_from_json(ok.as_ptr(), &mut k), IsskitStatus::Ok);
        assert_eq!(last_error(), "");
        isskit_kfun_free(k);
    }
}

#[test]
fn small_gain_and_omega_path() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(isskit_gains_new(2, &mut g), IsskitStatus::Ok);
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        isskit_kfun_power(0.9, 1.0, &mut a);
        isskit_kfun_power(0.9, 1.0, &mut b);
        assert_eq!(isskit_gains_set(g, 0, 1, a), IsskitStatus::Ok);
        assert_eq!(isskit_gains_set(g, 1, 0, b), IsskitStatus::Ok);
        assert_eq!(isskit_gains_set(g, 1, 1, b), IsskitStatus::InvalidArgument);

        let mut holds = false;
        let mut cert = ptr::null_mut();
        assert_eq!(isskit_small_gain_check(g, &mut holds, &mut cert), IsskitStatus::Ok);
        assert!(holds);
        let cert: serde_json::Value = serde_json::from_str(&take(cert)).unwrap();
        assert_eq!(cert["check"], "small_gain");

        let mut verified = false;
        let mut path = ptr::null_mut();
        let slopes = [1.0, 1.0];
        assert_eq!(isskit_omega_path(g, slopes.as_ptr(), 2, 50, &mut verified, &mut path), IsskitStatus::Ok);
        assert!(verified);
        assert!(take(path).contains("sigmas"));

        let text = CString::new(
            r#"{"n":2,"edges":[{"from":1,"to":2,"gain":{"kind":"power","coeff":2,"expo":1}},
                              {"from":2,"to":1,"gain":{"kind":"power","coeff":1,"expo":1}}]}"#,
        )
        .unwrap();
        let mut bad = ptr::null_mut();
        assert_eq!(isskit_gains_from_json(text.as_ptr(), &mut bad), IsskitStatus::Ok);
        assert_eq!(isskit_small_gain_check(bad, &mut holds, ptr::null_mut()), IsskitStatus::Ok);
        assert!(!holds);
        assert_eq!(
            isskit_omega_path(bad, slopes.as_ptr(), 2, 50, &mut verified, &mut path),
            IsskitStatus::SmallGainViolated
        );

        isskit_gains_free(g);
        isskit_gains_free(bad);
        isskit_kfun_free(a);
        isskit_kfun_free(b);
    }
}

#[test]
fn model_spectrum_and_simulation() {
    let spec = CString::new(r#"{"diffusion":[1],"bc":"dirichlet"}"#).unwrap();
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(isskit_model_new(spec.as_ptr(), std::f64::consts::PI, 50, &mut m), IsskitStatus::Ok);
        let (mut k, mut n) = (0, 0);
        assert_eq!(isskit_model_shape(m, &mut k, &mut n), IsskitStatus::Ok);
        assert_eq!((k, n), (1, 50));
        let mut top = 0.0;
        assert_eq!(isskit_model_spectral_abscissa(m, &mut top), IsskitStatus::Ok);
        assert!((top + 1.0).abs() < 1e-3);

        let h = std::f64::consts::PI / 51.0;
        let x0: Vec<f64> = (1..=50).map(|i| (i as f64 * h).sin()).collect();
        let mut x1 = vec![0.0; 50];
        let mut blowup = true;
        assert_eq!(isskit_model_simulate(m, x0.as_ptr(), x1.as_mut_ptr(), 50, 1.0, 0.0, &mut blowup), IsskitStatus::Ok);
        assert!(!blowup);
        let ratio = x1[24] / x0[24];
        assert!((ratio - (-1.0f64).exp()).abs() < 1e-2, "{ratio}");

        assert_eq!(
            isskit_model_simulate(m, x0.as_ptr(), x1.as_mut_ptr(), 49, 1.0, 0.0, &mut blowup),
            IsskitStatus::ShapeMismatch
        );
        isskit_model_free(m);
    }
}

#[test]
fn lyapunov_solver() {
    let r = [-1.0, 5.0, -5.0, -1.0];
    let mut p = [0.0; 4];
    let mut res = 1.0;
    unsafe {
        assert_eq!(isskit_solve_lyapunov(r.as_ptr(), 2, p.as_mut_ptr(), &mut res), IsskitStatus::Ok);
        assert!(res < 1e-12);
        assert!((p[0] - 0.5).abs() < 1e-12 && p[1].abs() < 1e-12);
        let unstable = [1.0, 0.0, 0.0, -1.0];
        assert_eq!(isskit_solve_lyapunov(unstable.as_ptr(), 2, p.as_mut_ptr(), &mut res), IsskitStatus::NotHurwitz);
    }
}

#[test]
fn example_runs_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let id = CString::new("counterexample").unwrap();
    let mut verdict = false;
    let mut report = ptr::null_mut();
    unsafe {
        assert_eq!(isskit_run_example(id.as_ptr(), out.as_ptr(), 0, 100, &mut verdict, &mut report), IsskitStatus::Ok);
    }
    assert!(verdict);
    assert!(take(report).contains("\"example_id\":\"counterexample\""));
    assert!(dir.path().join("counterexample/report.json").exists());
    let bad = CString::new("turing").unwrap();
    unsafe {
        assert_eq!(
            isskit_run_example(bad.as_ptr(), out.as_ptr(), 0, 100, &mut verdict, ptr::null_mut()),
            IsskitStatus::InvalidArgument
        );
    }
}

#[test]
fn errors_are_per_thread() {
    unsafe {
        let mut v = 0.0;
        isskit_kfun_eval(ptr::null(), 1.0, &mut v);
    }
    let other = std::thread::spawn(last_error).join().unwrap();
    assert_eq!(other, "");
    assert!(!last_error().is_empty());
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(isskit_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
