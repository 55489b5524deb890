use std::ffi::{CStr, CString};
use std::ptr;

use levylab_ffi::*;

fn last_error() -> String {
    let p = ll_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn space_roundtrip() {
    let mut s: *mut LlSpace = ptr::null_mut();
    let w = CString::new("4^-n").unwrap();
    unsafe {
        assert_eq!(ll_space_new(8, w.as_ptr(), &mut s), LlStatus::Ok);
        let mut dim = 0usize;
        assert_eq!(ll_space_dim(s, &mut dim), LlStatus::Ok);
        assert_eq!(dim, 8);
        let mut l = 0.0;
        assert_eq!(ll_space_weight(s, 1, &mut l), LlStatus::Ok);
        assert_eq!(l, 1.0 / 16.0);
        assert_eq!(ll_space_weight(s, 8, &mut l), LlStatus::Dimension);
        ll_space_free(s);
    }
}

#[test]
fn bad_inputs_map_to_status_codes() {
    let mut s: *mut LlSpace = ptr::null_mut();
    let w = CString::new("no-such-weights").unwrap();
    unsafe {
        assert_eq!(ll_space_new(8, w.as_ptr(), &mut s), LlStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        assert_eq!(ll_space_new(8, ptr::null(), ptr::null_mut()), LlStatus::NullPointer);
        assert!(last_error().contains("out"));
        let mut d = 0usize;
        assert_eq!(ll_space_dim(ptr::null(), &mut d), LlStatus::NullPointer);
        ll_space_free(ptr::null_mut());
        ll_triplet_free(ptr::null_mut());
        ll_lyapunov_free(ptr::null_mut());
    }
}

#[test]
fn brownian_second_moment() {
    let mut t: *mut LlTriplet = ptr::null_mut();
    let xi = [1.0, 1.0];
    let mut e = LlEstimate::default();
    unsafe {
        assert_eq!(ll_triplet_brownian(4, &mut t), LlStatus::Ok);
        assert_eq!(ll_second_moment(t, xi.as_ptr(), 2, 0.5, 20_000, 5, &mut e), LlStatus::Ok);
        ll_triplet_free(t);
    }
    assert_eq!(e.n, 20_000);
    assert!((e.mean - 1.0).abs() < 4.0 * e.stderr, "{e:?}");
    let mut again = LlEstimate::default();
    unsafe {
        ll_triplet_brownian(4, &mut t);
        ll_second_moment(t, xi.as_ptr(), 2, 0.5, 20_000, 5, &mut again);
        ll_triplet_free(t);
    }
    assert_eq!(e, again);
}

#[test]
fn jump_triplet_and_lyapunov() {
    let drift = [0.0; 3];
    let var = [1.0; 3];
    let atoms = [0.5, 0.0, 0.0, 0.0, -0.5, 0.0];
    let mut t: *mut LlTriplet = ptr::null_mut();
    let mut s: *mut LlSpace = ptr::null_mut();
    let mut q: *mut LlLyapunov = ptr::null_mut();
    let z = [0.3, -0.1];
    let mut q2 = 0.0;
    let mut v0 = LlEstimate::default();
    unsafe {
        assert_eq!(ll_triplet_new(3, drift.as_ptr(), var.as_ptr(), 1.0, atoms.as_ptr(), 2, &mut t), LlStatus::Ok);
        assert_eq!(ll_space_new(3, ptr::null(), &mut s), LlStatus::Ok);
        assert_eq!(ll_lyapunov_new(s, LlNormKind::Levy, &mut q), LlStatus::Ok);
        assert_eq!(ll_lyapunov_q_sq(q, z.as_ptr(), 2, &mut q2), LlStatus::Ok);
        assert_eq!(ll_v0_estimate(q, t, z.as_ptr(), 2, 5_000, 1, &mut v0), LlStatus::Ok);
        let long = [0.0; 5];
        assert_eq!(ll_lyapunov_q_sq(q, long.as_ptr(), 5, &mut q2), LlStatus::Dimension);
        assert_eq!(ll_triplet_new(3, drift.as_ptr(), ptr::null(), 0.0, ptr::null(), 0, &mut t), LlStatus::NullPointer);
        ll_lyapunov_free(q);
        ll_space_free(s);
        ll_triplet_free(t);
    }
    assert!(q2 > 0.0);
    assert!(v0.mean > 0.0 && v0.stderr > 0.0);
}

#[test]
fn run_config_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.toml");
    std::fs::write(
        &cfg,
        "samples = 500\n[[experiment]]\nname = \"p\"\nop = \"poisson_example\"\n[experiment.params]\nt = 1.0\nxis = [[1.0]]\n",
    )
    .unwrap();
    let c = CString::new(cfg.to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    let mut code = -1;
    unsafe {
        assert_eq!(ll_run_config(c.as_ptr(), out.as_ptr(), 1.0, &mut code), LlStatus::Ok);
    }
    assert!(code == 0 || code == 1);
    assert!(dir.path().join("out/summary.csv").exists());
    let missing = CString::new("/nonexistent/suite.toml").unwrap();
    unsafe {
        assert_eq!(ll_run_config(missing.as_ptr(), out.as_ptr(), 1.0, &mut code), LlStatus::Config);
    }
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/levylab.h")).unwrap();
    for name in [
        "typedef struct LlSpace LlSpace",
        "typedef struct LlTriplet LlTriplet",
        "typedef struct LlLyapunov LlLyapunov",
        "LL_STATUS_OK = 0",
        "ll_last_error",
        "ll_space_new",
        "ll_triplet_new",
        "ll_v0_estimate",
        "ll_run_config",
    ] {
        assert!(h.contains(name), "missing {name}");
    }
    let v = unsafe { CStr::from_ptr(ll_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
