use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use queuekit_ffi::*;

fn last_error() -> String {
    let p = qk_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn mm1_metrics_and_simulation() {
    unsafe {
        let mut q = ptr::null_mut();
        assert_eq!(qk_queue_new(QkQueueKind::Mm1, 1.0, 2.0, 1, 0.0, 0.0, &mut q), QkStatus::Ok);
        let mut m = std::mem::MaybeUninit::<QkMetrics>::uninit();
        assert_eq!(qk_queue_metrics(q, m.as_mut_ptr()), QkStatus::Ok);
        let m = m.assume_init();
        assert_eq!((m.l, m.lq, m.w, m.wq, m.pi0), (1.0, 0.5, 1.0, 0.5, 0.5));
        assert!(m.blocking.is_nan() && m.delay_prob.is_nan());
        assert!(qk_last_error().is_null());

        let (mut w, mut wq) = (0.0, 0.0);
        assert_eq!(qk_queue_waiting_cdf(q, 0.0, &mut w, &mut wq), QkStatus::Ok);
        assert_eq!((w, wq), (0.0, 0.5));

        let mut e = std::mem::MaybeUninit::<QkQueueEstimates>::uninit();
        assert_eq!(qk_queue_simulate(q, 42, 200_000, e.as_mut_ptr()), QkStatus::Ok);
        let e = e.assume_init();
        assert!((e.l.point - 1.0).abs() <= 4.0 * e.l.half_width, "{:?}", e.l);
        qk_queue_free(q);
    }
}

#[test]
fn status_codes() {
    unsafe {
        let mut q = ptr::null_mut();
        assert_eq!(qk_queue_new(QkQueueKind::Mm1, -1.0, 2.0, 1, 0.0, 0.0, &mut q), QkStatus::InvalidArgument);
        assert!(q.is_null() && last_error().contains("beta"));
        assert_eq!(qk_queue_new(QkQueueKind::MmM, 1.0, 2.0, 0, 0.0, 0.0, &mut q), QkStatus::InvalidArgument);
        assert_eq!(qk_queue_new(QkQueueKind::Mm1, 1.0, 2.0, 1, 0.0, 0.0, ptr::null_mut()), QkStatus::NullPointer);

        assert_eq!(qk_queue_new(QkQueueKind::Mg1, 1.0, 0.0, 1, 1.5, 3.0, &mut q), QkStatus::Ok);
        let mut m = std::mem::MaybeUninit::<QkMetrics>::uninit();
        assert_eq!(qk_queue_metrics(q, m.as_mut_ptr()), QkStatus::Unstable);
        assert!(last_error().contains("transient"), "{}", last_error());
        qk_queue_free(q);
        qk_queue_free(ptr::null_mut());

        let mut c = 0.0;
        assert_eq!(qk_erlang_c(2, 1.0, &mut c), QkStatus::Ok);
        assert!((c - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(qk_erlang_c(2, 2.0, &mut c), QkStatus::Unstable);
        let mut b = 0.0;
        assert_eq!(qk_erlang_b(2, 1.0, &mut b), QkStatus::Ok);
        assert!((b - 0.2).abs() < 1e-12);
    }
}

#[test]
fn polling_handle() {
    unsafe {
        let lambda = [0.25, 0.25];
        let b1 = [1.0, 1.0];
        let b2 = [2.0, 2.0];
        let s1 = [0.5, 0.5];
        let s2 = [0.25, 0.25];
        let mut p = ptr::null_mut();
        let st = qk_polling_new(2, lambda.as_ptr(), b1.as_ptr(), b2.as_ptr(), s1.as_ptr(), s2.as_ptr(), &mut p);
        assert_eq!(st, QkStatus::Ok);
        let mut w = [0.0; 2];
        assert_eq!(qk_polling_waits(p, QkPolicy::Exhaustive, w.as_mut_ptr(), 2), QkStatus::Ok);
        assert!(w.iter().all(|x| (x - 1.75).abs() < 1e-12), "{w:?}");
        assert_eq!(qk_polling_waits(p, QkPolicy::Gated, w.as_mut_ptr(), 3), QkStatus::InvalidArgument);
        let mut r = 1.0;
        assert_eq!(qk_polling_pcl_residual(p, QkPolicy::Gated, &mut r), QkStatus::Ok);
        assert!(r.abs() < 1e-9);
        qk_polling_free(p);

        let st = qk_polling_new(2, lambda.as_ptr(), ptr::null(), b2.as_ptr(), s1.as_ptr(), s2.as_ptr(), &mut p);
        assert_eq!(st, QkStatus::NullPointer);
        assert!(p.is_null());
    }
}

#[test]
fn model_file_round_trip() {
    unsafe {
        let text = CString::new(r#"{"models":[{"kind":"queue","model":"MM1","beta":1,"delta":2}],"sim":{"horizon":100000}}"#).unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(qk_model_parse(text.as_ptr(), &mut model), QkStatus::Ok);
        let mut reports = Vec::new();
        for _ in 0..2 {
            let mut out = ptr::null_mut();
            let mut code = -1;
            assert_eq!(qk_model_run(model, QkMode::Validate, 42, 0, 0.0, &mut out, &mut code), QkStatus::Ok);
            assert_eq!(code, 0);
            reports.push(CStr::from_ptr(out).to_string_lossy().into_owned());
            qk_string_free(out);
        }
        assert_eq!(reports[0], reports[1]);
        assert!(reports[0].contains("\"within_ci\""));
        qk_model_free(model);

        let bad = CString::new("{\"models\":[").unwrap();
        assert_eq!(qk_model_parse(bad.as_ptr(), &mut model), QkStatus::Parse);
        let bad = CString::new(r#"{"models":[{"kind":"polling","lambda":[0.2],"b1":[1],"b2":[1],"s1":[1]}]}"#).unwrap();
        assert_eq!(qk_model_parse(bad.as_ptr(), &mut model), QkStatus::Schema);
        assert!(last_error().contains("s2"), "{}", last_error());
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(qk_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/queuekit.h")).unwrap();
    for name in ["qk_queue_new", "qk_polling_waits", "qk_model_run", "qk_string_free", "typedef struct QkQueue QkQueue", "QK_STATUS_UNSTABLE"] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// Compiles and runs a C program against the header and the static library.
#[test]
fn c_program_links() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libqueuekit_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: static library or C compiler unavailable");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let bin = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("qk_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
