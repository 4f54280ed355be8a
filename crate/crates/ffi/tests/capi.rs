use std::ffi::{c_char, CStr};
use std::ptr;

use tsarrow_ffi::*;

fn last_error() -> String {
    let p = tsa_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn simulated(r: f64, seed: u64) -> *mut TsaSeries {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { tsa_simulate(2, 1, 1000, r, seed, &mut s) }, TsaStatus::Ok);
    s
}

#[test]
fn series_round_trip() {
    let data = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(tsa_series_new(data.as_ptr(), 3, 2, &mut s), TsaStatus::Ok);
        assert_eq!(tsa_series_rows(s), 3);
        assert_eq!(tsa_series_cols(s), 2);
        let mut buf = [0.0; 6];
        assert_eq!(tsa_series_copy(s, buf.as_mut_ptr(), 6), TsaStatus::Ok);
        assert_eq!(buf, data);
        assert_eq!(tsa_series_copy(s, buf.as_mut_ptr(), 5), TsaStatus::InvalidArgument);
        tsa_series_free(s);
    }
}

#[test]
fn rejects_bad_input() {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(tsa_series_new(ptr::null(), 3, 2, &mut s), TsaStatus::NullPointer);
        assert!(last_error().contains("data"));
        let nan = [1.0, f64::NAN];
        assert_eq!(tsa_series_new(nan.as_ptr(), 1, 2, &mut s), TsaStatus::InvalidArgument);
        assert!(s.is_null());
        assert_eq!(tsa_simulate(2, 1, 100, -1.0, 0, &mut s), TsaStatus::InvalidArgument);
        // null handles are tolerated by free and accessors
        tsa_series_free(ptr::null_mut());
        tsa_report_free(ptr::null_mut());
        tsa_string_free(ptr::null_mut());
        assert_eq!(tsa_series_rows(ptr::null()), 0);
        assert_eq!(tsa_report_verdict(ptr::null()), TsaVerdict::Undecided);
        assert!(tsa_report_fw_score(ptr::null()).is_nan());
    }
}

#[test]
fn detects_direction() {
    let s = simulated(0.25, 7);
    unsafe {
        let opts = tsa_detect_options_default();
        let mut rep = ptr::null_mut();
        assert_eq!(tsa_detect(s, &opts, &mut rep), TsaStatus::Ok);
        let fw = tsa_report_fw_score(rep);
        let bw = tsa_report_bw_score(rep);
        assert!((0.0..=1.0).contains(&fw) && (0.0..=1.0).contains(&bw));
        assert!(tsa_report_order(rep) >= 1);

        let mut json: *mut c_char = ptr::null_mut();
        assert_eq!(tsa_report_to_json(rep, &mut json), TsaStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        tsa_string_free(json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let verdict = match tsa_report_verdict(rep) {
            TsaVerdict::Forward => "forward",
            TsaVerdict::Backward => "backward",
            TsaVerdict::Undecided => "undecided",
        };
        assert_eq!(v["verdict"], verdict);
        tsa_report_free(rep);
        tsa_series_free(s);
    }
}

#[test]
fn null_options_match_defaults() {
    let s = simulated(2.0, 3);
    unsafe {
        let opts = tsa_detect_options_default();
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(tsa_detect(s, &opts, &mut a), TsaStatus::Ok);
        assert_eq!(tsa_detect(s, ptr::null(), &mut b), TsaStatus::Ok);
        assert_eq!(tsa_report_fw_score(a), tsa_report_fw_score(b));
        assert_eq!(tsa_report_bw_score(a), tsa_report_bw_score(b));
        tsa_report_free(a);
        tsa_report_free(b);
        tsa_series_free(s);
    }
}

#[test]
fn invalid_options_and_short_series() {
    let s = simulated(0.5, 1);
    unsafe {
        let mut opts = tsa_detect_options_default();
        opts.sig2 = 0.5;
        let mut rep = ptr::null_mut();
        assert_eq!(tsa_detect(s, &opts, &mut rep), TsaStatus::InvalidArgument);
        assert!(last_error().contains("sig2"));
        tsa_series_free(s);

        let short = [0.1, 0.4, -0.3, 0.2, 0.9];
        let mut t = ptr::null_mut();
        assert_eq!(tsa_series_new(short.as_ptr(), 5, 1, &mut t), TsaStatus::Ok);
        assert_eq!(tsa_detect(t, ptr::null(), &mut rep), TsaStatus::InsufficientLength);
        tsa_series_free(t);
    }
}

#[test]
fn hsic_of_dependent_and_independent_pairs() {
    let x = simulated(1.0, 11);
    let y = simulated(1.0, 12);
    unsafe {
        let (mut stat, mut p) = (0.0, 0.0);
        assert_eq!(tsa_hsic(x, y, &mut stat, &mut p), TsaStatus::Ok);
        assert!(stat >= 0.0 && p > 0.001);
        assert_eq!(tsa_hsic(x, x, &mut stat, &mut p), TsaStatus::Ok);
        assert!(p < 1e-6);
        let mut only = 0.0;
        assert_eq!(tsa_hsic(x, x, &mut only, ptr::null_mut()), TsaStatus::Ok);
        assert_eq!(only, stat);
        tsa_series_free(x);
        tsa_series_free(y);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/tsarrow.h")).unwrap();
    for name in [
        "tsa_last_error_message",
        "tsa_series_new",
        "tsa_series_free",
        "tsa_series_copy",
        "tsa_simulate",
        "tsa_detect_options_default",
        "tsa_detect",
        "tsa_report_verdict",
        "tsa_report_to_json",
        "tsa_string_free",
        "tsa_hsic",
        "typedef struct TsaSeries TsaSeries",
        "TSA_STATUS_PANIC = 99",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles a C program against the generated header and the shared library.
/// Skipped when no C compiler or no built cdylib is available.
#[test]
fn c_program_links_and_runs() {
    use std::path::PathBuf;
    use std::process::Command;

    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join(if cfg!(target_os = "macos") {
        "libtsarrow_ffi.dylib"
    } else {
        "libtsarrow_ffi.so"
    });
    if !cfg!(unix) || !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping C smoke test (no cc or {} missing)", lib.display());
        return;
    }
    let dir = tempfile::TempDir::new().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(&profile_dir)
        .arg("-ltsarrow_ffi")
        .arg(format!("-Wl,-rpath,{}", profile_dir.display()))
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fields: Vec<String> = String::from_utf8(out.stdout)
        .unwrap()
        .split_whitespace()
        .map(String::from)
        .collect();
    assert_eq!(fields.len(), 4);
}
