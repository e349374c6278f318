use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use adiafactor_ffi::*;

fn run(config: *mut AfConfig) -> (AfStatus, *mut AfReport) {
    let mut out = ptr::null_mut();
    let st = unsafe { af_factor(config, &mut out) };
    (st, out)
}

#[test]
fn factors_35_in_sigma_z_mode() {
    let cfg = af_config_new(35);
    unsafe {
        assert_eq!(af_config_set_mode(cfg, AfMode::PaperCompat), AfStatus::Ok);
        assert_eq!(af_config_set_encoding(cfg, AfEncoding::PaperCompat), AfStatus::Ok);
    }
    let (st, report) = run(cfg);
    assert_eq!(st, AfStatus::Ok);
    let (mut p, mut q) = (0u64, 0u64);
    unsafe {
        assert_eq!(af_report_factors(report, &mut p, &mut q), AfStatus::Ok);
        let json = af_report_json(report);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["residuals"][0], "p1 + q1 = 1");
        af_string_free(json);
        af_report_free(report);
        af_config_free(cfg);
    }
    assert_eq!((p, q), (5, 7));
}

#[test]
fn transverse_default_factors_143() {
    let cfg = af_config_new(143);
    unsafe { af_config_set_seed(cfg, 9) };
    let (st, report) = run(cfg);
    assert_eq!(st, AfStatus::Ok);
    let (mut p, mut q) = (0u64, 0u64);
    unsafe {
        af_report_factors(report, &mut p, &mut q);
        af_report_free(report);
        af_config_free(cfg);
    }
    assert_eq!((p, q), (11, 13));
}

#[test]
fn error_codes_and_messages() {
    let cfg = af_config_new(36);
    let (st, report) = run(cfg);
    assert_eq!(st, AfStatus::InvalidInput);
    assert!(report.is_null());
    let msg = unsafe { CStr::from_ptr(af_last_error_message()) }.to_str().unwrap();
    assert!(msg.contains("36"), "{msg}");
    unsafe { af_config_free(cfg) };

    let cfg = af_config_new(35);
    unsafe { af_config_set_shots(cfg, 0) };
    assert_eq!(run(cfg).0, AfStatus::InvalidInput);
    unsafe { af_config_free(cfg) };

    // 3·5·7: the first consistent split lifts to a composite factor
    let cfg = af_config_new(105);
    assert_eq!(run(cfg).0, AfStatus::NoSplitConsistent);
    unsafe { af_config_free(cfg) };
}

#[test]
fn null_arguments() {
    unsafe {
        assert_eq!(af_config_set_seed(ptr::null_mut(), 1), AfStatus::NullArgument);
        let mut out = ptr::null_mut();
        assert_eq!(af_factor(ptr::null(), &mut out), AfStatus::NullArgument);
        let cfg = af_config_new(15);
        assert_eq!(af_factor(cfg, ptr::null_mut()), AfStatus::NullArgument);
        assert_eq!(
            af_report_factors(ptr::null(), ptr::null_mut(), ptr::null_mut()),
            AfStatus::NullArgument
        );
        assert!(af_report_json(ptr::null()).is_null());
        af_report_free(ptr::null_mut());
        af_string_free(ptr::null_mut());
        af_config_free(ptr::null_mut());
        af_config_free(cfg);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(af_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/adiafactor.h")).unwrap();
    for name in [
        "af_config_new",
        "af_config_free",
        "af_config_set_mode",
        "af_config_set_encoding",
        "af_config_set_schedule",
        "af_config_set_coupling",
        "af_config_set_shots",
        "af_config_set_seed",
        "af_factor",
        "af_report_factors",
        "af_report_json",
        "af_string_free",
        "af_report_free",
        "af_last_error_message",
        "af_version",
        "typedef struct AfConfig AfConfig",
        "AfStatus_NullArgument = 5",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

/// Compiles a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libadiafactor_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new(&cc)
        .arg(dir.join("tests/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "5 7");
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
        {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
