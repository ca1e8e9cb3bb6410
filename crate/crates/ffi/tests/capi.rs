use std::ffi::{c_char, CStr};
use std::ptr;

use circkde_ffi::*;

fn sample(angles: &[f64]) -> *mut CkSample {
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { ck_sample_new(angles.as_ptr(), angles.len(), &mut s) },
        CkStatus::Ok
    );
    assert!(!s.is_null());
    s
}

fn cluster() -> Vec<f64> {
    (0..80)
        .map(|i| 0.6 * ((i as f64) * 0.37).sin() + 0.2 * ((i as f64) * 1.3).cos())
        .collect()
}

fn last_error() -> String {
    let p = ck_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn select_round_trip() {
    let s = sample(&cluster());
    assert_eq!(unsafe { ck_sample_len(s) }, 80);
    let opts = ck_selector_options_default();
    let mut sel = CkSelection::default();
    assert_eq!(
        unsafe { ck_select(s, CkMethod::Dpi, &opts, &mut sel) },
        CkStatus::Ok
    );
    assert!(sel.nu > 0.0 && sel.nu < 1.0 && !sel.fallback_uniform);
    assert!(sel.kappa_or_lambda > 0.0);

    let mut h = 0.0;
    assert_eq!(
        unsafe { ck_bandwidth_h(CkKernel::VonMises, sel.nu, &mut h) },
        CkStatus::Ok
    );
    assert!((h - sel.h).abs() < 1e-9);

    let mut json: *mut c_char = ptr::null_mut();
    assert_eq!(
        unsafe { ck_select_json(s, CkMethod::Dpi, ptr::null(), &mut json) },
        CkStatus::Ok
    );
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { ck_string_free(json) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["method"], "dpi");
    assert!((v["nu"].as_f64().unwrap() - sel.nu).abs() < 1e-15);
    assert!(v["trace"].as_array().unwrap().len() >= 3);
    unsafe { ck_sample_free(s) };
}

#[test]
fn kde_matches_core() {
    let angles = cluster();
    let s = sample(&angles);
    let thetas: Vec<f64> = (0..16).map(|i| -3.0 + 0.4 * i as f64).collect();
    let mut out = vec![0.0; thetas.len()];
    let st = unsafe {
        ck_kde(
            s,
            CkKernel::VonMises,
            0.8,
            1,
            thetas.as_ptr(),
            thetas.len(),
            out.as_mut_ptr(),
        )
    };
    assert_eq!(st, CkStatus::Ok);
    let core = circkde::estimators::CircularSample::new(angles).unwrap();
    let k =
        circkde::kernels::KernelSpec::new(circkde::kernels::KernelFamily::VonMises, 0.8).unwrap();
    let grid = circkde::estimators::kde_deriv(&core, &k, 1, &thetas).unwrap();
    assert_eq!(grid.values, out);
    unsafe { ck_sample_free(s) };
}

#[test]
fn errors_are_reported() {
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { ck_sample_new(ptr::null(), 3, &mut s) },
        CkStatus::NullPointer
    );
    assert!(s.is_null());
    let bad = [0.0, f64::NAN];
    assert_eq!(
        unsafe { ck_sample_new(bad.as_ptr(), 2, &mut s) },
        CkStatus::InvalidArgument
    );
    assert!(!last_error().is_empty());

    let mut h = 0.0;
    assert_eq!(
        unsafe { ck_bandwidth_h(CkKernel::VonMises, 1.5, &mut h) },
        CkStatus::InvalidArgument
    );

    let good = sample(&cluster());
    let mut opts = ck_selector_options_default();
    opts.pilot = CkKernel::Cardioid;
    let mut sel = CkSelection::default();
    assert_eq!(
        unsafe { ck_select(good, CkMethod::Rt, &opts, &mut sel) },
        CkStatus::Unsupported
    );
    assert!(last_error().contains("pilot"));
    let name = unsafe { CStr::from_ptr(ck_status_name(CkStatus::Unsupported)) };
    assert_eq!(name.to_str().unwrap(), "unsupported");
    unsafe { ck_sample_free(good) };
    unsafe { ck_sample_free(ptr::null_mut()) };
    assert_eq!(unsafe { ck_sample_len(ptr::null()) }, 0);
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/circkde.h");
    for f in [
        "ck_last_error_message",
        "ck_version",
        "ck_sample_new",
        "ck_sample_free",
        "ck_sample_len",
        "ck_selector_options_default",
        "ck_select",
        "ck_select_json",
        "ck_string_free",
        "ck_bandwidth_h",
        "ck_kde",
        "ck_status_name",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f}");
    }
    assert!(header.contains("typedef struct CkSample CkSample;"));
    assert!(header.contains("CK_STATUS_OK = 0"));
    let v = unsafe { CStr::from_ptr(ck_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let dir = std::env::temp_dir().join(format!("circkde-header-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("use.c");
    std::fs::write(
        &src,
        "#include \"circkde.h\"\n\
         int use(const double *x, size_t n) {\n\
           CkSample *s = NULL;\n\
           CkSelection sel;\n\
           CkSelectorOptions o = ck_selector_options_default();\n\
           if (ck_sample_new(x, n, &s) != CK_STATUS_OK) return 1;\n\
           CkStatus st = ck_select(s, CK_METHOD_DPI, &o, &sel);\n\
           ck_sample_free(s);\n\
           return st == CK_STATUS_OK ? 0 : (int)st;\n\
         }\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let status = std::process::Command::new("cc")
        .args([
            "-std=c99",
            "-Wall",
            "-Werror",
            "-fsyntax-only",
            "-I",
            include,
        ])
        .arg(&src)
        .status();
    std::fs::remove_dir_all(&dir).ok();
    match status {
        Ok(s) => assert!(s.success(), "header failed to compile"),
        Err(e) => eprintln!("no C compiler available, skipping: {e}"),
    }
}
