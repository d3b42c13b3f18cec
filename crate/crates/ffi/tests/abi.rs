use std::ffi::{c_char, c_int, CStr, CString};
use std::process::Command;
use std::ptr;

use fellgeom_ffi::*;

fn last_error() -> String {
    let p = fg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(name: &str) -> *mut FgModel {
    let name = CString::new(name).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { fg_model_load(name.as_ptr(), &mut m) },
        FgStatus::Ok
    );
    assert!(!m.is_null());
    m
}

#[test]
fn load_query_free() {
    let m = load("one_generation");
    let (mut dim, mut objects) = (0usize, 0usize);
    unsafe {
        assert_eq!(fg_model_dimension(m, &mut dim), FgStatus::Ok);
        assert_eq!(fg_model_object_count(m, &mut objects), FgStatus::Ok);
        fg_model_free(m);
    }
    assert_eq!((dim, objects), (30, 8));
}

#[test]
fn dirac_copy_and_action_agree() {
    let m = load("two_point");
    let mut dim = 0usize;
    unsafe { fg_model_dimension(m, &mut dim) };
    let mut re = vec![0.0; dim * dim];
    let mut im = vec![0.0; dim * dim];

    let short = unsafe { fg_model_dirac(m, re.as_mut_ptr(), im.as_mut_ptr(), 1) };
    assert_eq!(short, FgStatus::BufferTooSmall);
    assert!(last_error().contains("need 4"));

    assert_eq!(
        unsafe { fg_model_dirac(m, re.as_mut_ptr(), im.as_mut_ptr(), re.len()) },
        FgStatus::Ok
    );
    assert!(fg_last_error().is_null());
    // Tr D² is the squared Frobenius norm.
    let frob: f64 = re.iter().chain(&im).map(|x| x * x).sum();
    let f = CString::new("x2").unwrap();
    let mut action = 0.0;
    assert_eq!(
        unsafe { fg_model_spectral_action(m, f.as_ptr(), &mut action) },
        FgStatus::Ok
    );
    assert!((action - frob).abs() < 1e-12 * frob.max(1.0));

    let bad = CString::new("x3").unwrap();
    assert_eq!(
        unsafe { fg_model_spectral_action(m, bad.as_ptr(), &mut action) },
        FgStatus::Config
    );
    unsafe { fg_model_free(m) };
}

#[test]
fn error_codes() {
    let mut m = ptr::null_mut();
    let missing = CString::new("no_such_geometry").unwrap();
    assert_eq!(
        unsafe { fg_model_load(missing.as_ptr(), &mut m) },
        FgStatus::Config
    );
    assert!(m.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(
        unsafe { fg_model_load(ptr::null(), &mut m) },
        FgStatus::NullPointer
    );
    let mut dim = 0usize;
    assert_eq!(
        unsafe { fg_model_dimension(ptr::null(), &mut dim) },
        FgStatus::NullPointer
    );

    let bad_utf8 = [0xffu8 as c_char, 0];
    assert_eq!(
        unsafe { fg_model_from_toml(bad_utf8.as_ptr(), &mut m) },
        FgStatus::InvalidUtf8
    );
    let broken = CString::new("name = \"x\"\nobjects = 3\n").unwrap();
    assert_eq!(
        unsafe { fg_model_from_toml(broken.as_ptr(), &mut m) },
        FgStatus::Config
    );
    assert!(last_error().starts_with("line "));
    unsafe { fg_model_free(ptr::null_mut()) };
}

#[test]
fn run_returns_report_and_exit_code() {
    let args: Vec<CString> = ["partition", "two_point"]
        .iter()
        .map(|s| CString::new(*s).unwrap())
        .collect();
    let argv: Vec<*const c_char> = args.iter().map(|a| a.as_ptr()).collect();
    let mut code: c_int = -1;
    let (mut out, mut err) = (ptr::null_mut(), ptr::null_mut());
    let st = unsafe { fg_run(argv.as_ptr(), argv.len(), &mut code, &mut out, &mut err) };
    assert_eq!(st, FgStatus::Ok);
    assert_eq!(code, 0);
    let text = unsafe { CStr::from_ptr(out) }
        .to_string_lossy()
        .into_owned();
    assert!(text.contains("status: pass"), "{text}");
    unsafe {
        fg_string_free(out);
        fg_string_free(err);
    }

    // The inverted continuation is only wrong for a non-tracial state.
    let args: Vec<CString> = [
        "kms",
        "qubit",
        "--state",
        "thermal",
        "--continuation",
        "inverted",
    ]
    .iter()
    .map(|s| CString::new(*s).unwrap())
    .collect();
    let argv: Vec<*const c_char> = args.iter().map(|a| a.as_ptr()).collect();
    let st = unsafe {
        fg_run(
            argv.as_ptr(),
            argv.len(),
            &mut code,
            ptr::null_mut(),
            ptr::null_mut(),
        )
    };
    assert_eq!(st, FgStatus::Ok);
    assert_eq!(code, 1);
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(fg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// The generated header must be valid C and C++.
#[test]
fn header_compiles() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/fellgeom.h");
    for (cc, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, header])
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{cc} rejected the header"),
            Err(e) => eprintln!("skipping {cc}: {e}"),
        }
    }
}
