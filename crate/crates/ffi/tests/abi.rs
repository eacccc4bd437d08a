use std::ffi::CStr;
use std::ptr;

use krein_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(krein_last_error()) }.to_string_lossy().into_owned()
}

fn f2() -> *mut KreinString {
    let xs = [1.0 / 3.0, 2.0 / 3.0];
    let ms = [1.0, 1.0];
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { krein_string_new(0.0, 1.0, xs.as_ptr(), ms.as_ptr(), 2, &mut s) }, KreinStatus::Ok);
    s
}

#[test]
fn forward_data_of_two_masses() {
    let s = f2();
    let (mut l, mut g, mut c, mut th, mut n) = ([0.0; 4], [0.0; 4], [0.0; 4], [0u8; 4], 0usize);
    let st = unsafe {
        krein_spectral_data(s, l.as_mut_ptr(), g.as_mut_ptr(), c.as_mut_ptr(), th.as_mut_ptr(), 4, &mut n)
    };
    assert_eq!(st, KreinStatus::Ok);
    assert_eq!(n, 2);
    assert!((l[0] - 3.0).abs() < 1e-12 && (l[1] - 9.0).abs() < 1e-12);
    assert!((g[0] - 2.0 / 9.0).abs() < 1e-12 && (g[1] - 2.0 / 9.0).abs() < 1e-12);
    assert_eq!(&th[..2], &[0, 1]);
    unsafe { krein_string_free(s) };
}

#[test]
fn measure_round_trip() {
    let s = f2();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { krein_string_measure(s, &mut m) }, KreinStatus::Ok);
    assert_eq!(unsafe { krein_measure_len(m) }, 2);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { krein_invert_measure(m, 0, &mut back) }, KreinStatus::Ok);
    let (mut xs, mut ms) = ([0.0; 2], [0.0; 2]);
    assert_eq!(unsafe { krein_string_get(back, xs.as_mut_ptr(), ms.as_mut_ptr(), 2) }, KreinStatus::Ok);
    assert!((xs[0] - 1.0 / 3.0).abs() < 1e-12 && (ms[1] - 1.0).abs() < 1e-12);
    let mut d = f64::NAN;
    assert_eq!(unsafe { krein_weakstar_distance(s, back, &mut d) }, KreinStatus::Ok);
    assert!(d < 1e-10);
    unsafe {
        krein_string_free(back);
        krein_measure_free(m);
        krein_string_free(s);
    }
}

#[test]
fn triple_validation_and_inversion() {
    let s = f2();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { krein_three_spectra(s, 0.5, &mut t) }, KreinStatus::Ok);
    let mut sizes = [0usize; 4];
    assert_eq!(unsafe { krein_triple_sizes(t, sizes.as_mut_ptr()) }, KreinStatus::Ok);
    assert_eq!(sizes, [2, 1, 1, 1]);
    let mut member = -1;
    assert_eq!(unsafe { krein_validate_triple(t, &mut member) }, KreinStatus::Ok);
    assert_eq!(member, 1);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { krein_invert_triple(t, 0, &mut r) }, KreinStatus::Ok);
    assert_eq!(unsafe { krein_string_len(r) }, 2);

    let (sig, sa) = ([4.0], [2.0]);
    let mut bad = ptr::null_mut();
    let st = unsafe {
        krein_triple_new(0.0, 1.0, 0.5, sig.as_ptr(), 1, sa.as_ptr(), 1, ptr::null(), 0, ptr::null(), ptr::null(), 0, &mut bad)
    };
    assert_eq!(st, KreinStatus::Ok);
    assert_eq!(unsafe { krein_validate_triple(bad, &mut member) }, KreinStatus::Ok);
    assert_eq!(member, 0);
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { krein_invert_triple(bad, 0, &mut none) }, KreinStatus::InvalidInput);
    assert!(none.is_null());
    assert!(!last_error().is_empty());
    unsafe {
        krein_triple_free(bad);
        krein_string_free(r);
        krein_triple_free(t);
        krein_string_free(s);
    }
}

#[test]
fn errors_are_reported() {
    let mut s = ptr::null_mut();
    let xs = [1.5];
    let ms = [1.0];
    assert_eq!(unsafe { krein_string_new(0.0, 1.0, xs.as_ptr(), ms.as_ptr(), 1, &mut s) }, KreinStatus::InvalidInput);
    assert!(last_error().contains("invalid"));
    assert_eq!(unsafe { krein_string_new(0.0, 1.0, ptr::null(), ms.as_ptr(), 1, &mut s) }, KreinStatus::NullPointer);
    let s = f2();
    let mut one = [0.0; 1];
    let st = unsafe { krein_string_get(s, one.as_mut_ptr(), one.as_mut_ptr(), 1) };
    assert_eq!(st, KreinStatus::BufferTooSmall);
    unsafe { krein_string_free(s) };
    unsafe { krein_string_free(ptr::null_mut()) };
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/krein.h");
    let text = std::fs::read_to_string(header).expect("generated header");
    for name in ["krein_string_new", "krein_invert_triple", "KREIN_STATUS_OK", "typedef struct KreinString KreinString"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(out) = std::process::Command::new("cc").args(["-fsyntax-only", "-x", "c", header]).output() else {
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
