//! C interface to the `krein` library.
//!
//! Objects cross the boundary as opaque handles created by `*_new` or by a solver and
//! released with the matching `*_free`. Every fallible call returns a [`KreinStatus`];
//! the message of the most recent failure on the calling thread is available from
//! [`krein_last_error`]. Panics are caught and reported as `KREIN_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use krein::inverse::{invert_measure_with, InverseConfig, PrecisionPolicy};
use krein::stieltjes::{spectral_data, string_measure, three_spectra_of};
use krein::three_spectra::{invert_triple_with, validate_triple};
use krein::{Atom, Error, Interval, SpectralMeasure, StieltjesString, ThreeSpectraTriple};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KreinStatus {
    Ok = 0,
    /// Input rejected: bad shape, non-positive values, not in the three-spectra class.
    InvalidInput = 1,
    /// Numerical failure: tolerance unreachable, precision exhausted, positivity lost.
    Numerical = 2,
    NullPointer = 3,
    /// Output buffer smaller than the object.
    BufferTooSmall = 4,
    Panic = 5,
}

/// Finite Stieltjes string.
pub struct KreinString(StieltjesString<f64>);
/// Finite spectral measure.
pub struct KreinMeasure(SpectralMeasure<f64>);
/// Three spectra with couplings.
pub struct KreinTriple(ThreeSpectraTriple);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(e: Error) -> KreinStatus {
    let status = if e.is_validation() { KreinStatus::InvalidInput } else { KreinStatus::Numerical };
    set_error(e.to_string());
    status
}

/// Runs `f`, converting panics into `KREIN_STATUS_PANIC`.
fn guard(f: impl FnOnce() -> Result<(), KreinStatus>) -> KreinStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KreinStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            KreinStatus::Panic
        }
    }
}

fn null() -> KreinStatus {
    set_error("null pointer argument".into());
    KreinStatus::NullPointer
}

unsafe fn input<'a>(p: *const f64, n: usize) -> Result<&'a [f64], KreinStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, KreinStatus> {
    p.as_ref().ok_or_else(null)
}

unsafe fn store<T>(out: *mut *mut T, v: T) -> Result<(), KreinStatus> {
    if out.is_null() {
        return Err(null());
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, cap: usize) -> Result<(), KreinStatus> {
    if src.is_empty() {
        return Ok(());
    }
    if dst.is_null() {
        return Err(null());
    }
    if cap < src.len() {
        set_error(format!("buffer holds {cap} values, {} needed", src.len()));
        return Err(KreinStatus::BufferTooSmall);
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

fn interval(a: f64, b: f64) -> Result<Interval, KreinStatus> {
    Interval::new(a, b).map_err(fail)
}

fn config(precision_bits: usize) -> InverseConfig {
    let mut cfg = InverseConfig::default();
    if precision_bits > 0 {
        cfg.precision = PrecisionPolicy::Bits(precision_bits);
    }
    cfg
}

/// Message of the last failure on this thread; empty if none. Valid until the next call
/// into this library from the same thread.
#[no_mangle]
pub extern "C" fn krein_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// String with `n` masses at `positions` on `(a, b)`.
///
/// # Safety
/// `positions` and `masses` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krein_string_new(
    a: f64,
    b: f64,
    positions: *const f64,
    masses: *const f64,
    n: usize,
    out: *mut *mut KreinString,
) -> KreinStatus {
    guard(|| {
        let xs = input(positions, n)?;
        let ms = input(masses, n)?;
        let atoms: Vec<(f64, f64)> = xs.iter().copied().zip(ms.iter().copied()).collect();
        let s = StieltjesString::from_masses(interval(a, b)?, &atoms).map_err(fail)?;
        store(out, KreinString(s))
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn krein_string_free(s: *mut KreinString) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of masses, or 0 for null.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn krein_string_len(s: *const KreinString) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// Copies positions and masses into buffers of `capacity` doubles each.
///
/// # Safety
/// `s` must be a live handle; the buffers must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn krein_string_get(
    s: *const KreinString,
    positions: *mut f64,
    masses: *mut f64,
    capacity: usize,
) -> KreinStatus {
    guard(|| {
        let s = &handle(s)?.0;
        copy_out(s.positions(), positions, capacity)?;
        copy_out(s.masses(), masses, capacity)
    })
}

/// Spectral data: eigenvalues, norming constants `γ²`, couplings and signs `θ`, each
/// written to a buffer of `capacity` entries. `len` receives the number of eigenvalues.
///
/// # Safety
/// `s` must be a live handle; the buffers must hold `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn krein_spectral_data(
    s: *const KreinString,
    lambdas: *mut f64,
    gamma_sq: *mut f64,
    couplings: *mut f64,
    theta: *mut u8,
    capacity: usize,
    len: *mut usize,
) -> KreinStatus {
    guard(|| {
        let s = &handle(s)?.0;
        let data = spectral_data(s);
        if len.is_null() {
            return Err(null());
        }
        *len = data.len();
        let col = |f: fn(&krein::SpectralTriplet<f64>) -> f64| data.iter().map(f).collect::<Vec<_>>();
        copy_out(&col(|t| t.lambda), lambdas, capacity)?;
        copy_out(&col(|t| t.gamma_sq), gamma_sq, capacity)?;
        copy_out(&col(|t| t.coupling), couplings, capacity)?;
        if !data.is_empty() {
            if theta.is_null() {
                return Err(null());
            }
            for (k, t) in data.iter().enumerate() {
                *theta.add(k) = t.theta;
            }
        }
        Ok(())
    })
}

/// Measure with `n` atoms `weights[k] δ_{lambdas[k]}`, for strings on `(a, b)`.
///
/// # Safety
/// `lambdas` and `weights` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krein_measure_new(
    a: f64,
    b: f64,
    lambdas: *const f64,
    weights: *const f64,
    n: usize,
    out: *mut *mut KreinMeasure,
) -> KreinStatus {
    guard(|| {
        let ls = input(lambdas, n)?;
        let ws = input(weights, n)?;
        let atoms = ls.iter().zip(ws).map(|(&lambda, &weight)| Atom { lambda, weight }).collect();
        let m = SpectralMeasure::new(interval(a, b)?, atoms).map_err(fail)?;
        store(out, KreinMeasure(m))
    })
}

/// # Safety
/// `m` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn krein_measure_free(m: *mut KreinMeasure) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn krein_measure_len(m: *const KreinMeasure) -> usize {
    m.as_ref().map_or(0, |m| m.0.len())
}

/// # Safety
/// `m` must be a live handle; the buffers must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn krein_measure_get(
    m: *const KreinMeasure,
    lambdas: *mut f64,
    weights: *mut f64,
    capacity: usize,
) -> KreinStatus {
    guard(|| {
        let m = &handle(m)?.0;
        let ls: Vec<f64> = m.atoms().iter().map(|a| a.lambda).collect();
        let ws: Vec<f64> = m.atoms().iter().map(|a| a.weight).collect();
        copy_out(&ls, lambdas, capacity)?;
        copy_out(&ws, weights, capacity)
    })
}

/// Spectral measure of a string.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krein_string_measure(s: *const KreinString, out: *mut *mut KreinMeasure) -> KreinStatus {
    guard(|| {
        let m = string_measure(&handle(s)?.0).map_err(fail)?;
        store(out, KreinMeasure(m))
    })
}

/// String whose spectral measure is `m`. `precision_bits == 0` selects the automatic policy.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krein_invert_measure(
    m: *const KreinMeasure,
    precision_bits: usize,
    out: *mut *mut KreinString,
) -> KreinStatus {
    guard(|| {
        let m = &handle(m)?.0;
        let r = invert_measure_with(m, m.interval(), &config(precision_bits)).map_err(fail)?;
        store(out, KreinString(r.string))
    })
}

/// Triple on `(a, b)` split at `c`; `coupling_lambdas[k]` carries `coupling_values[k]`.
///
/// # Safety
/// Every array must hold the stated number of readable doubles; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn krein_triple_new(
    a: f64,
    b: f64,
    c: f64,
    sigma: *const f64,
    n_sigma: usize,
    sigma_a: *const f64,
    n_sigma_a: usize,
    sigma_b: *const f64,
    n_sigma_b: usize,
    coupling_lambdas: *const f64,
    coupling_values: *const f64,
    n_couplings: usize,
    out: *mut *mut KreinTriple,
) -> KreinStatus {
    guard(|| {
        let t = ThreeSpectraTriple {
            interval: interval(a, b)?,
            split: c,
            sigma: input(sigma, n_sigma)?.to_vec(),
            sigma_a: input(sigma_a, n_sigma_a)?.to_vec(),
            sigma_b: input(sigma_b, n_sigma_b)?.to_vec(),
            couplings: input(coupling_lambdas, n_couplings)?
                .iter()
                .copied()
                .zip(input(coupling_values, n_couplings)?.iter().copied())
                .collect(),
        };
        t.check_shape().map_err(fail)?;
        store(out, KreinTriple(t))
    })
}

/// # Safety
/// `t` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn krein_triple_free(t: *mut KreinTriple) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Sizes of `σ`, `σ_a`, `σ_b` and the coupling list.
///
/// # Safety
/// `t` must be a live handle; `sizes` must hold 4 entries.
#[no_mangle]
pub unsafe extern "C" fn krein_triple_sizes(t: *const KreinTriple, sizes: *mut usize) -> KreinStatus {
    guard(|| {
        let t = &handle(t)?.0;
        if sizes.is_null() {
            return Err(null());
        }
        for (k, n) in [t.sigma.len(), t.sigma_a.len(), t.sigma_b.len(), t.couplings.len()].into_iter().enumerate() {
            *sizes.add(k) = n;
        }
        Ok(())
    })
}

/// Copies the three spectra and the couplings; each buffer holds `capacity` doubles.
///
/// # Safety
/// `t` must be a live handle; the buffers must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn krein_triple_get(
    t: *const KreinTriple,
    sigma: *mut f64,
    sigma_a: *mut f64,
    sigma_b: *mut f64,
    coupling_lambdas: *mut f64,
    coupling_values: *mut f64,
    capacity: usize,
) -> KreinStatus {
    guard(|| {
        let t = &handle(t)?.0;
        copy_out(&t.sigma, sigma, capacity)?;
        copy_out(&t.sigma_a, sigma_a, capacity)?;
        copy_out(&t.sigma_b, sigma_b, capacity)?;
        let (ls, cs): (Vec<f64>, Vec<f64>) = t.couplings.iter().copied().unzip();
        copy_out(&ls, coupling_lambdas, capacity)?;
        copy_out(&cs, coupling_values, capacity)
    })
}

/// Three spectra of a string split at `c`.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krein_three_spectra(s: *const KreinString, c: f64, out: *mut *mut KreinTriple) -> KreinStatus {
    guard(|| {
        let t = three_spectra_of(&handle(s)?.0, c).map_err(fail)?;
        store(out, KreinTriple(t))
    })
}

/// Writes 1 to `member` for class members and 0 otherwise.
///
/// # Safety
/// `t` must be a live handle; `member` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krein_validate_triple(t: *const KreinTriple, member: *mut i32) -> KreinStatus {
    guard(|| {
        let v = validate_triple(&handle(t)?.0).map_err(fail)?;
        if member.is_null() {
            return Err(null());
        }
        *member = i32::from(v.member);
        if !v.member {
            set_error(format!("{:?}", v.violations));
        }
        Ok(())
    })
}

/// String reproducing the triple. `precision_bits == 0` selects the automatic policy.
///
/// # Safety
/// `t` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krein_invert_triple(
    t: *const KreinTriple,
    precision_bits: usize,
    out: *mut *mut KreinString,
) -> KreinStatus {
    guard(|| {
        let r = invert_triple_with(&handle(t)?.0, &config(precision_bits)).map_err(fail)?;
        store(out, KreinString(r.inversion.string))
    })
}

/// Weak-star distance between two strings on the same interval.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krein_weakstar_distance(
    s1: *const KreinString,
    s2: *const KreinString,
    out: *mut f64,
) -> KreinStatus {
    guard(|| {
        let w1 = handle(s1)?.0.to_mass_distribution();
        let w2 = handle(s2)?.0.to_mass_distribution();
        let d = krein::convergence::weakstar_distance(&w1, &w2).map_err(fail)?;
        if out.is_null() {
            return Err(null());
        }
        *out = d;
        Ok(())
    })
}
