//! Forward problem for finite Stieltjes strings.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::herglotz::RationalHerglotz;
use crate::model::{Atom, SpectralMeasure, SpectralTriplet, StieltjesString, ThreeSpectraTriple};
use crate::poly::Polynomial;
use crate::scalar::{Bits, Field, Mpf, Real};

/// Values of `φ_a(z, ·)` at the masses.
#[derive(Clone, Debug)]
pub struct PhiNodes<T> {
    /// `φ_a(z, x_j)`.
    pub values: Vec<T>,
    /// Left derivatives `φ_a'(z, x_j-)`.
    pub slopes: Vec<T>,
    /// `φ_a(z, b) = W(z)`.
    pub end_value: T,
    /// `φ_a'(z, b)`.
    pub end_slope: T,
}

/// Runs the transfer recurrence for `φ_a` (value `0`, slope `1` at `a`).
pub fn transfer_phi<T: Field>(s: &StieltjesString<T>, z: &T) -> PhiNodes<T> {
    let l = s.lengths();
    let m = s.masses();
    let mut values = Vec::with_capacity(s.len());
    let mut slopes = Vec::with_capacity(s.len());
    let mut u = l[0].clone();
    let mut slope = l[0].lit(1.0);
    for j in 0..s.len() {
        values.push(u.clone());
        slopes.push(slope.clone());
        slope = slope - z.clone() * m[j].clone() * u.clone();
        u = u + l[j + 1].clone() * slope.clone();
    }
    PhiNodes { values, slopes, end_value: u, end_slope: slope }
}

/// `φ_a(z, b)` for complex `z`.
pub fn wronskian_complex(s: &StieltjesString<f64>, z: Complex64) -> Complex64 {
    let l = s.lengths();
    let m = s.masses();
    let mut u = Complex64::new(l[0], 0.0);
    let mut slope = Complex64::new(1.0, 0.0);
    for j in 0..s.len() {
        slope -= z * m[j] * u;
        u += l[j + 1] * slope;
    }
    u
}

/// `φ_a(z, x)` and its left derivative for complex `z` and `x ∈ [a, b]`.
pub fn phi_a_complex(s: &StieltjesString<f64>, z: Complex64, x: f64) -> (Complex64, Complex64) {
    let a = s.interval().a;
    let mut pos = a;
    let mut u = Complex64::new(0.0, 0.0);
    let mut slope = Complex64::new(1.0, 0.0);
    for (&xj, &mj) in s.positions().iter().zip(s.masses()) {
        if xj >= x {
            break;
        }
        u += (xj - pos) * slope;
        slope -= z * mj * u;
        pos = xj;
    }
    (u + (x - pos) * slope, slope)
}

/// Stable pivots of `J - x M` where `J = L D Lᵀ` is the stiffness matrix of the string.
struct Pivots<T> {
    d: Vec<T>,
    c: Vec<T>,
    m: Vec<T>,
}

impl<T: Real> Pivots<T> {
    fn new(s: &StieltjesString<T>) -> Self {
        let l = s.lengths();
        let p = s.left_offsets();
        let n = s.len();
        let mut d = Vec::with_capacity(n);
        let mut c = Vec::with_capacity(n);
        for i in 0..n {
            let next = p[i].clone() + l[i + 1].clone();
            d.push(next.clone() / (l[i + 1].clone() * p[i].clone()));
            c.push(p[i].clone() / (l[i + 1].clone() * next));
        }
        Pivots { d, c, m: s.masses().to_vec() }
    }

    /// Number of eigenvalues strictly below `x`.
    fn count_below(&self, x: &T) -> usize {
        let n = self.d.len();
        let mut count = 0;
        let mut s = -(x.clone() * self.m[0].clone());
        for i in 0..n {
            let mut dp = self.d[i].clone() + s.clone();
            if dp.is_zero() {
                dp = -(self.d[i].clone() * self.d[i].lit(T::unit_roundoff(self.d[i].ctx()).max(1e-300)));
            }
            if dp.is_negative() {
                count += 1;
            }
            if i + 1 < n {
                s = self.c[i].clone() * s / dp - x.clone() * self.m[i + 1].clone();
            }
        }
        count
    }
}

/// Certified enclosure `lo < λ <= hi` of one eigenvalue.
#[derive(Clone, Debug)]
pub struct Bracket<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Bracket<T> {
    pub fn mid(&self) -> T {
        (self.lo.clone() + self.hi.clone()) / self.lo.lit(2.0)
    }
}

fn upper_bound<T: Real>(s: &StieltjesString<T>) -> T {
    let l = s.lengths();
    let m = s.masses();
    let mut acc = l[0].lit(0.0);
    for j in 0..s.len() {
        acc = acc + (l[j].recip() + l[j + 1].recip()) / m[j].clone();
    }
    acc * l[0].lit(1.0 + 1e-6)
}

fn lower_bound<T: Real>(s: &StieltjesString<T>) -> T {
    let trace = s.weighted_total() / s.lengths()[0].lit(s.interval().len());
    trace.recip() * trace.lit(0.5)
}

fn bisect<T: Real>(piv: &Pivots<T>, k: usize, mut lo: T, mut hi: T, rtol: f64) -> Bracket<T> {
    let two = lo.lit(2.0);
    let tol = lo.lit(rtol);
    for _ in 0..4000 {
        if hi.clone() - lo.clone() <= tol.clone() * hi.clone() {
            break;
        }
        let mid = if hi > two.clone() * lo.clone() && lo.is_positive() {
            (lo.clone() * hi.clone()).sqrt()
        } else {
            (lo.clone() + hi.clone()) / two.clone()
        };
        if mid <= lo || mid >= hi {
            break;
        }
        if piv.count_below(&mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Bracket { lo, hi }
}

/// Eigenvalue enclosures in the arithmetic of `T`, each of relative width `<= rtol`.
pub fn spectrum_brackets<T: Real>(s: &StieltjesString<T>, rtol: f64) -> Vec<Bracket<T>> {
    if s.is_empty() {
        return Vec::new();
    }
    let piv = Pivots::new(s);
    let lo = lower_bound(s);
    let hi = upper_bound(s);
    (0..s.len()).map(|k| bisect(&piv, k, lo.clone(), hi.clone(), rtol)).collect()
}

/// Dirichlet eigenvalues in increasing order.
pub fn dirichlet_spectrum(s: &StieltjesString<f64>) -> Vec<f64> {
    let piv = Pivots::new(s);
    if s.is_empty() {
        return Vec::new();
    }
    let lo = lower_bound(s);
    let hi = upper_bound(s);
    (0..s.len())
        .into_par_iter()
        .map(|k| bisect(&piv, k, lo, hi, 4.0 * f64::EPSILON).mid())
        .collect()
}

/// One correction step `δ = W/(κ γ²)` with `W` the local Wronskian at the twisted node.
fn twisted_step(s: &StieltjesString<Mpf>, x: &Mpf) -> Mpf {
    let phi = transfer_phi(s, x);
    let (v, vs) = phi_b_sweep(s, x);
    let r = twist_index(&phi.values, &v);
    let (g, kappa) = twisted_norm(s.masses(), &phi.values, &v, r);
    let w = v[r].clone() * phi.slopes[r].clone() - vs[r].clone() * phi.values[r].clone();
    w / (kappa * g)
}

fn refine_mp(s: &StieltjesString<Mpf>, piv: &Pivots<Mpf>, k: usize, start: f64, rtol: f64) -> Option<Mpf> {
    let bits = s.lengths()[0].precision();
    let mut x = Mpf::from_f64(start, Bits(bits));
    let mut last = f64::INFINITY;
    for _ in 0..12 {
        let d = twisted_step(s, &x);
        x = x.clone() + d.clone();
        let rel = (d / x.clone()).to_f64().abs();
        if !rel.is_finite() || !x.is_positive() {
            return None;
        }
        if rel <= rtol {
            last = rel;
            break;
        }
        if rel > 1e-3 {
            return None;
        }
    }
    if !last.is_finite() {
        return None;
    }
    // Certify: exactly k eigenvalues below, k + 1 up to a small margin above.
    let eps = x.lit(4.0 * rtol);
    let lo = x.clone() - x.clone() * eps.clone();
    let hi = x.clone() + x.clone() * eps;
    (piv.count_below(&lo) == k && piv.count_below(&hi) == k + 1).then_some(x)
}

/// Eigenvalues of a multiprecision string, refined from double-precision estimates by
/// twisted Rayleigh corrections and certified by Sturm counts (bisection as fallback).
pub fn dirichlet_spectrum_mp(s: &StieltjesString<Mpf>) -> Vec<Mpf> {
    if s.is_empty() {
        return Vec::new();
    }
    let bits = s.lengths()[0].precision();
    let rtol = 2f64.powi(-(bits.min(1000) as i32) + 6);
    let approx = dirichlet_spectrum(&s.to_f64());
    let piv = Pivots::new(s);
    let lo_all = lower_bound(s);
    let hi_all = upper_bound(s);
    (0..s.len())
        .into_par_iter()
        .map(|k| {
            if let Some(x) = refine_mp(s, &piv, k, approx[k], rtol) {
                return x;
            }
            let mut lo = Mpf::from_f64(approx[k] * (1.0 - 1e-12), Bits(bits));
            let mut hi = Mpf::from_f64(approx[k] * (1.0 + 1e-12), Bits(bits));
            if piv.count_below(&lo) > k {
                lo = lo_all.clone();
            }
            if piv.count_below(&hi) <= k {
                hi = hi_all.clone();
            }
            bisect(&piv, k, lo, hi, rtol).mid()
        })
        .collect()
}

/// Generic eigenvalues: double precision, multiprecision refinement, or bisection in `T`.
pub fn dirichlet_spectrum_in<T: Real>(s: &StieltjesString<T>) -> Vec<T> {
    let u = T::unit_roundoff(s.lengths()[0].ctx());
    spectrum_brackets(s, (8.0 * u).max(1e-300)).into_iter().map(|b| b.mid()).collect()
}

/// `φ_b` at the nodes with its slope just left of each node.
fn phi_b_sweep<T: Field>(s: &StieltjesString<T>, z: &T) -> (Vec<T>, Vec<T>) {
    let l = s.lengths();
    let m = s.masses();
    let n = s.len();
    let mut v = vec![l[0].lit(0.0); n];
    let mut slopes = vec![l[0].lit(0.0); n];
    if n == 0 {
        return (v, slopes);
    }
    let mut u = l[n].clone();
    let mut slope = l[0].lit(-1.0);
    for j in (0..n).rev() {
        v[j] = u.clone();
        slope = slope + z.clone() * m[j].clone() * u.clone();
        slopes[j] = slope.clone();
        u = u - l[j].clone() * slope.clone();
    }
    (v, slopes)
}

fn phi_b_nodes<T: Field>(s: &StieltjesString<T>, z: &T) -> Vec<T> {
    phi_b_sweep(s, z).0
}

/// Reference node for combining the left sweep `u` and the right sweep `v`.
///
/// Minimizes the growth of each sweep relative to its value there (in log2, so huge
/// multiprecision values do not overflow), among nodes where the sweeps are still
/// proportional: a sweep that decayed past its working precision is not.
fn twist_index<T: Field>(u: &[T], v: &[T]) -> usize {
    let n = u.len();
    let la: Vec<f64> = u.iter().map(|x| x.log2_abs()).collect();
    let lb: Vec<f64> = v.iter().map(|x| x.log2_abs()).collect();
    let mut run_a = vec![0.0; n];
    let mut run_b = vec![0.0; n];
    let mut acc = f64::NEG_INFINITY;
    for j in 0..n {
        acc = acc.max(la[j]);
        run_a[j] = acc;
    }
    acc = f64::NEG_INFINITY;
    for j in (0..n).rev() {
        acc = acc.max(lb[j]);
        run_b[j] = acc;
    }
    let score = |j: usize| {
        if la[j] == f64::NEG_INFINITY || lb[j] == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            (run_a[j] - la[j]).max(run_b[j] - lb[j])
        }
    };
    let defect = |j: usize| -> f64 {
        if n == 1 {
            return f64::NEG_INFINITY;
        }
        let (p, q) = if j + 1 < n { (j, j + 1) } else { (j - 1, j) };
        let x = u[p].clone() * v[q].clone();
        let y = u[q].clone() * v[p].clone();
        let d = (x.clone() - y.clone()).log2_abs() - (x.abs() + y.abs()).log2_abs();
        if d.is_nan() {
            f64::INFINITY
        } else {
            d
        }
    };
    let trusted: Vec<usize> = (0..n).filter(|&j| defect(j) <= -20.0).collect();
    let pool: Vec<usize> = if trusted.is_empty() { (0..n).collect() } else { trusted };
    pool.into_iter().min_by(|&i, &j| score(i).total_cmp(&score(j))).expect("non-empty string")
}

/// `Σ_{j<=r} m u² + κ⁻² Σ_{j>r} m v²` with `κ = v_r/u_r`.
fn twisted_norm<T: Field>(m: &[T], u: &[T], v: &[T], r: usize) -> (T, T) {
    let kappa = v[r].clone() / u[r].clone();
    let mut left = kappa.lit(0.0);
    for j in 0..=r {
        left = left + m[j].clone() * u[j].clone() * u[j].clone();
    }
    let mut right = kappa.lit(0.0);
    for j in r + 1..m.len() {
        right = right + m[j].clone() * v[j].clone() * v[j].clone();
    }
    (left + right / (kappa.clone() * kappa.clone()), kappa)
}

/// Norming data at one eigenvalue via a twisted combination of both sweeps.
pub fn triplet_at<T: Field>(s: &StieltjesString<T>, lambda: &T) -> SpectralTriplet<T> {
    let u = transfer_phi(s, lambda).values;
    let v = phi_b_nodes(s, lambda);
    let r = twist_index(&u, &v);
    let (gamma_sq, kappa) = twisted_norm(s.masses(), &u, &v, r);
    let theta = u8::from(kappa.is_negative());
    SpectralTriplet { lambda: lambda.clone(), gamma_sq, coupling: kappa.abs(), theta }
}

/// `-Ẇ(λ) = ∫ φ_a φ_b dω` from both sweeps.
pub fn wronskian_slope<T: Field>(s: &StieltjesString<T>, lambda: &T) -> T {
    let u = transfer_phi(s, lambda).values;
    let v = phi_b_nodes(s, lambda);
    let mut acc = lambda.lit(0.0);
    for j in 0..s.len() {
        acc = acc + s.masses()[j].clone() * u[j].clone() * v[j].clone();
    }
    acc
}

/// Spectral triplets for every eigenvalue.
pub fn spectral_data(s: &StieltjesString<f64>) -> Vec<SpectralTriplet<f64>> {
    let sigma = dirichlet_spectrum(s);
    sigma.par_iter().map(|l| triplet_at(s, l)).collect()
}

/// Spectral triplets in the arithmetic of `s`.
pub fn spectral_data_in<T: Field>(s: &StieltjesString<T>, sigma: &[T]) -> Vec<SpectralTriplet<T>> {
    sigma.par_iter().map(|l| triplet_at(s, l)).collect()
}

/// Multiprecision spectral triplets.
pub fn spectral_data_mp(s: &StieltjesString<Mpf>) -> Vec<SpectralTriplet<Mpf>> {
    let sigma = dirichlet_spectrum_mp(s);
    spectral_data_in(s, &sigma)
}

/// Spectral measure `Σ γ⁻² δ_λ`.
///
/// Fails when a weight leaves the range of `T` (double precision underflows for
/// long strings at high frequencies); the multiprecision path does not.
pub fn spectral_measure<T: Field>(s: &StieltjesString<T>, data: &[SpectralTriplet<T>]) -> Result<SpectralMeasure<T>> {
    let atoms = data
        .iter()
        .map(|t| Atom { lambda: t.lambda.clone(), weight: t.gamma_sq.recip() })
        .collect();
    SpectralMeasure::new(s.interval(), atoms).map_err(|e| Error::ToleranceUnreachable {
        requested: 0.0,
        achieved: f64::NAN,
        detail: format!("norming constants out of range: {e}"),
    })
}

/// Double-precision spectral measure of a string.
pub fn string_measure(s: &StieltjesString<f64>) -> Result<SpectralMeasure<f64>> {
    spectral_measure(s, &spectral_data(s))
}

/// Weyl function `m(z) = φ_b'(z, a)/φ_b(z, a)` in partial fractions.
pub fn weyl_m(s: &StieltjesString<f64>) -> RationalHerglotz<f64> {
    let data = spectral_data(s);
    let len = s.interval().len();
    let poles: Vec<(f64, f64)> = data.iter().map(|t| (t.lambda, 1.0 / t.gamma_sq)).collect();
    let constant = -1.0 / len - poles.iter().map(|(l, w)| w / l).sum::<f64>();
    RationalHerglotz { constant, poles }
}

/// Polynomial `z ↦ φ_a(z, x)`; `x = b` gives the characteristic function `W`.
pub fn char_poly<T: Field>(s: &StieltjesString<T>, x: &T) -> Polynomial<T> {
    let l0 = &s.lengths()[0];
    let a = l0.lit(s.interval().a);
    let zero = l0.lit(0.0);
    let mut pos = a;
    let mut u = Polynomial::constant(zero.clone());
    let mut slope = Polynomial::constant(l0.lit(1.0));
    for (xj, mj) in s.positions().iter().zip(s.masses()) {
        if xj >= x {
            break;
        }
        u = u.add(&slope.scale(&(xj.clone() - pos)));
        // slope -= z m u
        let mut zu = vec![zero.clone()];
        zu.extend(u.coeffs.iter().map(|c| -(c.clone() * mj.clone())));
        slope = slope.add(&Polynomial::new(zu));
        pos = xj.clone();
    }
    u.add(&slope.scale(&(x.clone() - pos)))
}

/// Characteristic function `W(z) = φ_a(z, b)` as an exact polynomial.
pub fn characteristic_polynomial<T: Field>(s: &StieltjesString<T>) -> Polynomial<T> {
    let l = s.lengths();
    let zero = l[0].lit(0.0);
    let mut u = Polynomial::constant(l[0].clone());
    let mut slope = Polynomial::constant(l[0].lit(1.0));
    for (j, mj) in s.masses().iter().enumerate() {
        let mut zu = vec![zero.clone()];
        zu.extend(u.coeffs.iter().map(|c| -(c.clone() * mj.clone())));
        slope = slope.add(&Polynomial::new(zu));
        u = u.add(&slope.scale(&l[j + 1]));
    }
    u
}

/// Relative tolerance for identifying eigenvalues shared by the three spectra.
pub const SNAP_TOL: f64 = 1e-10;

/// Spectra of the whole string and of its parts left and right of `split`.
///
/// A mass located exactly at `split` belongs to neither part.
pub fn three_spectra_of(s: &StieltjesString<f64>, split: f64) -> Result<ThreeSpectraTriple> {
    let i = s.interval();
    if !i.contains_open(split) {
        return Err(Error::invalid(format!("split {split} outside ({}, {})", i.a, i.b)));
    }
    let data = spectral_data(s);
    let sigma: Vec<f64> = data.iter().map(|t| t.lambda).collect();
    let mut sigma_a = dirichlet_spectrum(&s.substring(i.a, split)?);
    let mut sigma_b = dirichlet_spectrum(&s.substring(split, i.b)?);
    let mut couplings = Vec::new();
    for t in &data {
        let near = |set: &[f64]| {
            set.iter()
                .position(|&mu| (mu - t.lambda).abs() <= SNAP_TOL * t.lambda)
        };
        if let (Some(ja), Some(jb)) = (near(&sigma_a), near(&sigma_b)) {
            sigma_a[ja] = t.lambda;
            sigma_b[jb] = t.lambda;
            couplings.push((t.lambda, t.coupling));
        }
    }
    Ok(ThreeSpectraTriple { interval: i, split, sigma, sigma_a, sigma_b, couplings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Interval;
    use crate::scalar::Exact;

    fn f2() -> StieltjesString<f64> {
        StieltjesString::from_masses(Interval::unit(), &[(1.0 / 3.0, 1.0), (2.0 / 3.0, 1.0)]).unwrap()
    }

    fn f2_exact() -> StieltjesString<Exact> {
        let third = Exact::from_ratio(1, 3);
        StieltjesString::from_lengths(Interval::unit(), vec![third.clone(), third.clone(), third], vec![
            Exact::from_ratio(1, 1),
            Exact::from_ratio(1, 1),
        ])
        .unwrap()
    }

    #[test]
    fn single_mass() {
        let s = StieltjesString::from_masses(Interval::unit(), &[(0.5, 1.0)]).unwrap();
        let d = spectral_data(&s);
        assert_eq!(d.len(), 1);
        assert!((d[0].lambda - 4.0).abs() < 1e-14);
        assert!((d[0].gamma_sq - 0.25).abs() < 1e-15);
        assert!((d[0].coupling - 1.0).abs() < 1e-15);
        let m = weyl_m(&s);
        assert!((m.constant + 2.0).abs() < 1e-14);
        assert!((m.poles[0].1 - 4.0).abs() < 1e-13);
    }

    #[test]
    fn two_masses_exact_polynomial() {
        let w = characteristic_polynomial(&f2_exact());
        assert_eq!(w.coeffs, vec![Exact::from_ratio(1, 1), Exact::from_ratio(-4, 9), Exact::from_ratio(1, 27)]);
        let via_x = char_poly(&f2_exact(), &Exact::from_ratio(1, 1));
        assert_eq!(via_x, w);
    }

    #[test]
    fn two_masses_data() {
        let d = spectral_data(&f2());
        assert!((d[0].lambda - 3.0).abs() < 1e-14 && (d[1].lambda - 9.0).abs() < 1e-13);
        for t in &d {
            assert!((t.gamma_sq - 2.0 / 9.0).abs() < 1e-15);
            assert!((t.coupling - 1.0).abs() < 1e-14);
        }
        assert_eq!((d[0].theta, d[1].theta), (0, 1));
    }

    #[test]
    fn exact_spectral_data_at_exact_eigenvalues() {
        let s = f2_exact();
        for l in [3, 9] {
            let t = triplet_at(&s, &Exact::from_ratio(l, 1));
            assert_eq!(t.gamma_sq, Exact::from_ratio(2, 9));
            assert_eq!(t.coupling, Exact::from_ratio(1, 1));
        }
    }

    #[test]
    fn three_spectra_examples() {
        let t = three_spectra_of(&f2(), 0.5).unwrap();
        assert_eq!(t.sigma_a.len(), 1);
        assert_eq!(t.sigma_a, t.sigma_b);
        assert_eq!(t.sigma_a[0], t.sigma[1]);
        assert_eq!(t.couplings.len(), 1);
        assert!((t.couplings[0].0 - 9.0).abs() < 1e-12);
        let s1 = StieltjesString::from_masses(Interval::unit(), &[(0.5, 1.0)]).unwrap();
        let t1 = three_spectra_of(&s1, 0.25).unwrap();
        assert!(t1.sigma_a.is_empty());
        assert!((t1.sigma_b[0] - 6.0).abs() < 1e-13);
        let t2 = three_spectra_of(&s1, 0.5).unwrap();
        assert!(t2.sigma_a.is_empty() && t2.sigma_b.is_empty());
    }

    #[test]
    fn mp_spectrum_matches() {
        let s = f2_exact().map(|x| x.to_mpf(200));
        let sig = dirichlet_spectrum_mp(&s);
        let err = (sig[1].clone() - Mpf::new(9.0, 200)).abs().to_f64();
        assert!(err < 1e-50, "{err}");
    }

    #[test]
    fn empty_string() {
        let s = StieltjesString::empty(Interval::unit());
        assert!(dirichlet_spectrum(&s).is_empty());
        assert_eq!(characteristic_polynomial(&s).coeffs, vec![1.0]);
        let m = weyl_m(&s);
        assert_eq!(m.constant, -1.0);
    }
}
