//! Inverse problem: finite spectral measures back to Stieltjes strings.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::convergence::weakstar_distance;
use crate::error::{Error, Result};
use crate::herglotz::RationalHerglotz;
use crate::model::{zero_product_eval_with, Atom, Interval, SpectralMeasure, StieltjesString, ZeroProduct};
use crate::poly::Polynomial;
use crate::scalar::{Bits, Field, Mpf, Real, DEFAULT_BITS};
use crate::stieltjes::{spectral_data, spectral_data_mp};

/// `m(z) = -1/(b-a) - Σ w/λ + Σ w/(λ - z)`.
pub fn weyl_from_measure<T: Field>(rho: &SpectralMeasure<T>, interval: Interval) -> Result<RationalHerglotz<T>> {
    if !rho.is_finite() {
        return Err(Error::invalid("Weyl function construction needs a finite measure; truncate first"));
    }
    let ctx = rho.atoms().first().map_or_else(T::default_ctx, |a| a.lambda.ctx());
    let mut constant = -(T::one(ctx) / T::from_f64(interval.len(), ctx));
    for a in rho.atoms() {
        constant = constant - a.weight.clone() / a.lambda.clone();
    }
    let poles = rho.atoms().iter().map(|a| (a.lambda.clone(), a.weight.clone())).collect();
    Ok(RationalHerglotz { constant, poles })
}

fn drop_top<T: Field>(mut p: Polynomial<T>) -> Polynomial<T> {
    if p.coeffs.len() > 1 {
        p.coeffs.pop();
    }
    p
}

/// Stieltjes continued-fraction expansion of a rational Herglotz function.
pub fn cf_extract<T: Field>(m: &RationalHerglotz<T>, interval: Interval) -> Result<StieltjesString<T>> {
    let ctx = m.constant.ctx();
    let n = m.poles.len();
    if !m.constant.is_negative() {
        return Err(Error::PositivityLoss { step: 0, what: "length", value: f64::INFINITY });
    }
    if n == 0 {
        let l = -(m.constant.recip());
        return StieltjesString::from_lengths(interval, vec![l], vec![]);
    }
    let one = Polynomial::constant(T::one(ctx));
    let mut q = one.clone();
    for (l, _) in &m.poles {
        q = q.mul_one_minus(l);
    }
    let mut p = q.scale(&m.constant);
    for (k, (lk, wk)) in m.poles.iter().enumerate() {
        let mut term = Polynomial::constant(wk.clone() / lk.clone());
        for (j, (lj, _)) in m.poles.iter().enumerate() {
            if j != k {
                term = term.mul_one_minus(lj);
            }
        }
        p = p.add(&term);
    }
    let (mut a, mut b) = (q, p);
    let mut lengths = Vec::with_capacity(n + 1);
    let mut masses = Vec::with_capacity(n);
    for j in 0..=n {
        let l = -(a.leading().clone() / b.leading().clone());
        if !l.is_positive() {
            return Err(Error::PositivityLoss { step: j, what: "length", value: l.to_f64() });
        }
        lengths.push(l.clone());
        if j == n {
            break;
        }
        a = drop_top(a.add(&b.scale(&l)));
        let mass = b.leading().clone() / a.leading().clone();
        if !mass.is_positive() {
            return Err(Error::PositivityLoss { step: j + 1, what: "mass", value: mass.to_f64() });
        }
        masses.push(mass.clone());
        let mut za = vec![T::zero(ctx)];
        za.extend(a.coeffs.iter().map(|c| -(c.clone() * mass.clone())));
        b = drop_top(b.add(&Polynomial::new(za)));
    }
    // A length sum that misses b - a signals rounding, not bad data.
    StieltjesString::from_lengths(interval, lengths, masses).map_err(|e| match e {
        Error::InvalidInput(detail) => Error::PrecisionExhausted { bits: 0, detail },
        other => other,
    })
}

/// Lanczos reconstruction: a Jacobi matrix from `diag(λ)` and `sqrt(w)`, read off as lengths and masses.
pub fn invert_lanczos<T: Real>(rho: &SpectralMeasure<T>, interval: Interval) -> Result<StieltjesString<T>> {
    let m = weyl_from_measure(rho, interval)?;
    let n = rho.len();
    let ctx = m.constant.ctx();
    if n == 0 {
        return cf_extract(&m, interval);
    }
    let total = rho.atoms().iter().fold(T::zero(ctx), |acc, a| acc + a.weight.clone());
    let lam: Vec<T> = rho.atoms().iter().map(|a| a.lambda.clone()).collect();
    let mut qs: Vec<Vec<T>> = Vec::with_capacity(n);
    qs.push(rho.atoms().iter().map(|a| (a.weight.clone() / total.clone()).sqrt()).collect());
    let dot = |x: &[T], y: &[T]| x.iter().zip(y).fold(T::zero(ctx), |acc, (p, q)| acc + p.clone() * q.clone());
    let mut alpha = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    for k in 0..n {
        let mut r: Vec<T> = qs[k].iter().zip(&lam).map(|(q, l)| q.clone() * l.clone()).collect();
        alpha.push(dot(&r, &qs[k]));
        // Full reorthogonalization, twice.
        for _ in 0..2 {
            for q in &qs {
                let c = dot(&r, q);
                for (ri, qi) in r.iter_mut().zip(q) {
                    *ri = ri.clone() - c.clone() * qi.clone();
                }
            }
        }
        if k + 1 < n {
            let b = dot(&r, &r).sqrt();
            if !b.is_positive() {
                return Err(Error::PositivityLoss { step: k + 1, what: "Lanczos coupling", value: 0.0 });
            }
            qs.push(r.iter().map(|x| x.clone() / b.clone()).collect());
            beta.push(b);
        }
    }
    let l0 = -(m.constant.recip());
    let mut lengths = vec![l0.clone()];
    let mut masses = vec![(l0.clone() * l0.clone() * total).recip()];
    for k in 0..n {
        let lk = (alpha[k].clone() * masses[k].clone() - lengths[k].recip()).recip();
        if !lk.is_positive() {
            return Err(Error::PositivityLoss { step: k + 1, what: "length", value: lk.to_f64() });
        }
        lengths.push(lk.clone());
        if k + 1 < n {
            let b = beta[k].clone();
            let mk = (b.clone() * b * lk.clone() * lk * masses[k].clone()).recip();
            masses.push(mk);
        }
    }
    StieltjesString::from_lengths(interval, lengths, masses)
}

/// Arithmetic used by [`invert_measure_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecisionPolicy {
    /// Exact rationals for at most `EXACT_LIMIT` atoms, otherwise multiprecision.
    Auto,
    Exact,
    /// Start at this many bits and double on failure.
    Bits(usize),
}

/// Largest measure inverted in exact arithmetic under [`PrecisionPolicy::Auto`].
pub const EXACT_LIMIT: usize = 16;

impl PrecisionPolicy {
    /// `KREIN_PRECISION_BITS` if set, otherwise [`PrecisionPolicy::Auto`].
    pub fn from_env() -> Self {
        match std::env::var("KREIN_PRECISION_BITS").ok().and_then(|v| v.parse().ok()) {
            Some(b) => PrecisionPolicy::Bits(b),
            None => PrecisionPolicy::Auto,
        }
    }
}

#[derive(Clone, Debug)]
pub struct InverseConfig {
    pub precision: PrecisionPolicy,
    pub max_bits: usize,
    /// Required relative eigenvalue residual of the round trip.
    pub eigen_tol: f64,
    /// Required relative weight residual of the round trip.
    pub weight_tol: f64,
}

impl Default for InverseConfig {
    fn default() -> Self {
        InverseConfig { precision: PrecisionPolicy::from_env(), max_bits: 4096, eigen_tol: 1e-9, weight_tol: 1e-7 }
    }
}

/// Reconstructed string with its verification record.
#[derive(Clone, Debug)]
pub struct Inversion {
    pub string: StieltjesString<f64>,
    /// The reconstruction before rounding to double precision.
    pub precise: StieltjesString<Mpf>,
    /// Working precision that succeeded; `None` for exact arithmetic.
    pub bits: Option<usize>,
    pub eigen_residual: f64,
    pub weight_residual: f64,
}

/// Maximum relative eigenvalue and weight mismatch between `rho` and the forward data of `s`.
pub fn roundtrip_residual(rho: &SpectralMeasure<f64>, s: &StieltjesString<f64>) -> (f64, f64) {
    let data = spectral_data(s);
    if data.len() != rho.len() {
        return (f64::INFINITY, f64::INFINITY);
    }
    let mut re: f64 = 0.0;
    let mut rw: f64 = 0.0;
    for (a, t) in rho.atoms().iter().zip(&data) {
        re = re.max((t.lambda - a.lambda).abs() / a.lambda);
        rw = rw.max((1.0 / t.gamma_sq - a.weight).abs() / a.weight);
    }
    (re, rw)
}

/// Residuals of the forward data of a multiprecision string, computed in its own precision.
pub fn roundtrip_residual_mp(rho: &SpectralMeasure<Mpf>, s: &StieltjesString<Mpf>) -> (f64, f64) {
    let data = spectral_data_mp(s);
    if data.len() != rho.len() {
        return (f64::INFINITY, f64::INFINITY);
    }
    let mut re: f64 = 0.0;
    let mut rw: f64 = 0.0;
    for (a, t) in rho.atoms().iter().zip(&data) {
        re = re.max(((t.lambda.clone() - a.lambda.clone()) / a.lambda.clone()).to_f64().abs());
        rw = rw.max(((t.gamma_sq.recip() - a.weight.clone()) / a.weight.clone()).to_f64().abs());
    }
    (re, rw)
}

/// Inverts a finite measure with default settings.
pub fn invert_measure(rho: &SpectralMeasure<f64>, interval: Interval) -> Result<StieltjesString<f64>> {
    invert_measure_with(rho, interval, &InverseConfig::default()).map(|r| r.string)
}

/// Inverts a finite measure, escalating precision until the round trip verifies.
pub fn invert_measure_with(rho: &SpectralMeasure<f64>, interval: Interval, cfg: &InverseConfig) -> Result<Inversion> {
    if !rho.is_finite() {
        return Err(Error::invalid("measure has an infinite tail; use truncation_ladder"));
    }
    invert_measure_mp(&rho.map(|x| Mpf::from_f64(*x, Bits(64))), interval, cfg)
}

/// Inverts a multiprecision measure; residuals are measured against its exact values.
pub fn invert_measure_mp(rho: &SpectralMeasure<Mpf>, interval: Interval, cfg: &InverseConfig) -> Result<Inversion> {
    if (rho.interval().len() - interval.len()).abs() > 1e-12 * interval.len() {
        return Err(Error::invalid("measure interval differs from the requested interval"));
    }
    let verify = |precise: StieltjesString<Mpf>, bits: Option<usize>| -> Result<Inversion> {
        let (re, rw) = roundtrip_residual_mp(rho, &precise);
        if re <= cfg.eigen_tol && rw <= cfg.weight_tol {
            Ok(Inversion { string: precise.to_f64(), precise, bits, eigen_residual: re, weight_residual: rw })
        } else {
            Err(Error::Residual { eigen: re, weight: rw })
        }
    };
    let exact_first = match cfg.precision {
        PrecisionPolicy::Exact => true,
        PrecisionPolicy::Auto => rho.len() <= EXACT_LIMIT,
        PrecisionPolicy::Bits(_) => false,
    };
    if exact_first {
        let exact = rho.map(|x| x.to_exact());
        let m = weyl_from_measure(&exact, interval)?;
        let s = cf_extract(&m, interval)?;
        let input_bits = rho.atoms().iter().map(|a| a.lambda.precision().max(a.weight.precision())).max().unwrap_or(64);
        // Exact arithmetic leaves only the final rounding; escalate only if that fails.
        match verify(s.map(|x| x.to_mpf(DEFAULT_BITS.max(2 * input_bits))), None) {
            Ok(r) => return Ok(r),
            Err(e) if cfg.precision == PrecisionPolicy::Exact => return Err(e),
            Err(_) => {}
        }
    }
    let mut bits = match cfg.precision {
        PrecisionPolicy::Bits(b) => b.max(64),
        _ => DEFAULT_BITS,
    };
    let mut last_err;
    loop {
        let mp = rho.map(|x| x.with_bits(bits));
        // Lanczos is far better conditioned than the monomial continued fraction; the
        // latter remains as a fallback at the same precision.
        let attempt = invert_lanczos(&mp, interval).and_then(|s| verify(s, Some(bits))).or_else(|_| {
            weyl_from_measure(&mp, interval)
                .and_then(|m| cf_extract(&m, interval))
                .and_then(|s| verify(s, Some(bits)))
        });
        match attempt {
            Ok(r) => return Ok(r),
            Err(e) => last_err = e,
        }
        if bits * 2 > cfg.max_bits {
            break;
        }
        bits *= 2;
    }
    Err(Error::PrecisionExhausted { bits, detail: last_err.to_string() })
}

/// One rung of a truncation ladder.
#[derive(Clone, Debug)]
pub struct Rung {
    pub cutoff: f64,
    pub atoms: usize,
    pub result: std::result::Result<Inversion, String>,
    /// `Σ m_j (b - x_j)(x_j - a)` of the reconstructed string.
    pub weighted_total: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct LadderReport {
    pub rungs: Vec<Rung>,
    /// `(b - a) Σ 1/λ` over the full support.
    pub uniform_bound: f64,
    /// Weak-star distance between consecutive successful rungs.
    pub consecutive_distances: Vec<Option<f64>>,
}

impl LadderReport {
    pub fn bound_respected(&self) -> bool {
        self.rungs
            .iter()
            .filter_map(|r| r.weighted_total)
            .all(|t| t <= self.uniform_bound * (1.0 + 1e-9))
    }
}

/// Inverts the restrictions of `rho` to `λ <= Λ` for each cutoff.
pub fn truncation_ladder(
    rho: &SpectralMeasure<f64>,
    interval: Interval,
    cutoffs: &[f64],
    cfg: &InverseConfig,
) -> Result<LadderReport> {
    if cutoffs.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(Error::invalid("cutoffs must be positive and finite"));
    }
    let rungs: Vec<Rung> = cutoffs
        .par_iter()
        .map(|&cutoff| {
            let t = rho.truncate(cutoff);
            let result = invert_measure_with(&t, interval, cfg).map_err(|e| e.to_string());
            let weighted_total = result.as_ref().ok().map(|r| r.string.weighted_total());
            Rung { cutoff, atoms: t.len(), result, weighted_total }
        })
        .collect();
    let uniform_bound = interval.len() * rho.recip_tail(0);
    let consecutive_distances = rungs
        .windows(2)
        .map(|w| match (&w[0].result, &w[1].result) {
            (Ok(p), Ok(q)) => {
                weakstar_distance(&p.string.to_mass_distribution(), &q.string.to_mass_distribution()).ok()
            }
            _ => None,
        })
        .collect();
    Ok(LadderReport { rungs, uniform_bound, consecutive_distances })
}

/// Trend of a sequence of non-negative series terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Converging,
    Diverging,
    Inconclusive,
}

/// Classifies the tail of a positive series by a power-law fit of its last half of terms.
pub fn series_verdict(terms: &[f64], finite: bool) -> (Verdict, f64) {
    if finite {
        return (Verdict::Converging, f64::INFINITY);
    }
    let n = terms.len();
    if n < 8 {
        return (Verdict::Inconclusive, f64::NAN);
    }
    let pts: Vec<(f64, f64)> = (n / 2..n)
        .filter(|&k| terms[k] > 0.0)
        .map(|k| (((k + 1) as f64).ln(), terms[k].ln()))
        .collect();
    if pts.len() < 4 {
        return (Verdict::Inconclusive, f64::NAN);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let decay = -sxy / sxx;
    let v = if decay > 1.1 {
        Verdict::Converging
    } else if decay < 0.9 {
        Verdict::Diverging
    } else {
        Verdict::Inconclusive
    };
    (v, decay)
}

/// Partial sums deciding finiteness of the string near each endpoint.
#[derive(Clone, Debug)]
pub struct EndpointReport {
    /// Partial sums of `Σ λ⁻² γ⁻²` (left end).
    pub partial_a: Vec<f64>,
    /// Partial sums of `Σ λ⁻² Ẇ(λ)⁻² γ²` (right end).
    pub partial_b: Vec<f64>,
    /// Relative error bound on each `Ẇ(λ)` from truncating the zero product.
    pub wdot_bounds: Vec<f64>,
    pub verdict_a: Verdict,
    pub verdict_b: Verdict,
    /// Fitted decay exponents of the terms.
    pub decay_a: f64,
    pub decay_b: f64,
}

/// Endpoint diagnostics over the first `n_terms` atoms (all atoms for finite measures).
pub fn endpoint_diagnostics(
    rho: &SpectralMeasure<f64>,
    wronskian: Option<&ZeroProduct>,
    n_terms: usize,
) -> EndpointReport {
    let atoms = if rho.is_finite() { rho.first(rho.len()) } else { rho.first(n_terms) };
    let own;
    let w = match wronskian {
        Some(w) => w,
        None => {
            own = rho.characteristic_product();
            &own
        }
    };
    let derivs: Vec<(f64, f64)> = atoms
        .par_iter()
        .map(|&(l, _)| {
            let v = zero_product_eval_with(w, Complex64::new(l, 0.0), 1e-9, 400_000);
            (v.derivative.re, v.tail_bound)
        })
        .collect();
    let terms_a: Vec<f64> = atoms.iter().map(|&(l, wt)| wt / (l * l)).collect();
    let terms_b: Vec<f64> = atoms.iter().zip(&derivs).map(|(&(l, wt), &(d, _))| 1.0 / (l * l * d * d * wt)).collect();
    let partial = |t: &[f64]| {
        t.iter()
            .scan(0.0, |acc, x| {
                *acc += x;
                Some(*acc)
            })
            .collect::<Vec<f64>>()
    };
    let (verdict_a, decay_a) = series_verdict(&terms_a, rho.is_finite());
    let (verdict_b, decay_b) = series_verdict(&terms_b, rho.is_finite());
    EndpointReport {
        partial_a: partial(&terms_a),
        partial_b: partial(&terms_b),
        wdot_bounds: derivs.iter().map(|d| d.1).collect(),
        verdict_a,
        verdict_b,
        decay_a,
        decay_b,
    }
}

/// The same two sums written with coupling constants: `Σ λ⁻² |Ẇ|⁻¹ c^{±1}`.
pub fn coupling_form_sums(lambdas: &[f64], wdot: &[f64], couplings: &[f64]) -> (f64, f64) {
    let mut sa = 0.0;
    let mut sb = 0.0;
    for ((l, d), c) in lambdas.iter().zip(wdot).zip(couplings) {
        sa += c / (l * l * d.abs());
        sb += 1.0 / (c * l * l * d.abs());
    }
    (sa, sb)
}

/// Builds a finite measure from `(λ, w)` pairs in any order.
pub fn measure_from_pairs(interval: Interval, pairs: &[(f64, f64)]) -> Result<SpectralMeasure<f64>> {
    SpectralMeasure::from_unsorted(interval, pairs.iter().map(|&(lambda, weight)| Atom { lambda, weight }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stieltjes::string_measure;
    use crate::scalar::Exact;

    #[test]
    fn single_atom_by_hand() {
        let i = Interval::unit();
        let rho = measure_from_pairs(i, &[(4.0, 4.0)]).unwrap();
        let m = weyl_from_measure(&rho, i).unwrap();
        assert!((m.constant + 2.0).abs() < 1e-15);
        let s = cf_extract(&m, i).unwrap();
        assert_eq!(s.lengths(), &[0.5, 0.5]);
        assert_eq!(s.masses(), &[1.0]);
    }

    #[test]
    fn two_atoms_exact() {
        let i = Interval::unit();
        let rho = SpectralMeasure::new(i, vec![
            Atom { lambda: Exact::from_ratio(3, 1), weight: Exact::from_ratio(9, 2) },
            Atom { lambda: Exact::from_ratio(9, 1), weight: Exact::from_ratio(9, 2) },
        ])
        .unwrap();
        let s = cf_extract(&weyl_from_measure(&rho, i).unwrap(), i).unwrap();
        let third = Exact::from_ratio(1, 3);
        assert_eq!(s.lengths(), &[third.clone(), third.clone(), third]);
        assert_eq!(s.masses(), &[Exact::from_ratio(1, 1), Exact::from_ratio(1, 1)]);
    }

    #[test]
    fn lanczos_agrees_with_continued_fraction() {
        let i = Interval::new(0.0, 2.0).unwrap();
        let s = StieltjesString::from_masses(i, &[(0.3, 0.7), (0.9, 2.0), (1.4, 0.4), (1.8, 1.1)]).unwrap();
        let rho = string_measure(&s).unwrap();
        let cf = invert_measure(&rho, i).unwrap();
        let lz = invert_lanczos(&rho, i).unwrap();
        for (p, q) in cf.lengths().iter().zip(lz.lengths()) {
            assert!((p - q).abs() < 1e-9 * p, "{p} {q}");
        }
        for (p, q) in cf.masses().iter().zip(s.masses()) {
            assert!((p - q).abs() < 1e-12 * q);
        }
    }

    #[test]
    fn rejects_nonpositive_constant() {
        let m = RationalHerglotz { constant: 1.0, poles: vec![(1.0, 1.0)] };
        assert!(matches!(cf_extract(&m, Interval::unit()), Err(Error::PositivityLoss { .. })));
    }

    #[test]
    fn verdicts() {
        let conv: Vec<f64> = (1..200).map(|k| (k as f64).powi(-2)).collect();
        assert_eq!(series_verdict(&conv, false).0, Verdict::Converging);
        let div: Vec<f64> = (1..200).map(|k| k as f64).collect();
        assert_eq!(series_verdict(&div, false).0, Verdict::Diverging);
        assert_eq!(series_verdict(&div, true).0, Verdict::Converging);
    }
}
