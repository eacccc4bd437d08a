//! Three-spectra triples: class membership, norming constants, inversion and
//! coupling-parametrized families.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inverse::{coupling_form_sums, invert_measure_with, InverseConfig, Inversion};
use crate::model::{Atom, SpectralMeasure, StieltjesString, ThreeSpectraTriple};
use crate::stieltjes::{spectral_data, three_spectra_of};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A value in both sub-spectra but not in `σ`.
    Containment { value: f64 },
    /// A value of `σ` in exactly one sub-spectrum.
    Iff { value: f64 },
    /// Zeros and poles fail to alternate at this value; `end_rule` marks a smallest
    /// value that does not come from `σ`.
    Interlacing { value: f64, end_rule: bool },
    /// Sampled imaginary part of the product function is not positive.
    HerglotzSampling { re: f64, im: f64, value_im: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct TripleVerdict {
    pub member: bool,
    pub violations: Vec<Violation>,
}

/// Poles and zeros of `Π_{σ_a} Π_{σ_b} / Π_σ` after cancellation: each common
/// eigenvalue is a double zero over a simple pole, so it survives once as a zero.
fn reduced(t: &ThreeSpectraTriple) -> (Vec<f64>, Vec<f64>) {
    let common = |x: &f64| t.sigma_a.contains(x) && t.sigma_b.contains(x);
    let b: Vec<f64> = t.sigma.iter().copied().filter(|x| !common(x)).collect();
    let mut a: Vec<f64> = t.sigma_a.iter().chain(&t.sigma_b).copied().collect();
    a.sort_by(f64::total_cmp);
    a.dedup();
    (b, a)
}

fn set_violations(t: &ThreeSpectraTriple) -> Vec<Violation> {
    let mut v = Vec::new();
    for x in &t.sigma_a {
        if t.sigma_b.contains(x) && !t.sigma.contains(x) {
            v.push(Violation::Containment { value: *x });
        }
    }
    for x in &t.sigma {
        if t.sigma_a.contains(x) != t.sigma_b.contains(x) {
            v.push(Violation::Iff { value: *x });
        }
    }
    v
}

fn interlacing_violation(b: &[f64], a: &[f64]) -> Option<Violation> {
    let mut merged: Vec<(f64, bool)> = b.iter().map(|&x| (x, true)).chain(a.iter().map(|&x| (x, false))).collect();
    merged.sort_by(|p, q| p.0.total_cmp(&q.0).then(q.1.cmp(&p.1)));
    let (&first, rest) = merged.split_first()?;
    if !first.1 {
        return Some(Violation::Interlacing { value: first.0, end_rule: true });
    }
    let mut prev = first;
    for &cur in rest {
        if cur.1 == prev.1 || cur.0 == prev.0 {
            return Some(Violation::Interlacing { value: cur.0, end_rule: false });
        }
        prev = cur;
    }
    None
}

/// Membership by the set conditions and the interlacing end rules only.
pub fn validate_sets(t: &ThreeSpectraTriple) -> Result<TripleVerdict> {
    t.check_shape()?;
    let mut violations = set_violations(t);
    let (b, a) = reduced(t);
    violations.extend(interlacing_violation(&b, &a));
    Ok(TripleVerdict { member: violations.is_empty(), violations })
}

/// `Π (1 - z/α) / Π (1 - z/β)` over zeros `a` and poles `b`, factors paired to keep magnitudes moderate.
pub fn reduced_product(b: &[f64], a: &[f64], z: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let mut f = one;
    for k in 0..a.len().max(b.len()) {
        if let Some(&x) = a.get(k) {
            f *= one - z / x;
        }
        if let Some(&x) = b.get(k) {
            f /= one - z / x;
        }
    }
    f
}

/// Sample points: gap midpoints at heights 1 and 10, points just above each pole,
/// and a far half circle.
pub fn herglotz_samples(b: &[f64], a: &[f64]) -> Vec<Complex64> {
    let mut pts: Vec<f64> = b.iter().chain(a).copied().collect();
    pts.sort_by(f64::total_cmp);
    let mut z = Vec::new();
    let mut knots = vec![0.0];
    knots.extend(&pts);
    for w in knots.windows(2) {
        let x = 0.5 * (w[0] + w[1]);
        z.push(Complex64::new(x, 1.0));
        z.push(Complex64::new(x, 10.0));
    }
    for &p in b {
        let k = pts.partition_point(|&x| x < p);
        let left = if k > 0 { p - pts[k - 1] } else { p };
        let right = pts.get(k + 1).map_or(p, |&x| x - p);
        z.push(Complex64::new(p, 1e-6 * left.min(right)));
    }
    let r = 100.0 * pts.last().copied().unwrap_or(1.0) + 100.0;
    for j in 0..8 {
        z.push(Complex64::from_polar(r, std::f64::consts::PI * (j as f64 + 0.37) / 8.0));
    }
    z
}

/// Cross-check of membership: set conditions plus positivity of the imaginary part of
/// the reduced product function on the sample grid.
pub fn herglotz_check(t: &ThreeSpectraTriple) -> Result<TripleVerdict> {
    t.check_shape()?;
    let mut violations = set_violations(t);
    let (b, a) = reduced(t);
    if !(a.is_empty() && b.is_empty()) {
        for z in herglotz_samples(&b, &a) {
            let f = reduced_product(&b, &a, z);
            if !(f.im > 0.0) {
                violations.push(Violation::HerglotzSampling { re: z.re, im: z.im, value_im: f.im });
                break;
            }
        }
    }
    Ok(TripleVerdict { member: violations.is_empty(), violations })
}

/// Full verdict: set conditions, interlacing with end rules, and the sampling cross-check.
pub fn validate_triple(t: &ThreeSpectraTriple) -> Result<TripleVerdict> {
    let mut v = validate_sets(t)?;
    let h = herglotz_check(t)?;
    for x in h.violations {
        if matches!(x, Violation::HerglotzSampling { .. }) {
            v.violations.push(x);
        }
    }
    v.member = v.violations.is_empty();
    Ok(v)
}

/// Smallest relative distance between a pole and a zero of the cancelled product.
///
/// Norming constants recovered from double-precision data lose roughly
/// `ε / separation` in relative accuracy.
pub fn separation(t: &ThreeSpectraTriple) -> f64 {
    let (b, a) = reduced(t);
    let mut g = f64::INFINITY;
    for &p in &b {
        for &z in &a {
            g = g.min((p - z).abs() / p.max(z));
        }
    }
    g
}

/// `-(b-a)(a-c)/(b-c)`, positive for every interior split.
pub fn prefactor(t: &ThreeSpectraTriple) -> f64 {
    let (a, b, c) = (t.interval.a, t.interval.b, t.split);
    -(b - a) * (a - c) / (b - c)
}

/// `Ẇ(λ_k)` for `W = (b-a) Π_σ (1 - z/λ)`.
pub fn wdot_at(len: f64, sigma: &[f64], k: usize) -> f64 {
    let l = sigma[k];
    let mut p = -len / l;
    for (j, &x) in sigma.iter().enumerate() {
        if j != k {
            p *= (x - l) / x;
        }
    }
    p
}

/// Norming constants from a class member, as a spectral measure.
pub fn gamma_from_triple(t: &ThreeSpectraTriple) -> Result<SpectralMeasure<f64>> {
    let verdict = validate_triple(t)?;
    if !verdict.member {
        return Err(Error::invalid(format!("triple is not in the class: {:?}", verdict.violations)));
    }
    let pre = prefactor(t);
    let len = t.interval.len();
    let mut atoms = Vec::with_capacity(t.sigma.len());
    for (k, &l) in t.sigma.iter().enumerate() {
        let common = t.sigma_a.contains(&l) && t.sigma_b.contains(&l);
        let gamma_sq = if common {
            let c = t
                .coupling_at(l)
                .ok_or_else(|| Error::invalid(format!("missing coupling constant at common eigenvalue {l}")))?;
            wdot_at(len, &t.sigma, k).abs() / c
        } else {
            let mut g = pre / l;
            for (j, &x) in t.sigma.iter().enumerate() {
                if j != k {
                    g *= (x - l) / x;
                }
            }
            for &x in &t.sigma_a {
                g *= (x - l) / x;
            }
            for &x in &t.sigma_b {
                g *= x / (x - l);
            }
            g
        };
        if !(gamma_sq.is_finite() && gamma_sq > 0.0) {
            return Err(Error::PositivityLoss { step: k, what: "norming constant", value: gamma_sq });
        }
        atoms.push(Atom { lambda: l, weight: 1.0 / gamma_sq });
    }
    SpectralMeasure::new(t.interval, atoms)
}

/// Largest relative mismatch between two triples.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct TripleResidual {
    pub sigma: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub coupling: f64,
}

impl TripleResidual {
    pub fn max(&self) -> f64 {
        self.sigma.max(self.sigma_a).max(self.sigma_b).max(self.coupling)
    }
}

fn set_residual(p: &[f64], q: &[f64]) -> f64 {
    if p.len() != q.len() {
        return f64::INFINITY;
    }
    p.iter().zip(q).map(|(x, y)| (x - y).abs() / y.abs()).fold(0.0, f64::max)
}

pub fn triple_residual(got: &ThreeSpectraTriple, want: &ThreeSpectraTriple) -> TripleResidual {
    let mut coupling: f64 = 0.0;
    for &(l, c) in &want.couplings {
        let near = got
            .couplings
            .iter()
            .min_by(|p, q| (p.0 - l).abs().total_cmp(&(q.0 - l).abs()))
            .filter(|p| (p.0 - l).abs() <= 1e-6 * l);
        coupling = coupling.max(near.map_or(f64::INFINITY, |p| (p.1 - c).abs() / c));
    }
    TripleResidual {
        sigma: set_residual(&got.sigma, &want.sigma),
        sigma_a: set_residual(&got.sigma_a, &want.sigma_a),
        sigma_b: set_residual(&got.sigma_b, &want.sigma_b),
        coupling,
    }
}

#[derive(Clone, Debug)]
pub struct TripleInversion {
    pub inversion: Inversion,
    pub residual: TripleResidual,
}

impl TripleInversion {
    pub fn string(&self) -> &StieltjesString<f64> {
        &self.inversion.string
    }
}

/// Relative tolerance of the triple-reproduction check.
pub const TRIPLE_TOL: f64 = 1e-6;

/// Reconstructs a string from a finite triple and verifies that it reproduces the triple.
pub fn invert_triple(t: &ThreeSpectraTriple) -> Result<TripleInversion> {
    invert_triple_with(t, &InverseConfig::default())
}

pub fn invert_triple_with(t: &ThreeSpectraTriple, cfg: &InverseConfig) -> Result<TripleInversion> {
    let rho = gamma_from_triple(t)?;
    let inversion = invert_measure_with(&rho, t.interval, cfg)?;
    let got = three_spectra_of(&inversion.string, t.split)?;
    let residual = triple_residual(&got, t);
    if !(residual.max() <= TRIPLE_TOL) {
        return Err(Error::ToleranceUnreachable {
            requested: TRIPLE_TOL,
            achieved: residual.max(),
            detail: "reconstructed string does not reproduce the triple".into(),
        });
    }
    Ok(TripleInversion { inversion, residual })
}

/// One member of an isospectral family.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub couplings: Vec<(f64, f64)>,
    pub result: std::result::Result<TripleInversion, String>,
    /// `Σ λ⁻² |Ẇ|⁻¹ c` and `Σ λ⁻² |Ẇ|⁻¹ c⁻¹` over the whole spectrum.
    pub endpoint_sums: Option<(f64, f64)>,
}

/// Inverts the triple once per coupling assignment; failures stay in their row.
pub fn isospectral_sweep(t: &ThreeSpectraTriple, grid: &[Vec<(f64, f64)>]) -> Vec<SweepRow> {
    grid.par_iter()
        .map(|couplings| {
            let mut tt = t.clone();
            tt.couplings = couplings.clone();
            let result = invert_triple(&tt).map_err(|e| e.to_string());
            let endpoint_sums = result.as_ref().ok().map(|r| {
                let data = spectral_data(r.string());
                let len = t.interval.len();
                let lambdas: Vec<f64> = data.iter().map(|d| d.lambda).collect();
                let wdot: Vec<f64> = (0..lambdas.len()).map(|k| wdot_at(len, &lambdas, k)).collect();
                let c: Vec<f64> = data.iter().map(|d| d.coupling).collect();
                coupling_form_sums(&lambdas, &wdot, &c)
            });
            SweepRow { couplings: couplings.clone(), result, endpoint_sums }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Interval;

    fn triple(sigma: &[f64], sa: &[f64], sb: &[f64], split: f64, couplings: &[(f64, f64)]) -> ThreeSpectraTriple {
        ThreeSpectraTriple {
            interval: Interval::unit(),
            split,
            sigma: sigma.to_vec(),
            sigma_a: sa.to_vec(),
            sigma_b: sb.to_vec(),
            couplings: couplings.to_vec(),
        }
    }

    #[test]
    fn membership_examples() {
        assert!(validate_triple(&triple(&[3.0, 9.0], &[9.0], &[9.0], 0.5, &[(9.0, 1.0)])).unwrap().member);
        assert!(validate_triple(&triple(&[4.0], &[], &[6.0], 0.25, &[])).unwrap().member);
        let v = validate_triple(&triple(&[4.0], &[2.0], &[], 0.5, &[])).unwrap();
        assert!(!v.member);
        assert!(matches!(v.violations[0], Violation::Interlacing { end_rule: true, .. }));
        let v = validate_triple(&triple(&[4.0], &[5.0], &[5.0], 0.5, &[])).unwrap();
        assert!(v.violations.contains(&Violation::Containment { value: 5.0 }));
        let v = validate_triple(&triple(&[4.0, 9.0], &[9.0], &[], 0.5, &[])).unwrap();
        assert!(v.violations.contains(&Violation::Iff { value: 9.0 }));
    }

    #[test]
    fn norming_constants_by_hand() {
        let g = gamma_from_triple(&triple(&[4.0], &[], &[6.0], 0.25, &[])).unwrap();
        assert!((1.0 / g.atoms()[0].weight - 0.25).abs() < 1e-15);
        let g = gamma_from_triple(&triple(&[3.0, 9.0], &[9.0], &[9.0], 0.5, &[(9.0, 1.0)])).unwrap();
        for a in g.atoms() {
            assert!((1.0 / a.weight - 2.0 / 9.0).abs() < 1e-15);
        }
        let g = gamma_from_triple(&triple(&[4.0], &[], &[], 0.5, &[])).unwrap();
        assert!((1.0 / g.atoms()[0].weight - 0.25).abs() < 1e-15);
    }

    #[test]
    fn missing_coupling_rejected() {
        assert!(gamma_from_triple(&triple(&[3.0, 9.0], &[9.0], &[9.0], 0.5, &[])).unwrap_err().is_validation());
    }

    #[test]
    fn f1_and_f2_from_triples() {
        let s = invert_triple(&triple(&[4.0], &[], &[6.0], 0.25, &[])).unwrap();
        assert!((s.string().positions()[0] - 0.5).abs() < 1e-12 && (s.string().masses()[0] - 1.0).abs() < 1e-12);
        let s = invert_triple(&triple(&[3.0, 9.0], &[9.0], &[9.0], 0.5, &[(9.0, 1.0)])).unwrap();
        for (p, q) in s.string().positions().iter().zip([1.0 / 3.0, 2.0 / 3.0]) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn prefactor_positive() {
        for c in [0.01, 0.3, 0.5, 0.99] {
            assert!(prefactor(&triple(&[], &[], &[], c, &[])) > 0.0);
        }
    }
}
