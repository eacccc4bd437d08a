//! Weak-star metric and convergence diagnostics for sequences of strings.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{density_integral, validate_mass, Interval, MassDistribution, StieltjesString};
use crate::singular::{truncated_spectral_measure, Grid, SingularConfig};
use crate::stieltjes::{spectral_data, wronskian_complex};

/// Test family: dyadic hat functions, listed level by level, weighted `2^-i`.
#[derive(Clone, Copy, Debug)]
pub struct WeakStarMetricConfig {
    pub functions: usize,
}

impl Default for WeakStarMetricConfig {
    fn default() -> Self {
        WeakStarMetricConfig { functions: 24 }
    }
}

/// Support `[lo, hi]` of the `i`-th hat (`i >= 1`); the peak sits at the midpoint.
pub fn hat_support(interval: Interval, i: usize) -> (f64, f64) {
    let level = usize::BITS - 1 - i.leading_zeros();
    let k = i - (1 << level);
    let h = interval.len() / (1u64 << level) as f64;
    (interval.a + k as f64 * h, interval.a + (k + 1) as f64 * h)
}

pub fn hat(interval: Interval, i: usize, x: f64) -> f64 {
    let (lo, hi) = hat_support(interval, i);
    if x <= lo || x >= hi {
        return 0.0;
    }
    let mid = 0.5 * (lo + hi);
    if x <= mid {
        (x - lo) / (mid - lo)
    } else {
        (hi - x) / (hi - mid)
    }
}

/// `∫ f_i(x) (b-x)(x-a) dω` for each test function.
pub fn hat_moments(w: &MassDistribution, cfg: &WeakStarMetricConfig) -> Result<Vec<f64>> {
    validate_mass(w)?;
    let iv = w.interval();
    (1..=cfg.functions)
        .into_par_iter()
        .map(|i| {
            let (lo, hi) = hat_support(iv, i);
            let g = |x: f64| hat(iv, i, x) * (iv.b - x) * (x - iv.a);
            let mut v: f64 = w.atoms().iter().filter(|p| lo < p.0 && p.0 < hi).map(|&(x, m)| m * g(x)).sum();
            let mid = 0.5 * (lo + hi);
            let oa = if lo == iv.a { 2.0 } else { 0.0 };
            let ob = if hi == iv.b { 2.0 } else { 0.0 };
            v += density_integral(w, &g, lo, mid, oa, 0.0, 1e-12)?.0;
            v += density_integral(w, &g, mid, hi, 0.0, ob, 1e-12)?.0;
            Ok(v)
        })
        .collect()
}

fn distance_from_moments(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .enumerate()
        .map(|(k, (x, y))| 0.5f64.powi(k as i32 + 1) * (x - y).abs().min(1.0))
        .sum()
}

pub fn weakstar_distance_with(w1: &MassDistribution, w2: &MassDistribution, cfg: &WeakStarMetricConfig) -> Result<f64> {
    if w1.interval() != w2.interval() {
        return Err(Error::invalid("measures live on different intervals"));
    }
    Ok(distance_from_moments(&hat_moments(w1, cfg)?, &hat_moments(w2, cfg)?))
}

/// `Σ_i 2^-i min(1, |∫ f_i (b-x)(x-a) d(ω1 - ω2)|)` over the default family.
pub fn weakstar_distance(w1: &MassDistribution, w2: &MassDistribution) -> Result<f64> {
    weakstar_distance_with(w1, w2, &WeakStarMetricConfig::default())
}

/// One row per string of the sequence.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// `|W_n(z) - W(z)|` at each grid point.
    pub wronskian_deltas: Vec<f64>,
    /// Whether `|W_n(z)| <= (b-a) Π (1 + |z|/λ)` over its own spectrum at every grid point.
    pub envelope_ok: bool,
    /// Hausdorff distance between spectra below `Λ`.
    pub spectral_distance: f64,
    /// Largest relative weight difference at matched eigenvalues.
    pub norming_delta: f64,
    pub weighted_total: f64,
    pub weakstar: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub grid: Vec<(f64, f64)>,
    pub cutoff: f64,
    pub reference_spectrum: Vec<f64>,
    pub reference_weighted_total: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Every eigenvalue below `Λ` of every string is close to a reference eigenvalue.
    pub common_spectrum: bool,
    /// Weighted totals approach the reference total.
    pub masses_converge: bool,
    /// Reference eigenvalues below `Λ` not approached by the last string.
    pub exceptional: Vec<f64>,
}

impl ConvergenceReport {
    /// Plot-ready rows `n, index, delta`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,index,delta\n");
        for r in &self.rows {
            for (k, d) in r.wronskian_deltas.iter().enumerate() {
                out.push_str(&format!("{},{},{:e}\n", r.n, k, d));
            }
        }
        out
    }
}

/// Compact grid: the half circle of radius `Λ/2` in the upper half plane plus its real diameter.
pub fn default_grid(cutoff: f64) -> Vec<Complex64> {
    let r = 0.5 * cutoff;
    let mut g: Vec<Complex64> = (0..=8).map(|k| Complex64::from_polar(r, std::f64::consts::PI * k as f64 / 8.0)).collect();
    g.extend([-0.5 * r, 0.0, 0.5 * r].map(|x| Complex64::new(x, 0.0)));
    g
}

fn hausdorff(p: &[f64], q: &[f64]) -> f64 {
    if p.is_empty() && q.is_empty() {
        return 0.0;
    }
    if p.is_empty() || q.is_empty() {
        return f64::INFINITY;
    }
    let near = |x: f64, set: &[f64]| set.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min);
    let d1 = p.iter().map(|&x| near(x, q)).fold(0.0, f64::max);
    let d2 = q.iter().map(|&x| near(x, p)).fold(0.0, f64::max);
    d1.max(d2)
}

const MATCH_RTOL: f64 = 1e-6;

/// Observational convergence diagnostics of `seq` towards `reference`.
///
/// `split` is the interior point where Wronskians are evaluated for the reference.
pub fn convergence_report(
    seq: &[StieltjesString<f64>],
    reference: &MassDistribution,
    split: f64,
    cutoff: f64,
) -> Result<ConvergenceReport> {
    let iv = reference.interval();
    if !iv.contains_open(split) {
        return Err(Error::invalid("split point must be interior"));
    }
    if !(cutoff.is_finite() && cutoff > 0.0) {
        return Err(Error::invalid("cutoff must be positive"));
    }
    if seq.iter().any(|s| s.interval() != iv) {
        return Err(Error::invalid("strings and reference live on different intervals"));
    }
    let cert = validate_mass(reference)?;
    let reference_weighted_total = cert.weighted_total;
    let tol = 1e-10;
    let scfg = SingularConfig::with_tol(tol);
    let rho = truncated_spectral_measure(reference, cutoff, tol)?;
    let ref_sigma: Vec<f64> = rho.atoms().iter().map(|a| a.lambda).collect();
    let grid_z = default_grid(cutoff);
    let zmax = grid_z.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let g = Grid::build(reference, zmax, &[split], &scfg)?;
    let w_ref: Vec<Complex64> = grid_z.iter().map(|&z| g.wronskian_at(z, split, &scfg)).collect::<Result<_>>()?;
    let ref_moments = hat_moments(reference, &WeakStarMetricConfig::default())?;
    let rows: Vec<ConvergenceRow> = seq
        .par_iter()
        .enumerate()
        .map(|(n, s)| -> Result<ConvergenceRow> {
            let data = spectral_data(s);
            let sigma: Vec<f64> = data.iter().map(|t| t.lambda).collect();
            let below: Vec<f64> = sigma.iter().copied().filter(|&l| l <= cutoff).collect();
            let mut envelope_ok = true;
            let wronskian_deltas = grid_z
                .iter()
                .zip(&w_ref)
                .map(|(&z, &wr)| {
                    let wn = wronskian_complex(s, z);
                    let env = iv.len() * sigma.iter().map(|l| 1.0 + z.norm() / l).product::<f64>();
                    envelope_ok &= wn.norm() <= env * (1.0 + 1e-9);
                    (wn - wr).norm()
                })
                .collect();
            let mut norming_delta = 0.0f64;
            for a in rho.atoms() {
                if let Some(t) = data.iter().min_by(|p, q| (p.lambda - a.lambda).abs().total_cmp(&(q.lambda - a.lambda).abs())) {
                    norming_delta = norming_delta.max((1.0 / t.gamma_sq - a.weight).abs() / a.weight);
                } else {
                    norming_delta = f64::INFINITY;
                }
            }
            let m = s.to_mass_distribution();
            let weakstar = distance_from_moments(&hat_moments(&m, &WeakStarMetricConfig::default())?, &ref_moments);
            Ok(ConvergenceRow {
                n,
                wronskian_deltas,
                envelope_ok,
                spectral_distance: hausdorff(&below, &ref_sigma),
                norming_delta,
                weighted_total: s.weighted_total(),
                weakstar,
            })
        })
        .collect::<Result<_>>()?;
    let close = |x: f64| ref_sigma.iter().any(|&y| (x - y).abs() <= MATCH_RTOL * y);
    let common_spectrum = seq
        .iter()
        .all(|s| spectral_data(s).iter().filter(|t| t.lambda <= cutoff).all(|t| close(t.lambda)));
    let gaps: Vec<f64> = rows.iter().map(|r| (r.weighted_total - reference_weighted_total).abs()).collect();
    let masses_converge = !gaps.is_empty()
        && gaps.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15)
        && gaps.last().copied().unwrap_or(0.0) <= 0.5 * gaps[0].max(1e-12 * reference_weighted_total);
    let exceptional = match seq.last() {
        Some(s) => {
            let last: Vec<f64> = spectral_data(s).iter().map(|t| t.lambda).collect();
            ref_sigma
                .iter()
                .copied()
                .filter(|&y| !last.iter().any(|&x| (x - y).abs() <= MATCH_RTOL * y))
                .collect()
        }
        None => ref_sigma.clone(),
    };
    Ok(ConvergenceReport {
        grid: grid_z.iter().map(|z| (z.re, z.im)).collect(),
        cutoff,
        reference_spectrum: ref_sigma,
        reference_weighted_total,
        rows,
        common_spectrum,
        masses_converge,
        exceptional,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hats_cover_dyadic_levels() {
        let iv = Interval::unit();
        assert_eq!(hat_support(iv, 1), (0.0, 1.0));
        assert_eq!(hat_support(iv, 2), (0.0, 0.5));
        assert_eq!(hat_support(iv, 3), (0.5, 1.0));
        assert_eq!(hat_support(iv, 7), (0.75, 1.0));
        assert!((hat(iv, 1, 0.5) - 1.0).abs() < 1e-15);
        assert!((hat(iv, 1, 0.25) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_atom_moment() {
        let s = StieltjesString::from_masses(Interval::unit(), &[(0.25, 2.0)]).unwrap();
        let m = hat_moments(&s.to_mass_distribution(), &WeakStarMetricConfig { functions: 3 }).unwrap();
        // f_1(0.25) = 0.5, f_2(0.25) = 1, f_3 = 0; weight 0.75 * 0.25.
        let w = 2.0 * 0.1875;
        assert!((m[0] - 0.5 * w).abs() < 1e-15 && (m[1] - w).abs() < 1e-15 && m[2] == 0.0);
    }

    #[test]
    fn constant_sequence_has_zero_deltas() {
        let s = StieltjesString::from_masses(Interval::unit(), &[(0.3, 1.0), (0.7, 0.5)]).unwrap();
        let r = convergence_report(&[s.clone(), s.clone(), s.clone()], &s.to_mass_distribution(), 0.5, 50.0).unwrap();
        for row in &r.rows {
            assert!(row.wronskian_deltas.iter().all(|d| *d < 1e-10));
            assert!(row.spectral_distance < 1e-8 && row.norming_delta < 1e-7 && row.weakstar < 1e-14);
            assert!(row.envelope_ok);
        }
        assert!(r.common_spectrum && r.exceptional.is_empty());
    }
}
