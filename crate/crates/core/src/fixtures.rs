//! Named fixtures and seeded random generators.

use rand::Rng;

use crate::model::{Atom, Density, Interval, MassDistribution, SpectralMeasure, StieltjesString};

/// Unit mass at `1/2` on `(0, 1)`.
pub fn f1() -> StieltjesString<f64> {
    StieltjesString::from_masses(Interval::unit(), &[(0.5, 1.0)]).expect("valid")
}

/// Unit masses at `1/3` and `2/3` on `(0, 1)`.
pub fn f2() -> StieltjesString<f64> {
    StieltjesString::from_masses(Interval::unit(), &[(1.0 / 3.0, 1.0), (2.0 / 3.0, 1.0)]).expect("valid")
}

pub fn uniform_density(interval: Interval) -> MassDistribution {
    MassDistribution::from_density(interval, Density::uniform(1.0)).expect("valid")
}

/// `1..=n_max` masses at uniform positions in `(0, 1)`, masses log-uniform in `[1e-2, 1e2]`.
pub fn random_string(rng: &mut impl Rng, n_max: usize) -> StieltjesString<f64> {
    let n = rng.gen_range(1..=n_max);
    let mut xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).filter(|&x| x > 0.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let atoms: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 10f64.powf(rng.gen_range(-2.0..2.0)))).collect();
    StieltjesString::from_masses(Interval::unit(), &atoms).expect("valid")
}

/// Masses in `[0.8, 1.25]` at grid points `(k + 1/2 + u)/n` with `|u| <= 1/10`.
///
/// Mild disorder keeps eigenfunctions extended, so split spectra stay apart from the
/// full spectrum.
pub fn jittered_string(rng: &mut impl Rng, n_max: usize) -> StieltjesString<f64> {
    let n = rng.gen_range(1..=n_max);
    let atoms: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let x = (k as f64 + 0.5 + rng.gen_range(-0.1..0.1)) / n as f64;
            (x, rng.gen_range(0.8..1.25))
        })
        .collect();
    StieltjesString::from_masses(Interval::unit(), &atoms).expect("valid")
}

/// `1..=n_max` atoms with locations log-uniform in `[1e-2, 1e6]` and weights log-uniform
/// in `[1e-6, 1e6]`.
pub fn random_measure(rng: &mut impl Rng, n_max: usize) -> SpectralMeasure<f64> {
    let n = rng.gen_range(1..=n_max);
    let mut ls: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(-2.0..6.0))).collect();
    ls.sort_by(f64::total_cmp);
    ls.dedup();
    let atoms = ls.into_iter().map(|lambda| Atom { lambda, weight: 10f64.powf(rng.gen_range(-6.0..6.0)) }).collect();
    SpectralMeasure::new(Interval::unit(), atoms).expect("valid")
}
