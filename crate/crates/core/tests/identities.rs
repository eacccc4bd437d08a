use num_complex::Complex64;
use proptest::prelude::*;

use krein::inverse::{invert_measure, measure_from_pairs, truncation_ladder, InverseConfig};
use krein::singular::{green_diagonal, m_a_series, phi_pair, wronskian_fn, SingularConfig};
use krein::stieltjes::{
    characteristic_polynomial, dirichlet_spectrum, spectral_data, spectral_data_mp, string_measure, transfer_phi, wronskian_complex,
    wronskian_slope,
};
use krein::three_spectra::{gamma_from_triple, isospectral_sweep, separation, validate_triple};
use krein::{
    ls_integral, validate_mass, zero_product_eval, Density, Interval, MassDistribution, SpectralMeasure,
    StieltjesString, ZeroProduct, ZeroSet,
};
use krein::{Bits, Field, Mpf};

fn string_strategy(max: usize) -> impl Strategy<Value = StieltjesString<f64>> {
    prop::collection::vec((0.01f64..0.99, -1.0f64..1.0), 1..=max).prop_map(|v| {
        let atoms: Vec<(f64, f64)> = v.into_iter().map(|(x, e)| (x, 10f64.powf(e))).collect();
        StieltjesString::from_masses(Interval::unit(), &atoms).unwrap()
    })
}

/// Simple spectrum, resolvable in double precision.
fn well_separated(s: &StieltjesString<f64>) -> bool {
    dirichlet_spectrum(s).windows(2).all(|w| w[1] - w[0] > 1e-4 * w[1])
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(1e-300)
}

/// Point masses plus a uniform background on `(0, 1)`.
fn mixed(s: &StieltjesString<f64>, background: f64) -> MassDistribution {
    MassDistribution::new(Interval::unit(), s.atoms(), Some(Density::uniform(background))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn ls_integral_is_antisymmetric(s in string_strategy(6), bg in 0.0f64..2.0, p in 0.01f64..0.99, q in 0.01f64..0.99, at_atom in any::<bool>()) {
        let w = mixed(&s, bg);
        let alpha = if at_atom { s.positions()[0] } else { p };
        let g = |x: f64| 1.0 + x * x;
        let fwd = ls_integral(&w, g, alpha, q).unwrap();
        let back = ls_integral(&w, g, q, alpha).unwrap();
        prop_assert!((fwd + back).abs() <= 1e-12 * (1.0 + fwd.abs()));
    }

    #[test]
    fn integration_by_parts(s in string_strategy(6), p in 0.01f64..0.99, q in 0.01f64..0.99, kink in 0.01f64..0.99,
                            c in (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0), at_atom in any::<bool>()) {
        let w = s.to_mass_distribution();
        let alpha = if at_atom { s.positions()[0] } else { p };
        let beta = q;
        let f = |x: f64| c.0 + c.1 * x + c.2 * (x - kink).abs();
        let df = |x: f64| c.1 + c.2 * (x - kink).signum();
        let g = |x: f64| 2.0 - x;
        let lhs = ls_integral(&w, |x| f(x) * g(x), alpha, beta).unwrap();
        // f' and x -> ∫_α^x g dω are constant between consecutive breakpoints.
        let (lo, hi) = (alpha.min(beta), alpha.max(beta));
        let mut cuts: Vec<f64> = s.positions().iter().copied().chain([kink]).filter(|&x| lo < x && x < hi).collect();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        let mut inner = 0.0;
        for win in cuts.windows(2) {
            let mid = 0.5 * (win[0] + win[1]);
            inner += df(mid) * ls_integral(&w, g, alpha, mid).unwrap() * (win[1] - win[0]);
        }
        if alpha > beta {
            inner = -inner;
        }
        let rhs = f(beta) * ls_integral(&w, g, alpha, beta).unwrap() - inner;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn zero_product_slope_at_origin(zeros in prop::collection::btree_set(1u32..10_000, 0..12), scale in 0.1f64..10.0) {
        let zs: Vec<f64> = zeros.iter().map(|&k| k as f64 / 7.0).collect();
        let sum: f64 = zs.iter().map(|z| 1.0 / z).sum();
        let p = ZeroProduct { scale, zeros: ZeroSet::finite(zs).unwrap() };
        let v = zero_product_eval(&p, Complex64::new(0.0, 0.0));
        prop_assert_eq!(v.value, Complex64::new(scale, 0.0));
        prop_assert!(rel(v.derivative.re, -scale * sum) <= 1e-13 || sum == 0.0);
    }

    #[test]
    fn weighted_total_closed_form(s in string_strategy(12)) {
        let cert = validate_mass(&s.to_mass_distribution()).unwrap();
        prop_assert!(rel(cert.weighted_total, s.weighted_total()) <= 1e-12);
        prop_assert!(cert.finite_near_a && cert.finite_near_b);
    }

    #[test]
    fn dirichlet_energy(s in string_strategy(6)) {
        // One-sided sweeps at a rounded eigenvalue are ill-conditioned for localized modes,
        // so the identity is checked at 256 bits.
        let mp = s.map(|x| Mpf::from_f64(*x, Bits(256)));
        for t in spectral_data_mp(&mp) {
            let nodes = transfer_phi(&mp, &t.lambda);
            let slopes = nodes.slopes.iter().chain([&nodes.end_slope]);
            let energy = mp.lengths().iter().zip(slopes).fold(t.lambda.lit(0.0), |acc, (l, d)| acc + l.clone() * d.clone() * d.clone());
            let lhs = t.lambda.clone() * t.gamma_sq.clone();
            let err = ((lhs - energy.clone()) / energy).to_f64().abs();
            prop_assert!(err <= 1e-40, "relative error {err:e}");
        }
    }

    #[test]
    fn wronskian_slope_three_ways(s in string_strategy(6)) {
        prop_assume!(well_separated(&s));
        let dw = characteristic_polynomial(&s).derivative();
        for t in spectral_data(&s) {
            let by_nodes = wronskian_slope(&s, &t.lambda);
            let sign = if t.theta == 1 { -1.0 } else { 1.0 };
            let by_norms = sign * t.coupling * t.gamma_sq;
            let by_poly = -dw.eval(&t.lambda);
            prop_assert!(rel(by_nodes, by_norms) <= 1e-8);
            prop_assert!(rel(by_poly, by_norms) <= 1e-6);
        }
    }

    #[test]
    fn characteristic_polynomial_is_zero_product(s in string_strategy(6)) {
        prop_assume!(well_separated(&s));
        let mut want = krein::poly::Polynomial::constant(s.interval().len());
        for l in dirichlet_spectrum(&s) {
            want = want.mul_one_minus(&l);
        }
        let got = characteristic_polynomial(&s);
        prop_assert_eq!(got.degree(), want.degree());
        for (p, q) in got.coeffs.iter().zip(&want.coeffs) {
            prop_assert!(rel(*p, *q) <= 1e-8, "{p} vs {q}");
        }
    }

    #[test]
    fn singular_matches_point_masses(s in string_strategy(6), re in -40.0f64..40.0, im in -40.0f64..40.0) {
        let z = Complex64::new(re, im);
        let got = wronskian_fn(&s.to_mass_distribution(), z, &SingularConfig::default()).unwrap();
        let want = wronskian_complex(&s, z);
        prop_assert!((got - want).norm() <= 1e-10 * want.norm().max(1.0));
    }

    #[test]
    fn green_diagonal_is_herglotz(s in string_strategy(5), bg in 0.0f64..2.0, c in 0.05f64..0.95, re in -30.0f64..60.0, im in 0.01f64..30.0) {
        let g = green_diagonal(&mixed(&s, bg), Complex64::new(re, im), c, &SingularConfig::default()).unwrap();
        prop_assert!(g.im > 0.0, "{g}");
    }

    #[test]
    fn wronskian_independent_of_reference_point(alpha in -0.5f64..0.5, beta in -0.5f64..0.5, re in -20.0f64..20.0, im in -20.0f64..20.0) {
        let w = MassDistribution::from_density(Interval::unit(), Density::power(1.0, alpha, beta)).unwrap();
        let z = Complex64::new(re, im);
        let cfg = SingularConfig::default();
        let want = wronskian_fn(&w, z, &cfg).unwrap();
        for x in [0.2, 0.5, 0.8] {
            let p = phi_pair(&w, z, x, &cfg).unwrap();
            let got = p.phi_b * p.dphi_a - p.phi_a * p.dphi_b;
            prop_assert!((got - want).norm() <= 1e-9 * want.norm().max(1.0), "x = {x}: {got} vs {want}");
        }
    }

    #[test]
    fn neumann_tail_bound_holds(bg in 0.1f64..3.0, x in 0.1f64..0.9, re in -15.0f64..15.0, im in -15.0f64..15.0, tol in 1e-8f64..1e-3) {
        let w = MassDistribution::from_density(Interval::unit(), Density::uniform(bg)).unwrap();
        let z = Complex64::new(re, im);
        let coarse = m_a_series(&w, z, x, &SingularConfig::with_tol(tol)).unwrap();
        let fine = m_a_series(&w, z, x, &SingularConfig::with_tol(tol / 2.0)).unwrap();
        prop_assert!((fine.value - coarse.value).norm() <= coarse.tail_bound + 1e-13 * coarse.value.norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn inversion_positive_and_length_exact(s in string_strategy(8)) {
        let back = invert_measure(&string_measure(&s).unwrap(), s.interval()).unwrap();
        prop_assert!(back.masses().iter().chain(back.lengths()).all(|&v| v > 0.0));
        let total: f64 = back.lengths().iter().sum();
        prop_assert!(rel(total, s.interval().len()) <= 1e-12);
    }

    #[test]
    fn inversion_ignores_atom_order(s in string_strategy(6), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let rho = string_measure(&s).unwrap();
        let mut pairs: Vec<(f64, f64)> = rho.atoms().iter().map(|a| (a.lambda, a.weight)).collect();
        let sorted = measure_from_pairs(s.interval(), &pairs).unwrap();
        pairs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let shuffled = measure_from_pairs(s.interval(), &pairs).unwrap();
        let p = invert_measure(&sorted, s.interval()).unwrap();
        let q = invert_measure(&shuffled, s.interval()).unwrap();
        prop_assert_eq!(p.positions(), q.positions());
        prop_assert_eq!(p.masses(), q.masses());
    }

    #[test]
    fn ladder_respects_uniform_bound(weights in prop::collection::vec(0.5f64..2.0, 6)) {
        let pairs: Vec<(f64, f64)> = weights.iter().enumerate().map(|(k, w)| {
            let l = ((k + 1) as f64 * std::f64::consts::PI).powi(2);
            (l, 2.0 * l * w)
        }).collect();
        let rho = measure_from_pairs(Interval::unit(), &pairs).unwrap();
        let cutoffs: Vec<f64> = pairs.iter().map(|p| p.0 * 1.01).collect();
        let rep = truncation_ladder(&rho, Interval::unit(), &cutoffs, &InverseConfig::default()).unwrap();
        prop_assert!(rep.rungs.iter().all(|r| r.result.is_ok()));
        prop_assert!(rep.bound_respected());
    }

    #[test]
    fn sweep_changes_string_not_triple(half in prop::collection::vec((0.05f64..0.45, 0.3f64..3.0), 1..4)) {
        let atoms: Vec<(f64, f64)> = half.iter().flat_map(|&(x, m)| [(x, m), (1.0 - x, m)]).collect();
        let s = StieltjesString::from_masses(Interval::unit(), &atoms).unwrap();
        let t = krein::stieltjes::three_spectra_of(&s, 0.5).unwrap();
        prop_assume!(!t.couplings.is_empty() && separation(&t) >= 1e-6);
        let grid: Vec<Vec<(f64, f64)>> = [0.5, 2.0]
            .iter()
            .map(|f| t.couplings.iter().map(|&(l, c)| (l, c * f)).collect())
            .collect();
        let rows = isospectral_sweep(&t, &grid);
        let strings: Vec<_> = rows.iter().map(|r| r.result.as_ref().unwrap().string().clone()).collect();
        let differ = strings[0].masses().iter().zip(strings[1].masses()).any(|(p, q)| rel(*p, *q) > 1e-6)
            || strings[0].positions().iter().zip(strings[1].positions()).any(|(p, q)| (p - q).abs() > 1e-6);
        prop_assert!(differ);
        for r in &rows {
            prop_assert!(r.result.as_ref().unwrap().residual.max() <= 1e-6);
        }
    }

    #[test]
    fn triple_weights_positive(s in string_strategy(6), split in 0.1f64..0.9) {
        let t = krein::stieltjes::three_spectra_of(&s, split).unwrap();
        prop_assume!(separation(&t) >= 1e-6 && validate_triple(&t).unwrap().member);
        let rho: SpectralMeasure<f64> = gamma_from_triple(&t).unwrap();
        prop_assert!(rho.atoms().iter().all(|a| a.weight > 0.0));
    }
}
