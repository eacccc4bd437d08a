use num_complex::Complex64;
use proptest::prelude::*;

use krein::convergence::weakstar_distance;
use krein::inverse::invert_measure;
use krein::stieltjes::{dirichlet_spectrum, string_measure, three_spectra_of, wronskian_complex};
use krein::three_spectra::{gamma_from_triple, herglotz_check, prefactor, separation, validate_sets, validate_triple};
use krein::{Interval, StieltjesString, ThreeSpectraTriple};

fn string_strategy(max: usize) -> impl Strategy<Value = StieltjesString<f64>> {
    prop::collection::vec((0.01f64..0.99, -1.5f64..1.5), 0..=max).prop_map(|v| {
        let atoms: Vec<(f64, f64)> = v.into_iter().map(|(x, e)| (x, 10f64.powf(e))).collect();
        StieltjesString::from_masses(Interval::unit(), &atoms).unwrap()
    })
}

/// Spectra apart by at least `1e-6` relative, so the triple survives rounding to f64.
fn resolvable(t: &ThreeSpectraTriple) -> bool {
    t.sigma.windows(2).all(|w| w[1] - w[0] >= 1e-6 * w[1]) && separation(t) >= 1e-6
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weakstar_is_a_pseudometric(p in string_strategy(6), q in string_strategy(6), r in string_strategy(6)) {
        let (p, q, r) = (p.to_mass_distribution(), q.to_mass_distribution(), r.to_mass_distribution());
        let pq = weakstar_distance(&p, &q).unwrap();
        let qp = weakstar_distance(&q, &p).unwrap();
        let qr = weakstar_distance(&q, &r).unwrap();
        let pr = weakstar_distance(&p, &r).unwrap();
        prop_assert!(pq >= 0.0);
        prop_assert!((pq - qp).abs() <= 1e-12);
        prop_assert!(pr <= pq + qr + 1e-12);
        prop_assert!(weakstar_distance(&p, &p).unwrap() == 0.0);
    }

    #[test]
    fn prefactor_positive(a in -10.0f64..10.0, len in 0.01f64..20.0, t in 0.001f64..0.999) {
        let interval = Interval::new(a, a + len).unwrap();
        let split = a + t * len;
        let triple = ThreeSpectraTriple { interval, split, sigma: vec![], sigma_a: vec![], sigma_b: vec![], couplings: vec![] };
        prop_assert!(prefactor(&triple) > 0.0);
    }

    #[test]
    fn trace_identity(s in string_strategy(12)) {
        let lhs: f64 = dirichlet_spectrum(&s).iter().map(|l| 1.0 / l).sum();
        let rhs: f64 = s.atoms().iter().map(|&(x, m)| m * (1.0 - x) * x).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * rhs.max(1e-300));
    }

    #[test]
    fn wronskian_normalized_and_enveloped(s in string_strategy(8), re in -50.0f64..50.0, im in -50.0f64..50.0) {
        prop_assert!((wronskian_complex(&s, Complex64::new(0.0, 0.0)).re - 1.0).abs() < 1e-12);
        let z = Complex64::new(re, im);
        let env: f64 = dirichlet_spectrum(&s).iter().map(|l| 1.0 + z.norm() / l).product();
        prop_assert!(wronskian_complex(&s, z).norm() <= env * (1.0 + 1e-9));
    }

    #[test]
    fn forward_triples_are_members(s in string_strategy(8), split in 0.05f64..0.95) {
        prop_assume!(s.positions().iter().all(|x| (x - split).abs() > 1e-6));
        let t = three_spectra_of(&s, split).unwrap();
        prop_assume!(resolvable(&t));
        let v = validate_triple(&t).unwrap();
        prop_assert!(v.member, "{:?}", v.violations);
    }

    #[test]
    fn validators_agree_on_arbitrary_sets(
        sigma in prop::collection::btree_set(1u32..40, 0..6),
        sa in prop::collection::btree_set(1u32..40, 0..6),
        sb in prop::collection::btree_set(1u32..40, 0..6),
    ) {
        let f = |s: &std::collections::BTreeSet<u32>| s.iter().map(|&k| k as f64).collect::<Vec<_>>();
        let t = ThreeSpectraTriple {
            interval: Interval::unit(),
            split: 0.5,
            sigma: f(&sigma),
            sigma_a: f(&sa),
            sigma_b: f(&sb),
            couplings: vec![],
        };
        prop_assert_eq!(validate_sets(&t).unwrap().member, herglotz_check(&t).unwrap().member);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gamma_from_triple_matches_measure(s in string_strategy(6), split in 0.1f64..0.9) {
        prop_assume!(s.positions().iter().all(|x| (x - split).abs() > 1e-3));
        let t = three_spectra_of(&s, split).unwrap();
        prop_assume!(resolvable(&t));
        let got = gamma_from_triple(&t).unwrap();
        let want = string_measure(&s).unwrap();
        for (p, q) in got.atoms().iter().zip(want.atoms()) {
            prop_assert!((p.weight - q.weight).abs() <= 1e-6 * q.weight);
        }
    }

    #[test]
    fn inverse_undoes_forward(s in string_strategy(6)) {
        let back = invert_measure(&string_measure(&s).unwrap(), s.interval()).unwrap();
        prop_assert_eq!(back.len(), s.len());
        for (p, q) in back.masses().iter().zip(s.masses()) {
            prop_assert!((p - q).abs() <= 1e-7 * q);
        }
        for (p, q) in back.positions().iter().zip(s.positions()) {
            prop_assert!((p - q).abs() <= 1e-9);
        }
    }
}
