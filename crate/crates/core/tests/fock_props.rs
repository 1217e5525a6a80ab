use proptest::prelude::*;
use subplanck_core::fock::*;
use subplanck_core::quadrature::GaussRule;

fn amp(a: f64, b: f64) -> ComplexAmplitude<f64> {
    ComplexAmplitude::new(a, b)
}

#[test]
fn displacement_completeness() {
    // |⟨k|D(ν)|m⟩|² is isotropic, so ∫d²ν/π reduces to ∫₀^∞ dx with x = |ν|²
    let rule = GaussRule::<f64>::laguerre(40).unwrap();
    for k in 0..=6 {
        for m in 0..=6 {
            let s: f64 = rule
                .nodes
                .iter()
                .zip(rule.weights())
                .map(|(&x, w)| w * x.exp() * displacement_element(k, m, ComplexAmplitude::from_polar(x.sqrt(), 0.3)).norm_sqr())
                .sum();
            assert!((s - 1.0).abs() < 1e-6, "({k},{m}): {s}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn displaced_number_state_keeps_norm(n in 0usize..6, r in 0.0f64..2.0, th in 0.0f64..6.3) {
        let s = make_number::<f64>(n, 8).unwrap();
        let v = s.displaced(ComplexAmplitude::from_polar(r, th), 96);
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((norm - 1.0).abs() < 1e-8);
    }

    #[test]
    fn coherent_constructor_invariants(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let s = make_coherent(amp(a, b), 64).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        let q = quad_moments(&s);
        prop_assert!((q.mean_x - a).abs() < 1e-9 && (q.mean_p - b).abs() < 1e-9);
        prop_assert!((q.var_x - 0.5).abs() < 1e-9 && (q.var_p - 0.5).abs() < 1e-9);
    }

    #[test]
    fn random_states_are_normalised_and_reproducible(dim in 1usize..40, seed in any::<u64>()) {
        let a = make_random::<f64>(dim, seed).unwrap();
        let b = make_random::<f64>(dim, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!((a.norm_sqr() - 1.0).abs() < 1e-12);
        // canonical phase: largest coefficient is real and positive
        let big = a.coeffs().iter().cloned().max_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap()).unwrap();
        prop_assert!(big.im == 0.0 && big.re > 0.0);
    }

    #[test]
    fn uncertainty_relation(seed in any::<u64>(), dim in 1usize..24) {
        let q = quad_moments(&make_random::<f64>(dim, seed).unwrap());
        prop_assert!(q.var_x * q.var_p >= 0.25 - 1e-10);
    }

    #[test]
    fn thermal_state_has_unit_trace(nbar in 0.0f64..3.0) {
        let rho = make_thermal(ThermalParams::from_nbar(nbar).unwrap(), 128).unwrap();
        prop_assert!((rho.matrix().trace().re - 1.0).abs() < 1e-10);
        prop_assert!((rho.purity() - 1.0 / (2.0 * nbar + 1.0)).abs() < 1e-9);
    }
}
