use proptest::prelude::*;
use subplanck_core::fock::*;
use subplanck_core::phasespace::*;
use subplanck_core::scalar::C;

fn states() -> Vec<PureState<f64>> {
    vec![
        make_number(0, 64).unwrap(),
        make_number(2, 64).unwrap(),
        make_coherent(ComplexAmplitude::new(1.2, -0.7), 64).unwrap(),
        make_squeezed(0.8, 64).unwrap(),
        make_compass(2.0, 64).unwrap(),
        make_compass(5.0 / 2f64.sqrt(), 64).unwrap(),
    ]
}

#[test]
fn normalisation_purity_and_bounds() {
    for s in states() {
        // six standard deviations of the wider quadrature plus three vacuum widths
        let q = quad_moments(&s);
        let half = 6.0 * q.var_x.max(q.var_p).sqrt() + 3.0 * std::f64::consts::FRAC_1_SQRT_2;
        let grid = PhaseGrid::with_spacing(q.mean(), half, 0.1).unwrap();
        let w = wigner_grid(&s, &grid);
        assert!((w.integral() - 1.0).abs() < 1e-4, "{}", w.integral());
        let mut sq = w.clone();
        sq.values.iter_mut().for_each(|v| *v *= *v);
        assert!((std::f64::consts::PI * sq.integral() - 1.0).abs() < 1e-4);
        let wmax = w.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(wmax <= 2.0 / std::f64::consts::PI + 1e-6);
        let q = husimi_grid(&s, &grid);
        assert!(q.max_value() <= 1.0 / std::f64::consts::PI + 1e-6 && q.min_value() >= -1e-12);
    }
}

/// W(α) = (1/π²)∫d²μ Φ(μ) exp(αμ* − α*μ) by direct summation over a Φ grid.
fn wigner_from_char(phi: &PhaseGrid<f64, C<f64>>, alpha: ComplexAmplitude<f64>) -> f64 {
    let (n1, n2) = phi.resolution;
    let mut acc = C::new(0.0, 0.0);
    for i in 0..n1 {
        for j in 0..n2 {
            let mu = phi.point(i, j);
            let arg = alpha.q2 * mu.q1 - alpha.q1 * mu.q2;
            acc += phi.get(i, j) * C::from_polar(1.0, arg);
        }
    }
    acc.re * phi.cell_measure() / std::f64::consts::PI.powi(2)
}

#[test]
fn fourier_of_char_grid_reproduces_wigner() {
    for s in [make_number(0, 32).unwrap(), make_number(2, 32).unwrap(), make_compass(2.0, 64).unwrap()] {
        let phi_grid = PhaseGrid::<f64>::with_spacing(ComplexAmplitude::zero(), 10.0, 0.16).unwrap();
        let phi = char_grid(&s, &phi_grid);
        let w_grid = PhaseGrid::<f64>::new(ComplexAmplitude::zero(), (3.5, 3.5), (15, 15)).unwrap();
        let w = wigner_grid(&s, &w_grid);
        let mut worst: f64 = 0.0;
        for i in 0..15 {
            for j in 0..15 {
                worst = worst.max((wigner_from_char(&phi, w_grid.point(i, j)) - w.get(i, j)).abs());
            }
        }
        assert!(worst < 1e-3, "{worst}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn char_fn_bounded_and_unit_at_origin(seed in any::<u64>(), dim in 1usize..20, r in 0.0f64..3.0, th in 0.0f64..6.3) {
        let s = make_random::<f64>(dim, seed).unwrap();
        prop_assert!((char_fn(&s, ComplexAmplitude::zero()) - C::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(char_fn(&s, ComplexAmplitude::from_polar(r, th)).norm() <= 1.0 + 1e-10);
    }

    #[test]
    fn pointwise_bounds(seed in any::<u64>(), dim in 1usize..20, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let s = make_random::<f64>(dim, seed).unwrap();
        let z = ComplexAmplitude::new(a, b);
        prop_assert!(wigner(&s, z).abs() <= 2.0 / std::f64::consts::PI + 1e-10);
        let q = husimi(&s, z);
        prop_assert!((-1e-14..=1.0 / std::f64::consts::PI + 1e-12).contains(&q));
    }

    #[test]
    fn husimi_is_smoothed_wigner(seed in any::<u64>(), dim in 1usize..10, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let s = make_random::<f64>(dim, seed).unwrap();
        let z = ComplexAmplitude::new(a, b);
        let q = s_quasidist_series(&s, OrderParam::husimi(), z, 1e-16);
        prop_assert!((q - husimi(&s, z)).abs() < 1e-10);
    }
}
