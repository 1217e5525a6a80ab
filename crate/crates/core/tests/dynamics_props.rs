use proptest::prelude::*;
use subplanck_core::dynamics::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fock_roundtrip(x0 in -6.0f64..6.0, p0 in -6.0f64..6.0) {
        let grid = XGrid::new(-20.0, 20.0, 1024).unwrap();
        let psi = coherent_wavefunction(x0, p0, grid).unwrap();
        let proj = fock_dim_for(&psi, LEAKAGE_LIMIT, 200).unwrap();
        let back = fock_to_wavefunction(&proj.state, grid);
        let ov = psi.inner(&back).norm_sqr() / back.norm_sqr();
        prop_assert!(ov >= 1.0 - 2.0 * LEAKAGE_LIMIT);
    }

    #[test]
    fn short_driven_runs_keep_norm(x0 in -10.0f64..0.0, p0 in -4.0f64..4.0, steps in 1usize..400) {
        let grid = XGrid::default();
        let psi = coherent_wavefunction(x0, p0, grid).unwrap();
        let cfg = EvolutionConfig::with_steps(2.5e-4 * steps as f64, steps, grid, Model::DrivenDoubleWell).unwrap();
        let run = evolve(&psi, &cfg, 0).unwrap();
        prop_assert!(run.norm_drift <= 1e-10);
    }
}

#[test]
fn leak_is_reported() {
    // a fast packet on a narrow grid runs into the edge
    let grid = XGrid::new(-12.0, 12.0, 512).unwrap();
    let psi = coherent_wavefunction(0.0, 0.0, grid).unwrap();
    let cfg = EvolutionConfig::new(1e-3, 2.0, grid, Model::DrivenDoubleWell).unwrap();
    assert!(matches!(evolve(&psi, &cfg, 0), Err(subplanck_core::Error::BoundaryLeak { .. })));
}

#[test]
fn snapshots_follow_stride() {
    let grid = XGrid::new(-20.0, 20.0, 512).unwrap();
    let psi = coherent_wavefunction(1.0, 0.0, grid).unwrap();
    let cfg = EvolutionConfig::with_steps(0.1, 100, grid, Model::Harmonic).unwrap();
    let run = evolve(&psi, &cfg, 25).unwrap();
    assert_eq!(run.snapshots.len(), 5);
    assert_eq!(run.snapshots.last().unwrap().1, run.state);
}

#[test]
fn projection_leakage_error() {
    let psi = coherent_wavefunction(-8.0, 4.0, XGrid::default()).unwrap();
    assert!(matches!(wavefunction_to_fock(&psi, 20), Err(subplanck_core::Error::Leakage { .. })));
}
