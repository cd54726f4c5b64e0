//! Cross-module checks: static solve, Floquet scan, two-mode model and dynamics.

use dwf_core::dynamics::{fit_tunneling_frequency, Dynamics, DynamicsOptions};
use dwf_core::floquet::{reduce_to_zone, ScanAxis, Scanner};
use dwf_core::lattice::{DriveForm, DriveSpec, LatticeParams};
use dwf_core::stationary::{doublet_data, solve_lattice, PlaneWaveBasis};
use dwf_core::twomode::{two_mode_splitting, TwoModeParams};
use proptest::prelude::*;

fn deep() -> LatticeParams {
    LatticeParams::symmetric(8.27, 2.68).unwrap()
}

#[test]
fn free_particle_levels_are_squares() {
    let sol = solve_lattice(&LatticeParams::symmetric(0.0, 0.0).unwrap(), &PlaneWaveBasis::default(), 9).unwrap();
    let expected = [0.0, 1.0, 1.0, 4.0, 4.0, 9.0, 9.0, 16.0, 16.0];
    for (e, x) in sol.energies.iter().zip(expected) {
        assert!((e - x).abs() < 1e-10, "{e} vs {x}");
    }
}

#[test]
fn deeper_barrier_slows_tunneling() {
    let basis = PlaneWaveBasis::default();
    let split = |v1: f64| {
        let sol = solve_lattice(&LatticeParams::symmetric(v1, 2.68).unwrap(), &basis, 4).unwrap();
        doublet_data(&sol, &basis).unwrap().delta_12
    };
    let (a, b, c) = (split(4.0), split(8.0), split(12.0));
    assert!(a > b && b > c && c > 0.0, "{a} {b} {c}");
}

#[test]
fn weak_drive_matches_two_mode_and_dynamics() {
    let omega = 0.79;
    let spec = DriveSpec::sine(0.3, omega).unwrap();
    let sc = Scanner::new(deep(), DriveForm::Linearized, spec.clone(), PlaneWaveBasis::default(), 15).unwrap();
    let floquet = sc.solve(&spec, &DriveForm::Linearized).unwrap().splitting.principal;
    let tm = TwoModeParams::from_doublet(&sc.doublet);
    let two_mode = two_mode_splitting(&tm, 0.3, omega).unwrap();
    assert!((floquet - two_mode).abs() < 0.05 * tm.delta_12, "{floquet} vs {two_mode}");

    let dy = Dynamics::new(&deep(), &PlaneWaveBasis::default(), DynamicsOptions::default()).unwrap();
    let period = spec.period();
    let trace = dy.run(&DriveForm::Linearized, &spec, None, 80.0 * period, period).unwrap();
    let fit = fit_tunneling_frequency(&trace).unwrap();
    assert!((fit.omega - floquet).abs() < 0.01 * floquet, "{} vs {floquet}", fit.omega);
}

#[test]
fn amplitude_scan_rows_are_in_zone() {
    let spec = DriveSpec::sine(0.0, 0.79).unwrap();
    let sc = Scanner::new(deep(), DriveForm::Linearized, spec, PlaneWaveBasis::default(), 15).unwrap();
    let table = sc.scan(ScanAxis::AmplitudeS, &[0.0, 0.5, 1.0]).unwrap();
    assert_eq!(table.failures(), 0);
    for row in &table.rows {
        let p = row.point().unwrap();
        for &e in &p.solution.quasienergies {
            assert_eq!(reduce_to_zone(e, 0.79), e);
        }
        assert!((p.solution.weight_sum() - 1.0).abs() < 1e-8);
        assert!(p.splitting.principal <= 0.5 * 0.79 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn scans_keep_weights_normalized(s in 0.0f64..1.5, omega in 0.5f64..2.0) {
        let spec = DriveSpec::sine(s, omega).unwrap();
        let sc = Scanner::new(deep(), DriveForm::Linearized, spec.clone(), PlaneWaveBasis::default(), 8).unwrap();
        let p = sc.solve(&spec, &DriveForm::Linearized).unwrap();
        prop_assert!((p.solution.weight_sum() - 1.0).abs() < 1e-8);
        prop_assert!(p.splitting.principal >= 0.0 && p.splitting.principal <= 0.5 * omega + 1e-12);
    }
}
