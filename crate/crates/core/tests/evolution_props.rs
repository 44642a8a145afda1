mod common;

use decoq_core::entropy::linear_entropy;
use decoq_core::evolution::{run_entropy_series, SeriesContext};
use decoq_core::linalg::{partial_trace, HermitianEigen};
use decoq_core::models::{ModelSpec, PureDephasingSpec, SpinBosonMode, SpinBosonSpec};
use decoq_core::{BosonStateSpec, QubitStateSpec, SpaceLayout};
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

fn ctx() -> SeriesContext {
    SeriesContext { leak_tol: 1e-6, ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn composite_purity_is_conserved(seed in any::<u64>(), d_a in 2usize..=3, d_r in 1usize..=4, t_max in 0.1f64..5.0) {
        let mut r = common::rng(seed);
        let psi = common::state(&mut r, d_a);
        let rho_r = common::density(&mut r, &SpaceLayout::single(d_r).unwrap());
        let h = common::hermitian(&mut r, &SpaceLayout::new(vec![d_a, d_r]).unwrap());
        let ic = decoq_core::InitialCondition::new(psi, rho_r, h.clone()).unwrap();
        let series = run_entropy_series(&h, &ic, t_max, 24, &ctx()).unwrap();
        prop_assert!(series.meta.purity_drift <= 1e-9);
        prop_assert!(series.values[0] <= 1e-10);
        prop_assert!(series.values.iter().all(|&s| (0.0..=1.0).contains(&s)));
    }

    #[test]
    fn orthogonal_qubit_states_give_identical_series(theta in 0.0..=PI, phi in 0.0..TAU) {
        let run = |q: QubitStateSpec| {
            let spec = ModelSpec::PureDephasing(PureDephasingSpec { g: 1.0, qubit: q, boson: BosonStateSpec::thermal(0.5, 40) });
            let m = spec.build(1e-6).unwrap();
            run_entropy_series(&m.generator, &m.ic, 1.5, 30, &m.series_context("", 1e-6)).unwrap()
        };
        let q = QubitStateSpec::new(theta, phi);
        let a = run(q);
        let b = run(q.orthogonal());
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}

fn spin_boson(omega_rabi: f64, qubit: QubitStateSpec) -> SpinBosonSpec {
    SpinBosonSpec {
        delta: 0.2,
        delta_g: 10.0,
        omega_rabi,
        modes: vec![
            SpinBosonMode { g: 0.3, omega: 1.0, nbar: Some(0.4), truncation: None },
            SpinBosonMode { g: 0.2, omega: 1.6, nbar: Some(0.2), truncation: None },
        ],
        temperature: None,
        qubit,
    }
}

#[test]
fn undriven_pole_never_decoheres() {
    let m = ModelSpec::SpinBoson(spin_boson(0.0, QubitStateSpec::upper())).build(1e-6).unwrap();
    let series = run_entropy_series(&m.generator, &m.ic, 20.0, 40, &m.series_context("", 1e-6)).unwrap();
    assert!(series.values.iter().all(|&s| s.abs() <= 1e-10));
}

#[test]
fn local_frame_does_not_change_reduced_purity() {
    // ρ_I(t) = e^{iH0 t} ρ(t) e^{-iH0 t} with H0 a sum of local terms.
    let spec = spin_boson(0.5, QubitStateSpec::new(1.1, 0.2));
    let parts = spec.build_eff(1e-6).unwrap();
    let h = &parts.h0 + &parts.v0;
    let rho0 = parts.ic.rho0();
    let full = HermitianEigen::new(&h).unwrap();
    let local = HermitianEigen::new(&parts.h0).unwrap();
    for t in [0.3, 1.0, 4.0] {
        let rho = full.evolve(&rho0, t).unwrap();
        let rho_i = local.evolve(&rho, -t).unwrap();
        let s = linear_entropy(&partial_trace(&rho, &[0]).unwrap());
        let s_i = linear_entropy(&partial_trace(&rho_i, &[0]).unwrap());
        assert!((s - s_i).abs() < 1e-12, "t = {t}: {s} vs {s_i}");
        assert!(s > 1e-6);
    }
}

#[test]
fn series_matches_dense_propagation() {
    let spec = ModelSpec::SpinBoson(spin_boson(0.5, QubitStateSpec::plus()));
    let m = spec.build(1e-6).unwrap();
    let series = run_entropy_series(&m.generator, &m.ic, 3.0, 16, &m.series_context("", 1e-6)).unwrap();
    let eig = HermitianEigen::new(&m.generator).unwrap();
    let rho0 = m.ic.rho0();
    for k in [0, 5, 16] {
        let rho = eig.evolve(&rho0, series.times[k]).unwrap();
        let s = linear_entropy(&partial_trace(&rho, &[0]).unwrap());
        assert!((s - series.values[k]).abs() < 1e-12);
    }
}

#[test]
fn doubling_the_grid_only_adds_samples() {
    let m = ModelSpec::SpinBoson(spin_boson(0.5, QubitStateSpec::new(0.9, 1.3))).build(1e-6).unwrap();
    let ctx = m.series_context("", 1e-6);
    let coarse = run_entropy_series(&m.generator, &m.ic, 5.0, 40, &ctx).unwrap();
    let fine = run_entropy_series(&m.generator, &m.ic, 5.0, 80, &ctx).unwrap();
    for k in 0..coarse.len() {
        assert_eq!(coarse.times[k], fine.times[2 * k]);
        assert!((coarse.values[k] - fine.values[2 * k]).abs() < 1e-10);
    }
    let peak = coarse.values.iter().copied().fold(0.0, f64::max);
    assert!(peak > 1e-4, "peak {peak}");
}
