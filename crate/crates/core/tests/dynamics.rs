use critnls_core::dynamics::{blowup_probe, propagate, stationarity, ProbeMode, PropagateOptions, WaveState};
use critnls_core::fem::FeSpace;
use critnls_core::ground_state::{local_minimize_subcritical, DescentOptions};
use critnls_core::{Error, ProblemParams, RadialGrid, RadialProfile};
use std::sync::Arc;

fn gaussian(p: &ProblemParams, width: f64, r_max: f64) -> (FeSpace, WaveState) {
    let fe = FeSpace::new(Arc::new(RadialGrid::graded(p.dim, r_max, 4001, 3.0).unwrap()));
    let u = RadialProfile::from_fn(fe.grid().clone(), |r| (-0.5 * (r / width).powi(2)).exp())
        .unwrap()
        .normalize_mass(p.a)
        .unwrap();
    let psi = WaveState::from_profile(&fe, &u, p).unwrap();
    (fe, psi)
}

#[test]
fn energy_drift_is_second_order_in_dt() {
    let p = ProblemParams::new(3, 4.0, 1.0, 1.0).unwrap();
    let (fe, psi0) = gaussian(&p, 1.0, 30.0);
    let run = |dt: f64| {
        let o = PropagateOptions {
            dt,
            phase_cap: 10.0,
            ..Default::default()
        };
        propagate(&fe, &psi0, &p, &o).unwrap()
    };
    let coarse = run(2e-3);
    let fine = run(1e-3);
    assert!(coarse.mass_drift_rate() < 1e-8);
    assert!(fine.energy_drift_rate() < 1e-6);
    let ratio = coarse.energy_drift_rate() / fine.energy_drift_rate();
    assert!(ratio > 3.0 && ratio < 5.0, "{ratio}");
}

#[test]
fn subcritical_ground_state_is_stationary() {
    let p = ProblemParams::new(3, 2.5, 1.0, 1.0).unwrap();
    let (gs, _) = local_minimize_subcritical(&p, &DescentOptions::default()).unwrap();
    let rep = stationarity(&gs.profile, &p, &PropagateOptions::default()).unwrap();
    assert!(rep.max_modulus_change < 1e-8, "{rep:?}");
    assert!(rep.energy_drift_rate < 1e-10);
}

#[test]
fn ground_state_triggers_no_blowup_verdict() {
    let p = ProblemParams::new(3, 2.5, 1.0, 1.0).unwrap();
    let (gs, _) = local_minimize_subcritical(&p, &DescentOptions::default()).unwrap();
    let probe = blowup_probe(
        &gs.profile,
        &p,
        ProbeMode::BelowLevel {
            level: gs.energy_level + 1e-3,
        },
        &PropagateOptions::default(),
    )
    .unwrap();
    assert!(!probe.blowup);
    assert!((probe.growth - 1.0).abs() < 1e-6);
}

#[test]
fn below_level_mode_requires_negative_pohozaev() {
    let p = ProblemParams::new(3, 4.0, 1.0, 1.0).unwrap();
    // a wide Gaussian has small gradient, so P > 0
    let grid = Arc::new(RadialGrid::graded(3, 60.0, 2001, 3.0).unwrap());
    let u = RadialProfile::from_fn(grid, |r| (-0.5 * (r / 4.0).powi(2)).exp())
        .unwrap()
        .normalize_mass(1.0)
        .unwrap();
    let err = blowup_probe(&u, &p, ProbeMode::BelowLevel { level: 4.11 }, &PropagateOptions::default()).unwrap_err();
    match err {
        Error::Domain(msg) => assert!(msg.contains("P(u)"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unlocalized_data_are_rejected() {
    let p = ProblemParams::new(3, 4.0, 1.0, 1.0).unwrap();
    // a narrow core makes P < 0, the slow tail reaches the wall
    let grid = Arc::new(RadialGrid::graded(3, 10.0, 2001, 3.0).unwrap());
    let u = RadialProfile::from_fn(grid, |r| 10.0 * (-(r / 0.1).powi(2)).exp() + 0.05 / (1.0 + r * r))
        .unwrap()
        .normalize_mass(1.0)
        .unwrap();
    let err = blowup_probe(&u, &p, ProbeMode::BelowLevel { level: 1e6 }, &PropagateOptions::default()).unwrap_err();
    match err {
        Error::Domain(msg) => assert!(msg.contains("localized"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}
