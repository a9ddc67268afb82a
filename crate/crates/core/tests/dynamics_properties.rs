mod common;

use std::sync::Arc;

use common::{random_field, torus};
use thirdgrade_core::basis::{DomainKind, GalerkinBasis};
use thirdgrade_core::dynamics::{CutoffFn, CutoffMode, Forcing, Integrator, RunOptions, RunOutput, SimError, System};
use thirdgrade_core::field::SpectralField;
use thirdgrade_core::noise::{NoiseModel, Profile, WienerState};
use thirdgrade_core::params::FluidParams;

fn params() -> FluidParams {
    FluidParams::new(0.5, 0.5, -0.5, 0.5).unwrap()
}

fn smooth(m: f64) -> CutoffMode {
    CutoffMode::Smooth(CutoffFn::new(m).unwrap())
}

fn system(b: &Arc<GalerkinBasis>, cutoff: CutoffMode, noise: NoiseModel, dt: f64) -> System {
    System::new(b.clone(), params(), cutoff, noise, dt)
}

fn run(sys: &System, y0: &SpectralField, path: u64, t_end: f64) -> RunOutput {
    let mut o = RunOptions::new(t_end);
    o.keep_path = true;
    Integrator::new(sys, o).run(y0.clone(), WienerState::new(17, path, sys.dt)).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[test]
fn single_mode_decays_strictly() {
    let b = torus(3, 0.5);
    let i = b.find([2, 1]).unwrap();
    let y0 = SpectralField::unit(b.clone(), i).scaled(0.8);
    let sys = system(&b, smooth(50.0), NoiseModel::off(), 1e-3);
    let o = run(&sys, &y0, 0, 0.5);
    let norms: Vec<f64> = o.path.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>()).collect();
    assert!(norms.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn random_data_decay_on_both_domains() {
    for kind in [DomainKind::Torus, DomainKind::Channel] {
        let b = common::basis(kind, 3, 0.5);
        for seed in 0..3 {
            let y0 = random_field(&b, seed, 1.0, 0.3);
            let sys = system(&b, smooth(1e6), NoiseModel::off(), 2e-3);
            let o = run(&sys, &y0, 0, 1.0);
            let norms: Vec<f64> = o.path.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>()).collect();
            assert!(norms.windows(2).all(|w| w[1] <= w[0]), "{kind:?} seed {seed}");
        }
    }
}

#[test]
fn vanishing_cutoff_gives_semi_implicit_viscous_decay() {
    let a1 = 0.5;
    let nu = 0.5;
    let b = torus(3, a1);
    let y0 = random_field(&b, 4, 1.0, 0.0);
    let dt = 1e-2;
    let steps = 50;
    let sys = system(&b, CutoffMode::ForcedZero, NoiseModel::diagonal(Profile::Identity, 1.0, 8), dt);
    let o = run(&sys, &y0, 0, dt * steps as f64);
    for (m, (&c0, &c)) in b.modes().iter().zip(y0.coeffs().iter().zip(o.state.y.coeffs())) {
        let mu = (m.label[0] * m.label[0] + m.label[1] * m.label[1]) as f64;
        let factor = 1.0 / (1.0 + dt * nu * mu / (1.0 + a1 * mu));
        let want = c0 * factor.powi(steps);
        assert!((c - want).abs() <= 1e-13 * c0.abs().max(1e-300), "mode {:?}", m.label);
    }
}

#[test]
fn deterministic_scheme_is_first_order() {
    let b = torus(3, 0.5);
    let y0 = random_field(&b, 2, 1.5, 0.3);
    let t = 0.2;
    let at = |dt: f64| run(&system(&b, smooth(1e6), NoiseModel::off(), dt), &y0, 0, t).state.y.into_coeffs();
    let reference = at(5e-4);
    let e1 = dist(&at(4e-3), &reference);
    let e2 = dist(&at(2e-3), &reference);
    // with an exact first-order error e(dt) = C dt and the dt/8 reference:
    // (4e-3 - 5e-4) / (2e-3 - 5e-4) = 7/3
    let r = e1 / e2;
    assert!((r - 7.0 / 3.0).abs() < 0.25, "ratio {r}");
}

#[test]
fn energy_residual_vanishes_linearly_in_dt() {
    let b = torus(3, 0.5);
    let y0 = random_field(&b, 9, 1.0, 0.3);
    let res = |dt: f64| run(&system(&b, smooth(1e6), NoiseModel::off(), dt), &y0, 0, 0.1).record.summary.max_abs_residual;
    let r = res(2e-3) / res(1e-3);
    assert!((1.7..2.3).contains(&r), "ratio {r}");
}

#[test]
fn steady_stokes_forcing() {
    let nu = 0.5;
    let b = torus(2, 0.5);
    let i = b.find([1, 1]).unwrap();
    let mut u = vec![0.0; b.len()];
    u[i] = 0.3;
    let sys = system(&b, CutoffMode::ForcedZero, NoiseModel::off(), 1e-2).with_forcing(Forcing::Constant(u));
    let o = run(&sys, &SpectralField::zeros(b.clone()), 0, 60.0);
    // nu mu c / vf = u / vf
    let want = 0.3 / (nu * 2.0);
    assert!((o.state.y.coeffs()[i] - want).abs() < 1e-9);
    assert!(o.state.y.coeffs().iter().enumerate().all(|(j, c)| j == i || *c == 0.0));
}

#[test]
fn unreached_cutoff_matches_uncut_dynamics_bitwise() {
    let b = torus(3, 0.5);
    let y0 = random_field(&b, 1, 1.0, 0.3);
    let noise = NoiseModel::diagonal(Profile::Saturating, 0.5, 16);
    for path in 0..3 {
        let cut = run(&system(&b, smooth(1e9), noise.clone(), 1e-3), &y0, path, 0.2);
        let raw = run(&system(&b, CutoffMode::Disabled, noise.clone(), 1e-3), &y0, path, 0.2);
        assert_eq!(cut.path, raw.path);
        assert!(cut.state.tau_m_hit.is_none() && cut.state.frozen.is_none());
        assert_eq!(cut.state.stopped().coeffs(), raw.state.y.coeffs());
        for s in &cut.record.samples {
            assert_eq!(s.frozen_v_norm, s.v_norm);
        }
    }
}

#[test]
fn low_cutoff_stops_at_time_zero_and_freezes() {
    let b = torus(3, 0.5);
    let y0 = random_field(&b, 1, 5.0, 0.0);
    let m = y0.w24() / 3.0;
    let o = run(&system(&b, smooth(m), NoiseModel::diagonal(Profile::Identity, 0.2, 8), 1e-3), &y0, 0, 0.05);
    assert_eq!(o.state.tau_m_hit, Some(0.0));
    assert_eq!(o.state.frozen.as_ref().unwrap().coeffs(), y0.coeffs());
    let first = o.record.samples[0];
    for s in &o.record.samples {
        assert_eq!(s.tau_m_hit, Some(0.0));
        assert_eq!((s.frozen_v_norm, s.frozen_w24), (first.frozen_v_norm, first.frozen_w24));
    }
    // theta vanishes above 2M, so only viscous decay acts on the raw process
    assert!(o.record.samples.iter().all(|s| s.theta == 0.0));
}

#[test]
fn frozen_value_is_the_state_at_first_crossing() {
    let b = torus(2, 0.5);
    let i = b.find([1, 0]).unwrap();
    let mut u = vec![0.0; b.len()];
    u[i] = 40.0;
    let y0 = SpectralField::zeros(b.clone());
    let sys = system(&b, smooth(1.0), NoiseModel::off(), 1e-3).with_forcing(Forcing::Constant(u)).with_v_levels(vec![0.5, 1.0, 2.0]);
    let o = run(&sys, &y0, 0, 0.5);
    let tau = o.state.tau_m_hit.expect("forcing drives the norm past M");
    let k = (tau / 1e-3).round() as usize;
    assert_eq!(o.state.frozen.as_ref().unwrap().coeffs(), &o.path[k][..]);
    assert!(o.state.frozen_w24.unwrap() >= 1.0);
    let before = SpectralField::from_coeffs(b.clone(), o.path[k - 1].clone()).unwrap();
    assert!(before.w24() < 1.0);
    let taus: Vec<f64> = o.state.tau_n.iter().map(|t| t.unwrap()).collect();
    assert!(taus.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn noise_off_ignores_the_brownian_key() {
    let b = torus(3, 0.5);
    let y0 = random_field(&b, 3, 1.0, 0.3);
    let det = system(&b, smooth(100.0), NoiseModel::off(), 1e-3);
    let zero = system(&b, smooth(100.0), NoiseModel::diagonal(Profile::Identity, 0.0, 8), 1e-3);
    let a = run(&det, &y0, 0, 0.1);
    let c = run(&det, &y0, 5, 0.1);
    let z = run(&zero, &y0, 2, 0.1);
    assert_eq!(a.path, c.path);
    assert_eq!(a.path, z.path);
}

#[test]
fn paths_are_reproducible_and_distinct() {
    let b = torus(3, 0.5);
    let y0 = random_field(&b, 3, 1.0, 0.3);
    let sys = system(&b, smooth(100.0), NoiseModel::diagonal(Profile::Identity, 0.3, 16), 1e-3);
    let a = run(&sys, &y0, 4, 0.1);
    let again = run(&sys, &y0, 4, 0.1);
    let other = run(&sys, &y0, 5, 0.1);
    assert_eq!(a.path, again.path);
    assert_eq!(a.record.summary.terminal_hash, again.record.summary.terminal_hash);
    assert_ne!(a.record.summary.terminal_hash, other.record.summary.terminal_hash);
}

#[test]
fn picard_map_has_the_stepper_trajectory_as_fixed_point() {
    let b = torus(3, 0.5);
    let y0 = random_field(&b, 6, 1.0, 0.3);
    let sys = system(&b, smooth(100.0), NoiseModel::diagonal(Profile::Identity, 0.5, 16), 2e-3);
    let w = WienerState::new(3, 0, sys.dt);
    let o = Integrator::new(&sys, RunOptions { keep_path: true, ..RunOptions::new(0.04) }).run(y0.clone(), w).unwrap();
    let mapped = sys.picard_map(y0.coeffs(), &o.path, &w);
    let gap = mapped.iter().zip(&o.path).map(|(a, b)| dist(a, b)).fold(0.0, f64::max);
    assert!(gap < 1e-13, "gap {gap}");
    let twice = sys.picard_map(y0.coeffs(), &o.path, &w);
    assert_eq!(mapped, twice);
}

#[test]
fn blowup_is_reported_with_its_step() {
    let b = torus(2, 0.5);
    let p = FluidParams::new(0.0, 0.5, -0.5, 0.0).unwrap();
    let y0 = random_field(&b, 2, 1e3, 0.0);
    let sys = System::new(b.clone(), p, CutoffMode::Disabled, NoiseModel::off(), 0.5);
    let o = Integrator::new(&sys, RunOptions::new(500.0)).run(y0.clone(), WienerState::new(0, 0, 0.5)).unwrap();
    let info = o.record.summary.blowup.expect("explicit transport with a huge step overflows");
    assert!(info.step >= 1 && info.step < 1000);
    assert_eq!(o.state.step, info.step - 1);
    assert!(o.state.y.is_finite());
    let mut s = o.state.clone();
    match sys.step(&mut s) {
        Err(SimError::NumericalBlowup { step, .. }) => assert_eq!(step, info.step),
        other => panic!("expected blowup, got {other:?}"),
    }
    assert_eq!(s.y.coeffs(), o.state.y.coeffs());
}
