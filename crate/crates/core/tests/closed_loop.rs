use oscctl_core::analysis::{self, finite_form_solution};
use oscctl_core::*;

fn params() -> OscillatorParams {
    OscillatorParams::default()
}

fn config(law: Law, gamma1: f64, gamma2: f64, e_star: f64) -> ControllerConfig {
    ControllerConfig {
        law,
        gains: SgaGains {
            gamma1,
            gamma2,
            alpha1: 1.0,
            alpha2: 1.0,
            kappa: 0.5,
            gamma_fin: 15.0,
        },
        target: Target::new(e_star, &params()).unwrap(),
        dr_use_tilde: false,
    }
}

fn scenario(law: Law, e0: f64, e_star: f64) -> Scenario {
    Scenario::new(
        params(),
        MeanState::new(e0, 1.0, 0.0),
        config(law, 3.0, 0.5, e_star),
    )
}

#[test]
fn heating_reaches_target() {
    let traj = simulate(&scenario(Law::SgaD, 0.1, 0.8)).unwrap();
    let e = traj.last_state().unwrap().energy;
    assert!((e - 0.8).abs() < 0.05, "E(20) = {e}");
}

#[test]
fn exponential_law_tracks_closed_form() {
    let s = scenario(Law::IncoherentExponential, 0.3, 1.8);
    let traj = simulate(&s).unwrap();
    let rate = 2.0 * s.params.gamma * s.controller.gains.kappa;
    for (t, st) in traj.times.iter().zip(&traj.states).step_by(97) {
        let exact = 1.8 + (0.3 - 1.8) * (-rate * t).exp();
        assert!((st.energy - exact).abs() < 1e-6, "t = {t}");
    }
}

#[test]
fn finite_law_tracks_closed_form() {
    let s = scenario(Law::IncoherentFinite, 0.3, 0.6);
    let mut s = s;
    s.h_int = 1e-4;
    s.t_final = 2.0;
    let traj = simulate(&s).unwrap();
    for (t, st) in traj.times.iter().zip(&traj.states).step_by(101) {
        let exact = finite_form_solution(*t, 0.3, 0.6, 15.0, &s.params);
        assert!((st.energy - exact).abs() < 1e-6, "t = {t}");
    }
}

#[test]
fn sampled_at_integration_step_matches_continuous() {
    let cont = simulate(&scenario(Law::SgaDr, 0.1, 0.8)).unwrap();
    let mut s = scenario(Law::SgaDr, 0.1, 0.8);
    s.sample_interval = Some(s.h_int);
    let samp = simulate(&s).unwrap();
    let (a, b) = (
        cont.last_state().unwrap().energy,
        samp.last_state().unwrap().energy,
    );
    assert!((a - b).abs() < 10.0 * s.h_int, "{a} vs {b}");
}

#[test]
fn lyapunov_function_is_non_increasing() {
    for (e0, e_star) in [(0.1, 0.8), (0.8, 0.2), (2.6, 1.8)] {
        let traj = simulate(&scenario(Law::SgaD, e0, e_star)).unwrap();
        let v: Vec<f64> = traj.monitors.iter().map(|m| m.v1.unwrap()).collect();
        for w in v.windows(2) {
            assert!(w[1] <= w[0] + 1e-8);
        }
        let h = traj.step().unwrap();
        for i in (1..traj.len() - 1).step_by(211) {
            let fd = (v[i + 1] - v[i - 1]) / (2.0 * h);
            let exact = analysis::v1_rate_sga_d(traj.states[i].energy, e_star, &params());
            assert!(
                (fd - exact).abs() < 1e-4,
                "t = {}: {fd} vs {exact}",
                traj.times[i]
            );
        }
    }
}

#[test]
fn open_loop_quadratures_decay_within_envelope() {
    for omega0 in [0.5, 1.0, 2.0] {
        let p = OscillatorParams::new(omega0, 0.3).unwrap();
        let mut cfg = config(Law::IncoherentExponential, 3.0, 0.5, 0.8);
        cfg.target = Target::new(0.8, &p).unwrap();
        let mut s = Scenario::new(p, MeanState::new(2.0, 1.0, -0.5), cfg);
        s.t_final = 10.0;
        let traj = simulate(&s).unwrap();
        assert!(traj.controls.iter().all(|c| c.u == 0.0));
        let norm = |st: &MeanState| st.p.hypot(st.q);
        let x0 = norm(&traj.states[0]);
        let bound = omega0.max(1.0 / omega0);
        for (t, st) in traj.times.iter().zip(&traj.states) {
            assert!(norm(st) <= bound * (-p.gamma * t).exp() * x0 + 1e-12);
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let s = scenario(Law::SgaDr, 0.1, 0.8);
    let a = simulate(&s).unwrap();
    let b = simulate(&s).unwrap();
    assert_eq!(a.states, b.states);
    assert_eq!(a.controls, b.controls);
}
