//! Fixed-step RK4 integration of the plant + controller loop, in continuous
//! feedback and in sampled-data (zero-order hold) form.

use serde::{Deserialize, Serialize};

use crate::controllers::{ControllerConfig, ControllerMemory, Law};
use crate::error::{config_err, Error, Result};
use crate::model::{self, ControlInput, MeanState, OscillatorParams};

/// Absolute magnitude above which a run is declared blown up.
pub const BLOWUP_LIMIT: f64 = 1e12;

/// Vector-space operations RK4 needs from a state type.
pub trait OdeState: Clone {
    /// `self + h * k`
    fn add_scaled(&self, h: f64, k: &Self) -> Self;
    fn all_finite(&self) -> bool;
}

impl<const N: usize> OdeState for [f64; N] {
    fn add_scaled(&self, h: f64, k: &Self) -> Self {
        std::array::from_fn(|i| self[i] + h * k[i])
    }

    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// One classical fourth-order Runge-Kutta step from `(t, y)` with step `h`.
pub fn rk4_step<S, F>(mut rhs: F, y: &S, t: f64, h: f64) -> Result<S>
where
    S: OdeState,
    F: FnMut(f64, &S) -> S,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("step must be > 0, got {h}")));
    }
    let blowup = |stage: usize| Error::Blowup {
        t,
        reason: format!("non-finite value in RK4 stage {stage}"),
    };
    let half = 0.5 * h;
    let k1 = rhs(t, y);
    if !k1.all_finite() {
        return Err(blowup(1));
    }
    let k2 = rhs(t + half, &y.add_scaled(half, &k1));
    if !k2.all_finite() {
        return Err(blowup(2));
    }
    let k3 = rhs(t + half, &y.add_scaled(half, &k2));
    if !k3.all_finite() {
        return Err(blowup(3));
    }
    let k4 = rhs(t + h, &y.add_scaled(h, &k3));
    if !k4.all_finite() {
        return Err(blowup(4));
    }
    let next = y
        .add_scaled(h / 6.0, &k1)
        .add_scaled(h / 3.0, &k2)
        .add_scaled(h / 3.0, &k3)
        .add_scaled(h / 6.0, &k4);
    if !next.all_finite() {
        return Err(blowup(5));
    }
    Ok(next)
}

/// Per-sample monitor values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Monitor {
    /// Goal function `W(E)`.
    pub w: f64,
    /// Lyapunov function `V1`, when the controller has positive `Gamma1, Gamma2`.
    pub v1: Option<f64>,
    /// Speed of `W` along the plant.
    pub speed: f64,
}

/// Uniformly sampled closed-loop record.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MeanState>,
    pub controls: Vec<ControlInput>,
    pub monitors: Vec<Monitor>,
    /// Number of samples whose commanded `n` was negative.
    pub negative_n_samples: usize,
}

impl Trajectory {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            controls: Vec::with_capacity(n),
            monitors: Vec::with_capacity(n),
            negative_n_samples: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&MeanState> {
        self.states.last()
    }

    pub fn min_n(&self) -> f64 {
        self.controls
            .iter()
            .map(|c| c.n)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn step(&self) -> Option<f64> {
        (self.times.len() >= 2).then(|| self.times[1] - self.times[0])
    }

    /// Checks equal lengths and a strictly increasing, uniform time grid.
    pub fn check_uniform(&self) -> Result<()> {
        let n = self.times.len();
        if self.states.len() != n || self.controls.len() != n || self.monitors.len() != n {
            return Err(Error::InvalidInput(
                "trajectory arrays differ in length".into(),
            ));
        }
        if let Some(h) = self.step() {
            for (i, pair) in self.times.windows(2).enumerate() {
                let dt = pair[1] - pair[0];
                if !(dt > 0.0) || (dt - h).abs() > 1e-9 * h.max(1.0) * (i + 1) as f64 {
                    return Err(Error::InvalidInput(format!(
                        "non-uniform time grid at sample {i}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn push(&mut self, t: f64, state: MeanState, ctrl: ControlInput, raw_n: f64, monitor: Monitor) {
        if raw_n < 0.0 {
            self.negative_n_samples += 1;
        }
        self.times.push(t);
        self.states.push(state);
        self.controls.push(ctrl);
        self.monitors.push(monitor);
    }
}

/// One closed-loop run: plant, controller, initial data and step sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: OscillatorParams,
    pub initial: MeanState,
    /// Initial controller memory; `None` means `(u*, n*)`.
    pub initial_memory: Option<ControllerMemory>,
    pub controller: ControllerConfig,
    pub t_final: f64,
    pub h_int: f64,
    /// Zero-order-hold sampling interval; must be a multiple of `h_int`.
    pub sample_interval: Option<f64>,
    /// Fock dimension of the Lindblad cross-check, if requested.
    pub oracle_dim: Option<usize>,
    /// Sampled mode: drop the `h` factor on the controller increment.
    pub literal_paper_update: bool,
    /// Feed `max(n, 0)` to the plant instead of the raw command.
    pub clamp_negative_n: bool,
}

pub const DEFAULT_H_INT: f64 = 1e-3;
pub const DEFAULT_T_FINAL: f64 = 20.0;

impl Scenario {
    /// Scenario with default horizon and step and no sampling or oracle.
    pub fn new(params: OscillatorParams, initial: MeanState, controller: ControllerConfig) -> Self {
        Self {
            params,
            initial,
            initial_memory: None,
            controller,
            t_final: DEFAULT_T_FINAL,
            h_int: DEFAULT_H_INT,
            sample_interval: None,
            oracle_dim: None,
            literal_paper_update: false,
            clamp_negative_n: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.controller.validate()?;
        if !self.initial.is_finite() {
            return Err(config_err("initial", "initial state must be finite"));
        }
        if let Some(m) = self.initial_memory {
            if !(m.u.is_finite() && m.n.is_finite()) {
                return Err(config_err("initial", "initial controls must be finite"));
            }
        }
        if !(self.h_int.is_finite() && self.h_int > 0.0) {
            return Err(config_err("run.h_int", "must be finite and > 0"));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(config_err("run.t_final", "must be finite and > 0"));
        }
        if self.t_final < self.h_int {
            return Err(config_err("run.t_final", "must be at least one step h_int"));
        }
        if let Some(h) = self.sample_interval {
            if !(h.is_finite() && h > 0.0) {
                return Err(config_err("run.sample_interval", "must be finite and > 0"));
            }
            let ratio = h / self.h_int;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
                return Err(config_err(
                    "run.sample_interval",
                    format!("{h} is not an integer multiple of h_int = {}", self.h_int),
                ));
            }
            if self.controller.law != Law::SgaDr {
                return Err(config_err(
                    "run.sample_interval",
                    "sampled-data mode is defined for the sga-dr law only",
                ));
            }
        }
        if let Some(dim) = self.oracle_dim {
            if dim < 2 {
                return Err(config_err("run.oracle_dim", "Fock dimension must be >= 2"));
            }
        }
        Ok(())
    }

    /// Number of integration steps covering `[0, t_final]`.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.h_int).round() as usize
    }

    /// Integration steps per hold interval.
    pub fn steps_per_sample(&self) -> Option<usize> {
        self.sample_interval
            .map(|h| (h / self.h_int).round() as usize)
    }

    pub fn memory0(&self) -> ControllerMemory {
        self.initial_memory
            .unwrap_or_else(|| ControllerMemory::at_equilibrium(&self.controller.target))
    }

    fn applied(&self, ctrl: ControlInput) -> ControlInput {
        if self.clamp_negative_n {
            ctrl.clamped()
        } else {
            ctrl
        }
    }

    fn monitor(&self, state: &MeanState, mem: &ControllerMemory, ctrl: &ControlInput) -> Monitor {
        let c = &self.controller;
        let v1 = if c.law.is_differential() && c.gains.gamma1 > 0.0 && c.gains.gamma2 > 0.0 {
            Some(crate::analysis::v1_unchecked(
                state, mem, &c.gains, &c.target,
            ))
        } else {
            None
        };
        Monitor {
            w: model::w(state.energy, c.target.e_star),
            v1,
            speed: crate::controllers::goal_speed(state, ctrl, &self.params, c.target.e_star),
        }
    }
}

/// Plant plus controller memory, `(E, Q, P, u, n)`.
type Augmented = [f64; 5];

fn split(y: &Augmented) -> (MeanState, ControllerMemory) {
    (
        MeanState::new(y[0], y[1], y[2]),
        ControllerMemory::new(y[3], y[4]),
    )
}

fn join(s: &MeanState, m: &ControllerMemory) -> Augmented {
    [s.energy, s.q, s.p, m.u, m.n]
}

fn check_bounded(y: &Augmented, t: f64) -> Result<()> {
    match y.iter().position(|v| v.abs() > BLOWUP_LIMIT) {
        Some(i) => Err(Error::Blowup {
            t,
            reason: format!(
                "component {} = {:e} exceeds {BLOWUP_LIMIT:e}",
                ["E", "Q", "P", "u", "n"][i],
                y[i]
            ),
        }),
        None => Ok(()),
    }
}

/// Integrates the closed loop with the controller acting continuously.
/// Differential laws carry `(u, n)` as ODE states; finite laws are evaluated
/// at every RK stage.
pub fn simulate_continuous(scenario: &Scenario) -> Result<Trajectory> {
    scenario.validate()?;
    let params = scenario.params;
    let ctl = scenario.controller;
    let differential = ctl.law.is_differential();
    let vector_field = |_t: f64, y: &Augmented| -> Augmented {
        let (state, mem) = split(y);
        let ctrl = scenario.applied(ctl.controls(&state, &mem, &params));
        let d = model::rhs(&state, &ctrl, &params);
        let rate = if differential {
            ctl.memory_rate(&state, &mem, &params).unwrap_or_default()
        } else {
            Default::default()
        };
        [d.energy, d.q, d.p, rate.du, rate.dn]
    };

    let steps = scenario.n_steps();
    let h = scenario.h_int;
    let mut traj = Trajectory::with_capacity(steps + 1);
    let mut y = join(&scenario.initial, &scenario.memory0());
    for i in 0..=steps {
        let t = i as f64 * h;
        let (state, mem) = split(&y);
        let raw = ctl.controls(&state, &mem, &params);
        let ctrl = scenario.applied(raw);
        traj.push(t, state, ctrl, raw.n, scenario.monitor(&state, &mem, &ctrl));
        if i < steps {
            y = rk4_step(vector_field, &y, t, h)?;
            check_bounded(&y, t + h)?;
        }
    }
    Ok(traj)
}

/// Sampled-data SGA-DR: controls are held over `[t_k, t_k + h)`, then the
/// controller memory advances by one increment computed from the samples at
/// `t_k`. The increment is scaled by `h` unless `literal_paper_update` is set.
pub fn simulate_sampled(scenario: &Scenario) -> Result<Trajectory> {
    scenario.validate()?;
    let per_sample = scenario.steps_per_sample().ok_or_else(|| {
        config_err(
            "run.sample_interval",
            "sampled-data mode needs a sampling interval",
        )
    })?;
    let sample_h = scenario.sample_interval.unwrap_or_default();
    let params = scenario.params;
    let ctl = scenario.controller;
    let factor = if scenario.literal_paper_update {
        1.0
    } else {
        sample_h
    };

    let steps = scenario.n_steps();
    let h = scenario.h_int;
    let mut traj = Trajectory::with_capacity(steps + 1);
    let mut plant = [
        scenario.initial.energy,
        scenario.initial.q,
        scenario.initial.p,
    ];
    let mut held = scenario.memory0();
    // w_{k+1}, computed from the sample at t_k and applied at t_{k+1}.
    let mut next: Option<ControllerMemory> = None;
    for i in 0..=steps {
        let t = i as f64 * h;
        let state = MeanState::new(plant[0], plant[1], plant[2]);
        if i % per_sample == 0 {
            if let Some(m) = next.take() {
                held = m;
            }
            let rate = ctl.memory_rate(&state, &held, &params).unwrap_or_default();
            next = Some(ControllerMemory::new(
                held.u + factor * rate.du,
                held.n + factor * rate.dn,
            ));
        }
        let raw = held.as_controls();
        let ctrl = scenario.applied(raw);
        traj.push(
            t,
            state,
            ctrl,
            raw.n,
            scenario.monitor(&state, &held, &ctrl),
        );
        if i == steps {
            break;
        }
        let field = |_t: f64, x: &[f64; 3]| -> [f64; 3] {
            let d = model::rhs(&MeanState::new(x[0], x[1], x[2]), &ctrl, &params);
            [d.energy, d.q, d.p]
        };
        plant = rk4_step(field, &plant, t, h)?;
        let pending = next.unwrap_or(held);
        check_bounded(&[plant[0], plant[1], plant[2], pending.u, pending.n], t + h)?;
    }
    Ok(traj)
}

/// Runs [`simulate_sampled`] when a sampling interval is set, otherwise
/// [`simulate_continuous`].
pub fn simulate(scenario: &Scenario) -> Result<Trajectory> {
    if scenario.sample_interval.is_some() {
        simulate_sampled(scenario)
    } else {
        simulate_continuous(scenario)
    }
}

pub(crate) fn monitor_for(
    scenario: &Scenario,
    state: &MeanState,
    mem: &ControllerMemory,
    ctrl: &ControlInput,
) -> Monitor {
    scenario.monitor(state, mem, ctrl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::SgaGains;
    use crate::model::Target;
    use approx::assert_abs_diff_eq;

    fn unit() -> OscillatorParams {
        OscillatorParams::default()
    }

    fn scenario(law: Law, e0: f64, e_star: f64) -> Scenario {
        let params = unit();
        Scenario::new(
            params,
            MeanState::new(e0, 1.0, 0.0),
            ControllerConfig {
                law,
                gains: SgaGains {
                    gamma1: 3.0,
                    gamma2: 0.5,
                    alpha1: 1.0,
                    alpha2: 1.0,
                    kappa: 0.5,
                    gamma_fin: 15.0,
                },
                target: Target::new(e_star, &params).unwrap(),
                dr_use_tilde: false,
            },
        )
    }

    #[test]
    fn zero_field_leaves_state_unchanged() {
        let y = [1.5, -2.0, 0.25];
        let next = rk4_step(|_, _: &[f64; 3]| [0.0; 3], &y, 0.3, 0.1).unwrap();
        assert_eq!(next, y);
    }

    #[test]
    fn exponential_decay_single_step() {
        let next = rk4_step(|_, y: &[f64; 1]| [-y[0]], &[1.0], 0.0, 0.1).unwrap();
        // Degree-4 Taylor polynomial of exp(-0.1).
        assert_abs_diff_eq!(next[0], 0.9048375, epsilon = 1e-15);
        assert!((next[0] - (-0.1f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn exponential_energy_law_matches_closed_form() {
        let (gamma, kappa, e_star, e0) = (1.0, 0.5, 1.8, 0.3);
        let mut y = [e0];
        for i in 0..100 {
            y = rk4_step(
                |_, y: &[f64; 1]| [-2.0 * gamma * kappa * (y[0] - e_star)],
                &y,
                i as f64 * 0.01,
                0.01,
            )
            .unwrap();
        }
        let exact = e_star + (e0 - e_star) * (-1.0f64).exp();
        assert!((y[0] - exact).abs() < 1e-9);
    }

    #[test]
    fn non_finite_stage_is_a_blowup() {
        let err = rk4_step(|_, y: &[f64; 1]| [y[0].exp()], &[800.0], 4.0, 0.1).unwrap_err();
        assert!(matches!(err, Error::Blowup { t, .. } if t == 4.0));
        assert!(rk4_step(|_, y: &[f64; 1]| [y[0]], &[1.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn scenario_validation() {
        let mut s = scenario(Law::SgaDr, 0.1, 0.8);
        s.sample_interval = Some(0.0105);
        assert!(
            matches!(s.validate(), Err(Error::Config { key, .. }) if key == "run.sample_interval")
        );
        s.sample_interval = Some(2.0);
        assert!(s.validate().is_ok());
        assert_eq!(s.steps_per_sample(), Some(2000));

        let mut s = scenario(Law::SgaD, 0.1, 0.8);
        s.sample_interval = Some(1.0);
        assert!(s.validate().is_err());

        let mut s = scenario(Law::SgaD, 0.1, 0.8);
        s.h_int = -1e-3;
        assert!(s.validate().is_err());
        let mut s = scenario(Law::SgaD, 0.1, 0.8);
        s.t_final = 0.0;
        assert!(s.validate().is_err());
        let mut s = scenario(Law::SgaD, f64::NAN, 0.8);
        s.t_final = 1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn trajectory_grid_is_uniform() {
        let mut s = scenario(Law::SgaD, 0.1, 0.8);
        s.t_final = 1.0;
        let traj = simulate_continuous(&s).unwrap();
        assert_eq!(traj.len(), 1001);
        traj.check_uniform().unwrap();
        assert_eq!(traj.times[1000], 1.0);
    }

    #[test]
    fn continuous_equilibrium_is_constant() {
        for law in [Law::SgaD, Law::SgaDr, Law::IncoherentExponential] {
            let mut s = scenario(law, 0.8, 0.8);
            s.initial = MeanState::new(0.8, 0.0, 0.0);
            s.t_final = 2.0;
            let traj = simulate_continuous(&s).unwrap();
            for st in &traj.states {
                assert_eq!(*st, s.initial, "{law:?}");
            }
        }
    }

    #[test]
    fn sampled_equilibrium_is_constant() {
        for h in [0.5, 1.0, 5.0] {
            for literal in [false, true] {
                let mut s = scenario(Law::SgaDr, 0.8, 0.8);
                s.initial = MeanState::new(0.8, 0.0, 0.0);
                s.t_final = 10.0;
                s.sample_interval = Some(h);
                s.literal_paper_update = literal;
                let traj = simulate_sampled(&s).unwrap();
                assert!(traj.states.iter().all(|st| *st == s.initial));
                assert!(traj
                    .controls
                    .iter()
                    .all(|c| *c == ControlInput::new(0.0, 0.8)));
            }
        }
    }

    #[test]
    fn sampled_needs_dr_and_interval() {
        let s = scenario(Law::SgaDr, 0.1, 0.8);
        assert!(simulate_sampled(&s).is_err());
    }

    #[test]
    fn controls_are_held_between_samples() {
        let mut s = scenario(Law::SgaDr, 0.1, 0.8);
        s.t_final = 6.0;
        s.sample_interval = Some(2.0);
        let traj = simulate_sampled(&s).unwrap();
        let per = 2000;
        for k in 0..3 {
            let first = traj.controls[k * per];
            assert!(traj.controls[k * per..(k + 1) * per]
                .iter()
                .all(|c| *c == first));
        }
        // The first update lands at t = 2 and uses the t = 0 sample.
        assert_ne!(traj.controls[per], traj.controls[0]);
        let s0 = traj.states[0];
        let expect_n = 0.8 + 2.0 * (-0.5 * (s0.energy - 0.8));
        assert_abs_diff_eq!(traj.controls[per].n, expect_n, epsilon = 1e-15);
    }

    #[test]
    fn clamp_feeds_non_negative_n() {
        let mut s = scenario(Law::SgaF, 0.9, 0.6);
        s.t_final = 1.0;
        let raw = simulate_continuous(&s).unwrap();
        assert!(raw.min_n() < 0.0);
        s.clamp_negative_n = true;
        let clamped = simulate_continuous(&s).unwrap();
        assert!(clamped.min_n() >= 0.0);
        assert!(clamped.negative_n_samples > 0);
    }

    #[test]
    fn blowup_is_reported() {
        // Strong positive feedback in the coherent channel.
        let mut s = scenario(Law::SgaDr, 0.1, 0.8);
        s.controller.gains.alpha1 = -1e3;
        assert!(s.validate().is_err());
        let mut s = scenario(Law::SgaD, 0.1, 0.8);
        s.initial = MeanState::new(0.1, 1e13, 0.0);
        s.t_final = 0.01;
        assert!(matches!(simulate_continuous(&s), Err(Error::Blowup { .. })));
    }

    #[test]
    fn fourth_order_step_halving() {
        for law in [Law::SgaD, Law::SgaDr, Law::SgaF] {
            let run = |h: f64| {
                let mut s = scenario(law, 0.1, 0.8);
                s.t_final = 2.0;
                s.h_int = h;
                let t = simulate_continuous(&s).unwrap();
                let (st, c) = (
                    t.last_state().copied().unwrap(),
                    *t.controls.last().unwrap(),
                );
                [st.energy, st.q, st.p, c.u, c.n]
            };
            let diff = |a: [f64; 5], b: [f64; 5]| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max)
            };
            let (a, b, c) = (run(0.05), run(0.025), run(0.0125));
            let ratio = diff(a, b) / diff(b, c);
            assert!(ratio >= 16.0, "{law:?}: ratio {ratio}");
        }
    }
}
