//! Speed-gradient control laws.
//!
//! The speed of the goal function along the moment equations is
//! `omega(u, n) = (E - E*) (-u P + 2 gamma (omega0 n - E))`, with gradient
//! `(-P (E - E*), 2 gamma omega0 (E - E*))` in `(u, n)`. Every law below steps
//! against that gradient, either through the control derivative (differential
//! forms) or directly (finite forms).

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::model::{ControlInput, MeanState, OscillatorParams, Target};

/// Gains of all laws. Only the fields used by the selected [`Law`] matter.
///
/// `gamma2` is always the untilded gain; the SGA-D and SGA-F laws scale it by
/// `2 gamma omega0` internally (see [`SgaGains::gamma2_tilde`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgaGains {
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub kappa: f64,
    pub gamma_fin: f64,
}

impl Default for SgaGains {
    fn default() -> Self {
        Self {
            gamma1: 0.0,
            gamma2: 0.0,
            alpha1: 0.0,
            alpha2: 0.0,
            kappa: 1.0,
            gamma_fin: 0.0,
        }
    }
}

impl SgaGains {
    pub fn gamma2_tilde(&self, params: &OscillatorParams) -> f64 {
        2.0 * params.gamma * params.omega0 * self.gamma2
    }

    /// Checks the gains needed by `law`.
    pub fn validate_for(&self, law: Law) -> Result<()> {
        let non_negative = |key: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(config_err(key, format!("must be finite and >= 0, got {v}")))
            }
        };
        non_negative("controller.gamma1", self.gamma1)?;
        non_negative("controller.gamma2", self.gamma2)?;
        non_negative("controller.alpha1", self.alpha1)?;
        non_negative("controller.alpha2", self.alpha2)?;
        non_negative("controller.gamma_fin", self.gamma_fin)?;
        match law {
            Law::IncoherentFinite if self.gamma_fin <= 0.0 => Err(config_err(
                "controller.gamma_fin",
                "must be > 0 for the incoherent finite law",
            )),
            Law::IncoherentExponential => check_kappa(self.kappa),
            _ => Ok(()),
        }
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa <= 1.0 {
        Ok(())
    } else {
        Err(config_err(
            "controller.kappa",
            format!("must lie in (0, 1], got {kappa}"),
        ))
    }
}

/// Control-law selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    /// Differential form, coherent and incoherent channels.
    SgaD,
    /// Finite form, coherent and incoherent channels.
    SgaF,
    /// `n = -Gamma (E - E*)`, `u = 0`.
    IncoherentFinite,
    /// `n = ((1 - kappa) E + kappa E*) / omega0`, `u = 0`.
    IncoherentExponential,
    /// Differential form with leakage toward `(0, n*)`.
    SgaDr,
}

impl Law {
    /// Whether the law evolves `(u, n)` as ODE states.
    pub fn is_differential(self) -> bool {
        matches!(self, Law::SgaD | Law::SgaDr)
    }

    pub fn name(self) -> &'static str {
        match self {
            Law::SgaD => "sga-d",
            Law::SgaF => "sga-f",
            Law::IncoherentFinite => "incoherent-finite",
            Law::IncoherentExponential => "incoherent-exponential",
            Law::SgaDr => "sga-dr",
        }
    }
}

/// Controller-held values of the controls (the integrated states of the
/// differential laws).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControllerMemory {
    pub u: f64,
    pub n: f64,
}

impl ControllerMemory {
    pub const fn new(u: f64, n: f64) -> Self {
        Self { u, n }
    }

    /// `u(0) = 0, n(0) = n*`, the choice minimising the initial Lyapunov value.
    pub fn at_equilibrium(target: &Target) -> Self {
        Self {
            u: target.u_star,
            n: target.n_star,
        }
    }

    pub fn as_controls(&self) -> ControlInput {
        ControlInput::new(self.u, self.n)
    }
}

/// Time derivative of [`ControllerMemory`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MemoryRate {
    pub du: f64,
    pub dn: f64,
}

/// Speed of the goal function along the moment equations.
pub fn goal_speed(
    state: &MeanState,
    ctrl: &ControlInput,
    params: &OscillatorParams,
    e_star: f64,
) -> f64 {
    let err = state.energy - e_star;
    err * (-ctrl.u * state.p + 2.0 * params.gamma * (params.omega0 * ctrl.n - state.energy))
}

/// Gradient of [`goal_speed`] with respect to `(u, n)`. It does not depend on
/// the controls.
pub fn goal_speed_gradient(
    state: &MeanState,
    params: &OscillatorParams,
    e_star: f64,
) -> (f64, f64) {
    let err = state.energy - e_star;
    (-state.p * err, 2.0 * params.gamma * params.omega0 * err)
}

/// SGA-D: `du/dt = Gamma1 P (E - E*)`, `dn/dt = -Gamma2~ (E - E*)`.
pub fn sga_d_rhs(
    state: &MeanState,
    gains: &SgaGains,
    params: &OscillatorParams,
    e_star: f64,
) -> MemoryRate {
    let err = state.energy - e_star;
    MemoryRate {
        du: gains.gamma1 * state.p * err,
        dn: -gains.gamma2_tilde(params) * err,
    }
}

/// SGA-F: `u = Gamma1 P (E - E*)`, `n = -Gamma2~ (E - E*)`. `n` goes negative
/// whenever `E > E*`.
pub fn sga_f(
    state: &MeanState,
    gains: &SgaGains,
    params: &OscillatorParams,
    e_star: f64,
) -> ControlInput {
    let err = state.energy - e_star;
    ControlInput {
        u: gains.gamma1 * state.p * err,
        n: -gains.gamma2_tilde(params) * err,
    }
}

/// Incoherent-only finite law `n = -Gamma (E - E*)`.
pub fn incoherent_finite(energy: f64, gains: &SgaGains, e_star: f64) -> Result<f64> {
    if !(gains.gamma_fin > 0.0) {
        return Err(config_err(
            "controller.gamma_fin",
            "must be > 0 for the incoherent finite law",
        ));
    }
    Ok(-gains.gamma_fin * (energy - e_star))
}

/// Incoherent-only law solving `omega0 n - E = -kappa (E - E*)` for `n`.
pub fn incoherent_exponential(
    energy: f64,
    gains: &SgaGains,
    params: &OscillatorParams,
    e_star: f64,
) -> Result<f64> {
    check_kappa(gains.kappa)?;
    Ok(exponential_unchecked(
        energy,
        gains.kappa,
        params.omega0,
        e_star,
    ))
}

#[inline]
fn exponential_unchecked(energy: f64, kappa: f64, omega0: f64, e_star: f64) -> f64 {
    ((1.0 - kappa) * energy + kappa * e_star) / omega0
}

/// SGA-DR: `du/dt = Gamma1 P (E - E*) - alpha1 u`,
/// `dn/dt = -Gamma2 (E - E*) - alpha2 (n - n*)`.
///
/// The `n` channel uses the untilded `Gamma2` unless `use_tilde` is set, in
/// which case `Gamma2~ = 2 gamma omega0 Gamma2` is used as in SGA-D.
pub fn sga_dr_rhs(
    state: &MeanState,
    mem: &ControllerMemory,
    gains: &SgaGains,
    params: &OscillatorParams,
    target: &Target,
    use_tilde: bool,
) -> MemoryRate {
    let err = state.energy - target.e_star;
    let g2 = if use_tilde {
        gains.gamma2_tilde(params)
    } else {
        gains.gamma2
    };
    MemoryRate {
        du: gains.gamma1 * state.p * err - gains.alpha1 * (mem.u - target.u_star),
        dn: -g2 * err - gains.alpha2 * (mem.n - target.n_star),
    }
}

/// A law together with its gains and target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub law: Law,
    pub gains: SgaGains,
    pub target: Target,
    /// SGA-DR only: use `Gamma2~` instead of `Gamma2` in the `n` channel.
    #[serde(default)]
    pub dr_use_tilde: bool,
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        self.gains.validate_for(self.law)
    }

    /// Controls acting on the plant for the current state and memory.
    /// Differential laws return the memory; finite laws evaluate algebraically.
    pub fn controls(
        &self,
        state: &MeanState,
        mem: &ControllerMemory,
        params: &OscillatorParams,
    ) -> ControlInput {
        let e_star = self.target.e_star;
        match self.law {
            Law::SgaD | Law::SgaDr => mem.as_controls(),
            Law::SgaF => sga_f(state, &self.gains, params, e_star),
            Law::IncoherentFinite => {
                ControlInput::new(0.0, -self.gains.gamma_fin * (state.energy - e_star))
            }
            Law::IncoherentExponential => ControlInput::new(
                0.0,
                exponential_unchecked(state.energy, self.gains.kappa, params.omega0, e_star),
            ),
        }
    }

    /// Memory derivative for differential laws, `None` for finite ones.
    pub fn memory_rate(
        &self,
        state: &MeanState,
        mem: &ControllerMemory,
        params: &OscillatorParams,
    ) -> Option<MemoryRate> {
        match self.law {
            Law::SgaD => Some(sga_d_rhs(state, &self.gains, params, self.target.e_star)),
            Law::SgaDr => Some(sga_dr_rhs(
                state,
                mem,
                &self.gains,
                params,
                &self.target,
                self.dr_use_tilde,
            )),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit() -> OscillatorParams {
        OscillatorParams::new(1.0, 1.0).unwrap()
    }

    fn gains(gamma1: f64, gamma2: f64) -> SgaGains {
        SgaGains {
            gamma1,
            gamma2,
            ..SgaGains::default()
        }
    }

    /// Central difference of `goal_speed` in `u` and `n`; exact up to rounding
    /// since the speed is affine in the controls.
    fn fd_gradient(
        state: &MeanState,
        ctrl: &ControlInput,
        params: &OscillatorParams,
        e_star: f64,
    ) -> (f64, f64) {
        let h = 1e-6;
        let f = |u: f64, n: f64| goal_speed(state, &ControlInput::new(u, n), params, e_star);
        (
            (f(ctrl.u + h, ctrl.n) - f(ctrl.u - h, ctrl.n)) / (2.0 * h),
            (f(ctrl.u, ctrl.n + h) - f(ctrl.u, ctrl.n - h)) / (2.0 * h),
        )
    }

    #[test]
    fn goal_speed_examples() {
        let s = goal_speed(
            &MeanState::new(0.5, 0.0, 1.0),
            &ControlInput::new(2.0, 0.5),
            &unit(),
            1.8,
        );
        assert_abs_diff_eq!(s, 2.6, epsilon = 1e-14);
        let s = goal_speed(
            &MeanState::new(1.8, 0.3, -4.0),
            &ControlInput::new(7.0, -2.0),
            &unit(),
            1.8,
        );
        assert_eq!(s, 0.0);
    }

    /// `goal_speed` is the chain-rule derivative of W along the plant.
    #[test]
    fn goal_speed_matches_time_derivative_of_objective() {
        let params = OscillatorParams::new(1.3, 0.7).unwrap();
        let e_star = 0.9;
        let state = MeanState::new(0.4, -0.6, 1.1);
        let ctrl = ControlInput::new(0.8, 0.35);
        let h = 1e-6;
        let d = crate::model::rhs(&state, &ctrl, &params);
        let w = |e: f64| crate::model::w(e, e_star);
        let fd = (w(state.energy + h * d.energy) - w(state.energy - h * d.energy)) / (2.0 * h);
        let speed = goal_speed(&state, &ctrl, &params, e_star);
        assert!((fd - speed).abs() < 1e-6 * (1.0 + speed.abs()));
    }

    #[test]
    fn sga_d_examples() {
        let r = sga_d_rhs(
            &MeanState::new(1.8, 1.0, 3.0),
            &gains(3.0, 0.5),
            &unit(),
            1.8,
        );
        assert_eq!((r.du, r.dn), (0.0, 0.0));

        let r = sga_d_rhs(
            &MeanState::new(1.1, 0.0, 0.5),
            &gains(3.0, 0.5),
            &unit(),
            1.8,
        );
        assert_abs_diff_eq!(r.du, -1.05, epsilon = 1e-14);
        assert_abs_diff_eq!(r.dn, 0.7, epsilon = 1e-14);
    }

    /// SGA-D steps along `-(Gamma1, Gamma2) * grad omega`, with the tilde factor
    /// absorbed into the `n` channel.
    #[test]
    fn sga_d_is_scaled_negative_gradient() {
        let params = OscillatorParams::new(1.4, 0.6).unwrap();
        let g = gains(2.0, 0.3);
        let state = MeanState::new(0.2, 0.4, -0.9);
        let ctrl = ControlInput::new(0.1, 0.5);
        let (gu, gn) = fd_gradient(&state, &ctrl, &params, 1.1);
        let r = sga_d_rhs(&state, &g, &params, 1.1);
        assert!((r.du - (-g.gamma1 * gu)).abs() < 1e-6 * r.du.abs().max(1.0));
        assert!((r.dn - (-g.gamma2 * gn)).abs() < 1e-6 * r.dn.abs().max(1.0));
    }

    #[test]
    fn sga_f_examples() {
        let g = gains(3.0, 15.0);
        let c = sga_f(&MeanState::new(0.6, 0.0, 0.2), &g, &unit(), 0.6);
        assert_eq!((c.u, c.n), (0.0, 0.0));

        let c = sga_f(&MeanState::new(0.3, 0.0, 0.2), &g, &unit(), 0.6);
        assert_abs_diff_eq!(c.u, -0.18, epsilon = 1e-14);
        assert_abs_diff_eq!(c.n, 9.0, epsilon = 1e-13);
        assert!(c.is_physical());

        let c = sga_f(&MeanState::new(0.9, 0.0, 0.2), &g, &unit(), 0.6);
        assert!(c.n < 0.0);
        assert!(!c.is_physical());
    }

    #[test]
    fn incoherent_finite_examples() {
        let g = SgaGains {
            gamma_fin: 15.0,
            ..SgaGains::default()
        };
        assert_eq!(incoherent_finite(0.6, &g, 0.6).unwrap(), 0.0);
        assert_abs_diff_eq!(
            incoherent_finite(0.3, &g, 0.6).unwrap(),
            4.5,
            epsilon = 1e-14
        );
        let n = incoherent_finite(0.9, &g, 0.6).unwrap();
        assert_abs_diff_eq!(n, -4.5, epsilon = 1e-14);
        assert!(!ControlInput::new(0.0, n).is_physical());
        assert!(incoherent_finite(0.3, &SgaGains::default(), 0.6).is_err());
    }

    #[test]
    fn incoherent_exponential_examples() {
        let p = unit();
        let half = SgaGains {
            kappa: 0.5,
            ..SgaGains::default()
        };
        assert_eq!(incoherent_exponential(1.0, &half, &p, 1.0).unwrap(), 1.0);
        assert_eq!(incoherent_exponential(2.0, &half, &p, 1.0).unwrap(), 1.5);
        let full = SgaGains::default();
        let p2 = OscillatorParams::new(2.0, 1.0).unwrap();
        assert_eq!(incoherent_exponential(7.3, &full, &p2, 1.2).unwrap(), 0.6);
        for kappa in [0.0, -0.2, 1.01, f64::NAN] {
            let g = SgaGains {
                kappa,
                ..SgaGains::default()
            };
            assert!(incoherent_exponential(1.0, &g, &p, 1.0).is_err());
        }
    }

    #[test]
    fn sga_dr_examples() {
        let p = unit();
        let target = Target::new(1.8, &p).unwrap();
        let g = SgaGains {
            gamma1: 3.0,
            gamma2: 0.5,
            alpha1: 1.0,
            alpha2: 1.0,
            ..SgaGains::default()
        };
        let r = sga_dr_rhs(
            &MeanState::new(1.8, 0.4, 0.3),
            &ControllerMemory::at_equilibrium(&target),
            &g,
            &p,
            &target,
            false,
        );
        assert_eq!((r.du, r.dn), (0.0, 0.0));

        let r = sga_dr_rhs(
            &MeanState::new(1.1, 0.0, 0.5),
            &ControllerMemory::new(0.2, target.n_star + 0.1),
            &g,
            &p,
            &target,
            false,
        );
        assert_abs_diff_eq!(r.du, -1.25, epsilon = 1e-14);
        assert_abs_diff_eq!(r.dn, 0.25, epsilon = 1e-14);
    }

    #[test]
    fn gains_validation_per_law() {
        let g = SgaGains::default();
        assert!(g.validate_for(Law::IncoherentFinite).is_err());
        assert!(g.validate_for(Law::SgaD).is_ok());
        let bad = SgaGains { gamma1: -1.0, ..g };
        assert!(bad.validate_for(Law::SgaD).is_err());
        let bad_kappa = SgaGains { kappa: 1.5, ..g };
        assert!(bad_kappa.validate_for(Law::IncoherentExponential).is_err());
        assert!(bad_kappa.validate_for(Law::SgaD).is_ok());
    }

    #[test]
    fn config_dispatch() {
        let p = unit();
        let target = Target::new(0.8, &p).unwrap();
        let state = MeanState::new(0.3, 0.2, -0.4);
        let mem = ControllerMemory::new(0.05, 0.7);
        let mk = |law| ControllerConfig {
            law,
            gains: SgaGains {
                gamma1: 3.0,
                gamma2: 0.5,
                gamma_fin: 15.0,
                kappa: 0.5,
                alpha1: 1.0,
                alpha2: 1.0,
            },
            target,
            dr_use_tilde: false,
        };
        assert_eq!(mk(Law::SgaD).controls(&state, &mem, &p), mem.as_controls());
        assert!(mk(Law::SgaF).memory_rate(&state, &mem, &p).is_none());
        let c = mk(Law::IncoherentExponential).controls(&state, &mem, &p);
        assert_eq!(c.u, 0.0);
        assert_abs_diff_eq!(c.n, 0.55, epsilon = 1e-15);
        let c = mk(Law::IncoherentFinite).controls(&state, &mem, &p);
        assert_abs_diff_eq!(c.n, 7.5, epsilon = 1e-14);
        assert!(mk(Law::SgaDr).memory_rate(&state, &mem, &p).is_some());
    }

    fn arb_params() -> impl Strategy<Value = OscillatorParams> {
        (0.2f64..3.0, 0.1f64..3.0).prop_map(|(w, g)| OscillatorParams::new(w, g).unwrap())
    }

    proptest! {
        #[test]
        fn analytic_gradient_matches_finite_difference(
            params in arb_params(),
            e in 0.0f64..4.0, q in -2.0f64..2.0, p in -2.0f64..2.0,
            u in -3.0f64..3.0, n in -1.0f64..4.0, e_star in 0.0f64..4.0,
        ) {
            let state = MeanState::new(e, q, p);
            let (gu, gn) = goal_speed_gradient(&state, &params, e_star);
            let (fu, fn_) = fd_gradient(&state, &ControlInput::new(u, n), &params, e_star);
            prop_assert!((gu - fu).abs() <= 1e-6 * gu.abs().max(1.0));
            prop_assert!((gn - fn_).abs() <= 1e-6 * gn.abs().max(1.0));
        }

        #[test]
        fn dr_without_leak_is_sga_d_with_untilded_gain(
            params in arb_params(),
            e in 0.0f64..4.0, p in -2.0f64..2.0,
            u in -3.0f64..3.0, n in -1.0f64..4.0, e_star in 0.0f64..4.0,
            g1 in 0.0f64..5.0, g2 in 0.0f64..5.0,
        ) {
            let target = Target::new(e_star, &params).unwrap();
            let state = MeanState::new(e, 0.1, p);
            let g = gains(g1, g2);
            let dr = sga_dr_rhs(&state, &ControllerMemory::new(u, n), &g, &params, &target, false);
            // Gamma2~ = Gamma2 exactly when 2 gamma omega0 = 1.
            let rescaled = SgaGains { gamma2: g2 / (2.0 * params.gamma * params.omega0), ..g };
            let d = sga_d_rhs(&state, &rescaled, &params, e_star);
            prop_assert_eq!(dr.du, d.du);
            prop_assert!((dr.dn - d.dn).abs() <= 1e-12 * d.dn.abs().max(1.0));

            let dr_tilde = sga_dr_rhs(&state, &ControllerMemory::new(u, n), &g, &params, &target, true);
            let d = sga_d_rhs(&state, &g, &params, e_star);
            prop_assert_eq!((dr_tilde.du, dr_tilde.dn), (d.du, d.dn));
        }

        #[test]
        fn exponential_law_is_non_negative(
            params in arb_params(),
            e in 0.0f64..100.0, e_star in 0.0f64..100.0, kappa in 1e-6f64..=1.0,
        ) {
            let g = SgaGains { kappa, ..SgaGains::default() };
            prop_assert!(incoherent_exponential(e, &g, &params, e_star).unwrap() >= 0.0);
        }

        /// Heating pushes every incoherent channel up, cooling pushes it down.
        #[test]
        fn incoherent_channels_have_correct_sign(
            params in arb_params(),
            e in 0.0f64..4.0, e_star in 0.0f64..4.0, kappa in 0.01f64..=1.0,
            g2 in 0.01f64..5.0, gamma_fin in 0.01f64..20.0,
        ) {
            prop_assume!((e - e_star).abs() > 1e-6);
            let heating = e < e_star;
            let sign_ok = |v: f64| if heating { v > 0.0 } else { v < 0.0 };
            let state = MeanState::new(e, 0.0, 0.3);
            let g = SgaGains { gamma2: g2, gamma_fin, kappa, ..SgaGains::default() };
            prop_assert!(sign_ok(sga_d_rhs(&state, &g, &params, e_star).dn));
            prop_assert!(sign_ok(sga_f(&state, &g, &params, e_star).n));
            prop_assert!(sign_ok(incoherent_finite(e, &g, e_star).unwrap()));
            // Relative to the occupation that would hold E stationary.
            let n = incoherent_exponential(e, &g, &params, e_star).unwrap();
            prop_assert!(sign_ok(params.omega0 * n - e));
        }

        #[test]
        fn every_law_is_at_rest_on_target(
            params in arb_params(), e_star in 0.0f64..4.0, q in -2.0f64..2.0, p in -2.0f64..2.0,
        ) {
            let target = Target::new(e_star, &params).unwrap();
            let state = MeanState::new(e_star, q, p);
            let g = SgaGains { gamma1: 3.0, gamma2: 0.5, gamma_fin: 15.0, kappa: 0.5, alpha1: 1.0, alpha2: 1.0 };
            let r = sga_d_rhs(&state, &g, &params, e_star);
            prop_assert_eq!((r.du, r.dn), (0.0, 0.0));
            let r = sga_dr_rhs(&state, &ControllerMemory::at_equilibrium(&target), &g, &params, &target, false);
            prop_assert_eq!((r.du, r.dn), (0.0, 0.0));
            let c = sga_f(&state, &g, &params, e_star);
            prop_assert_eq!((c.u, c.n), (0.0, 0.0));
            prop_assert_eq!(incoherent_finite(e_star, &g, e_star).unwrap(), 0.0);
            let n = incoherent_exponential(e_star, &g, &params, e_star).unwrap();
            prop_assert!((n - target.n_star).abs() <= 1e-12 * target.n_star.max(1.0));
        }
    }
}
