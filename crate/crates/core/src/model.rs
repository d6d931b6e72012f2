//! Averaged plant: oscillator constants, the (E, Q, P) mean state and the
//! closed first-moment equations
//!
//! ```text
//! dE/dt = -u P + 2 gamma (omega0 n - E)
//! dQ/dt = P - gamma Q
//! dP/dt = -omega0^2 Q - u - gamma P
//! ```
//!
//! Energy is measured as `E = omega0 <a^+ a>` (no zero-point term), which is
//! the convention under which the relaxation term above is exact.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, ensure_finite, Error, Result};

/// Oscillator frequency and relaxation rate, dimensionless (hbar = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub omega0: f64,
    pub gamma: f64,
}

impl OscillatorParams {
    pub fn new(omega0: f64, gamma: f64) -> Result<Self> {
        let params = Self { omega0, gamma };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(config_err("params.omega0", "must be finite and > 0"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(config_err("params.gamma", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Drift matrix `A` of the (P, Q) subsystem, `X' = A X + B u` with
    /// `X = (P, Q)` and `B = (-1, 0)`.
    pub fn drift_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(-self.gamma, -self.omega0 * self.omega0, 1.0, -self.gamma)
    }

    pub fn input_matrix(&self) -> Vector2<f64> {
        Vector2::new(-1.0, 0.0)
    }
}

impl Default for OscillatorParams {
    fn default() -> Self {
        Self {
            omega0: 1.0,
            gamma: 1.0,
        }
    }
}

/// Mean energy, position and momentum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanState {
    pub energy: f64,
    pub q: f64,
    pub p: f64,
}

impl MeanState {
    pub const fn new(energy: f64, q: f64, p: f64) -> Self {
        Self { energy, q, p }
    }

    pub fn is_finite(&self) -> bool {
        self.energy.is_finite() && self.q.is_finite() && self.p.is_finite()
    }

    /// Energy carried by the mean displacement, `(P^2 + omega0^2 Q^2) / 2`.
    /// A physical state always has `E >= coherent_energy`.
    pub fn coherent_energy(&self, params: &OscillatorParams) -> f64 {
        0.5 * (self.p * self.p + params.omega0 * params.omega0 * self.q * self.q)
    }
}

/// Coherent amplitude `u` and bath occupation `n`.
///
/// `n` is never clamped here; negative values are representable and reported
/// through [`ControlInput::is_physical`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub u: f64,
    pub n: f64,
}

impl ControlInput {
    pub const fn new(u: f64, n: f64) -> Self {
        Self { u, n }
    }

    pub fn is_physical(&self) -> bool {
        self.n >= 0.0
    }

    /// Same control with `n` replaced by `max(n, 0)`.
    pub fn clamped(self) -> Self {
        Self {
            u: self.u,
            n: self.n.max(0.0),
        }
    }
}

/// Target energy and the matching equilibrium controls `(u*, n*) = (0, E*/omega0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub e_star: f64,
    pub n_star: f64,
    pub u_star: f64,
}

impl Target {
    pub fn new(e_star: f64, params: &OscillatorParams) -> Result<Self> {
        if !(e_star.is_finite() && e_star >= 0.0) {
            return Err(config_err("target.energy", "must be finite and >= 0"));
        }
        Ok(Self {
            e_star,
            n_star: e_star / params.omega0,
            u_star: 0.0,
        })
    }

    pub fn equilibrium_controls(&self) -> ControlInput {
        ControlInput::new(self.u_star, self.n_star)
    }
}

/// Right-hand side of the moment equations. The returned [`MeanState`] holds
/// `(dE/dt, dQ/dt, dP/dt)`.
pub fn mean_field_rhs(
    state: &MeanState,
    ctrl: &ControlInput,
    params: &OscillatorParams,
) -> Result<MeanState> {
    ensure_finite("state", &[state.energy, state.q, state.p])?;
    ensure_finite("control", &[ctrl.u, ctrl.n])?;
    ensure_finite("params", &[params.omega0, params.gamma])?;
    Ok(rhs(state, ctrl, params))
}

#[inline]
pub(crate) fn rhs(state: &MeanState, ctrl: &ControlInput, params: &OscillatorParams) -> MeanState {
    let OscillatorParams { omega0, gamma } = *params;
    MeanState {
        energy: -ctrl.u * state.p + 2.0 * gamma * (omega0 * ctrl.n - state.energy),
        q: state.p - gamma * state.q,
        p: -omega0 * omega0 * state.q - ctrl.u - gamma * state.p,
    }
}

/// Goal function `W(E) = (E - E*)^2 / 2`.
pub fn objective(energy: f64, e_star: f64) -> Result<f64> {
    ensure_finite("objective arguments", &[energy, e_star])?;
    Ok(w(energy, e_star))
}

#[inline]
pub(crate) fn w(energy: f64, e_star: f64) -> f64 {
    let d = energy - e_star;
    0.5 * d * d
}

/// Bath occupation at `omega0` for a thermal bath at inverse temperature `beta`:
/// `1 / (exp(omega0 beta) - 1)`.
pub fn n_from_temperature(beta: f64, omega0: f64) -> Result<f64> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Domain(format!(
            "inverse temperature must be finite and > 0, got {beta}"
        )));
    }
    if !(omega0.is_finite() && omega0 > 0.0) {
        return Err(Error::Domain(format!("omega0 must be > 0, got {omega0}")));
    }
    Ok(1.0 / (omega0 * beta).exp_m1())
}
