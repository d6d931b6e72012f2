//! Certificates and monitors for the closed loops.

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::controllers::{ControllerMemory, SgaGains};
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::model::{self, MeanState, OscillatorParams, Target};

/// Stand-in for an unbounded admissible `Gamma2`.
pub const GAMMA2_CAP: f64 = 1e12;

/// Distances below this count as having reached the equilibrium.
pub const SATURATION_FLOOR: f64 = 1e-12;

/// Lyapunov function of the SGA-D loop,
/// `V1 = W(E) + (u - u*)^2 / (2 Gamma1) + (n - n*)^2 / (2 Gamma2)`.
pub fn lyapunov_v1(
    state: &MeanState,
    mem: &ControllerMemory,
    gains: &SgaGains,
    target: &Target,
) -> Result<f64> {
    if !(gains.gamma1 > 0.0) {
        return Err(Error::ZeroGain("gamma1"));
    }
    if !(gains.gamma2 > 0.0) {
        return Err(Error::ZeroGain("gamma2"));
    }
    Ok(v1_unchecked(state, mem, gains, target))
}

#[inline]
pub(crate) fn v1_unchecked(
    state: &MeanState,
    mem: &ControllerMemory,
    gains: &SgaGains,
    target: &Target,
) -> f64 {
    let du = mem.u - target.u_star;
    let dn = mem.n - target.n_star;
    model::w(state.energy, target.e_star)
        + du * du / (2.0 * gains.gamma1)
        + dn * dn / (2.0 * gains.gamma2)
}

/// Time derivative of V1 along SGA-D trajectories, `-2 gamma (E - E*)^2`.
pub fn v1_rate_sga_d(energy: f64, e_star: f64, params: &OscillatorParams) -> f64 {
    let d = energy - e_star;
    -2.0 * params.gamma * d * d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositivityMode {
    Heating,
    Cooling,
}

/// Outcome of the `n(t) >= 0` sufficient condition for SGA-D started at
/// `u(0) = 0, n(0) = n*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityVerdict {
    pub mode: PositivityMode,
    pub gamma2_max: f64,
    /// `sqrt(Gamma2) omega0` for the configured gain.
    pub alpha: f64,
    pub satisfied: bool,
}

/// Largest `Gamma2` for which non-negativity of `n(t)` is guaranteed:
/// `1 / omega0^2` when heating, `1 / (omega0^2 (E(0)/E* - 1)^2)` when cooling.
pub fn positivity_bound(mode: PositivityMode, e0: f64, e_star: f64, omega0: f64) -> Result<f64> {
    if !(omega0 > 0.0) {
        return Err(Error::Domain(format!("omega0 must be > 0, got {omega0}")));
    }
    let w2 = omega0 * omega0;
    match mode {
        PositivityMode::Heating => {
            if !(e_star > e0) {
                return Err(Error::Domain(format!(
                    "heating needs E* > E(0), got E* = {e_star}, E(0) = {e0}"
                )));
            }
            Ok(1.0 / w2)
        }
        PositivityMode::Cooling => {
            if e_star == 0.0 {
                return Err(Error::Domain(
                    "cooling bound is unbounded in E(0)/E* for E* = 0".into(),
                ));
            }
            if !(e_star > 0.0 && e0 > e_star) {
                return Err(Error::Domain(format!(
                    "cooling needs E(0) > E* > 0, got E* = {e_star}, E(0) = {e0}"
                )));
            }
            let depth = e0 / e_star - 1.0;
            let bound = 1.0 / (w2 * depth * depth);
            Ok(if bound.is_finite() {
                bound.min(GAMMA2_CAP)
            } else {
                GAMMA2_CAP
            })
        }
    }
}

/// Classifies the run and compares the configured `gamma2` against the bound.
/// `E(0) = E*` is treated as the zero-depth cooling limit.
pub fn positivity_verdict(
    e0: f64,
    e_star: f64,
    omega0: f64,
    gamma2: f64,
) -> Result<PositivityVerdict> {
    let (mode, gamma2_max) = if e_star > e0 {
        (
            PositivityMode::Heating,
            positivity_bound(PositivityMode::Heating, e0, e_star, omega0)?,
        )
    } else if e0 > e_star {
        (
            PositivityMode::Cooling,
            positivity_bound(PositivityMode::Cooling, e0, e_star, omega0)?,
        )
    } else {
        (PositivityMode::Cooling, GAMMA2_CAP)
    };
    Ok(PositivityVerdict {
        mode,
        gamma2_max,
        alpha: gamma2.sqrt() * omega0,
        satisfied: gamma2 <= gamma2_max,
    })
}

/// Lowest energy reachable by cooling with guaranteed `n >= 0`:
/// `alpha / (1 + alpha) * E(0)`.
pub fn cooling_floor(alpha: f64, e0: f64) -> f64 {
    alpha / (1.0 + alpha) * e0
}

/// Decay rate `Omega = 2 gamma (omega0 Gamma + 1)` of the incoherent finite law.
pub fn finite_form_rate(gamma_fin: f64, params: &OscillatorParams) -> f64 {
    2.0 * params.gamma * (params.omega0 * gamma_fin + 1.0)
}

/// Steady state `E* / (1 + 1/(omega0 Gamma))` of the incoherent finite law.
pub fn finite_form_limit(e_star: f64, gamma_fin: f64, params: &OscillatorParams) -> f64 {
    e_star / (1.0 + 1.0 / (params.omega0 * gamma_fin))
}

/// Closed-form energy under `n = -Gamma (E - E*)`, `u = 0`.
pub fn finite_form_solution(
    t: f64,
    e0: f64,
    e_star: f64,
    gamma_fin: f64,
    params: &OscillatorParams,
) -> f64 {
    let decay = (-finite_form_rate(gamma_fin, params) * t).exp();
    finite_form_limit(e_star, gamma_fin, params) * (1.0 - decay) + e0 * decay
}

/// Sufficient condition `gamma > 4 Gamma1 Gamma2` for exponential stability of
/// the SGA-DR equilibrium.
pub fn stability_condition_dr(gamma: f64, gamma1: f64, gamma2: f64) -> bool {
    gamma > 4.0 * gamma1 * gamma2
}

/// Solves `R Ã + Ãᵀ R = -I` with `Ã = A + gamma0 I / 2`, which yields an
/// `R = Rᵀ > 0` with `R A + Aᵀ R <= -gamma0 R` for the (P, Q) drift matrix.
pub fn lyapunov_matrix(params: &OscillatorParams, gamma0: f64) -> Result<Matrix2<f64>> {
    if !(gamma0 > 0.0 && gamma0 < params.gamma) {
        return Err(Error::Infeasible(format!(
            "Lyapunov inequality needs 0 < gamma0 < gamma = {}, got {gamma0}",
            params.gamma
        )));
    }
    let m = params.drift_matrix() + Matrix2::identity() * (0.5 * gamma0);
    // Unknowns (r11, r12, r22) of the symmetric R.
    let sys = Matrix3::new(
        2.0 * m[(0, 0)],
        2.0 * m[(1, 0)],
        0.0,
        m[(0, 1)],
        m[(0, 0)] + m[(1, 1)],
        m[(1, 0)],
        0.0,
        2.0 * m[(0, 1)],
        2.0 * m[(1, 1)],
    );
    let rhs = Vector3::new(-1.0, 0.0, -1.0);
    let sol = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Infeasible("singular Lyapunov system".into()))?;
    Ok(Matrix2::new(sol[0], sol[1], sol[1], sol[2]))
}

/// Result of checking a candidate `R` against `R A + Aᵀ R <= -gamma0 R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCheck {
    pub symmetric: bool,
    pub min_eigenvalue: f64,
    /// Largest eigenvalue of `R A + Aᵀ R + gamma0 R`.
    pub residual_max_eigenvalue: f64,
    pub valid: bool,
}

pub fn verify_lyapunov_matrix(
    r: &Matrix2<f64>,
    params: &OscillatorParams,
    gamma0: f64,
) -> LyapunovCheck {
    const TOL: f64 = 1e-10;
    let symmetric = (r[(0, 1)] - r[(1, 0)]).abs() <= TOL * r.abs().max().max(1.0);
    let sym = (r + r.transpose()) * 0.5;
    let min_eigenvalue = SymmetricEigen::new(sym).eigenvalues.min();
    let a = params.drift_matrix();
    let residual = sym * a + a.transpose() * sym + sym * gamma0;
    let residual = (residual + residual.transpose()) * 0.5;
    let residual_max_eigenvalue = SymmetricEigen::new(residual).eigenvalues.max();
    LyapunovCheck {
        symmetric,
        min_eigenvalue,
        residual_max_eigenvalue,
        valid: symmetric && min_eigenvalue > 0.0 && residual_max_eigenvalue <= TOL,
    }
}

/// Least-squares fit of `log |z(t) - z*|` on a trailing window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Decay rate; positive means exponential convergence.
    pub rate: f64,
    pub intercept: f64,
    /// Some window sample fell below [`SATURATION_FLOOR`] and was left out.
    pub saturated: bool,
    pub samples: usize,
    /// Largest absolute deviation of `log |z - z*|` from the fitted line.
    pub max_residual: f64,
    /// Drop of the fitted line across the window, `rate * duration`.
    pub window_drop: f64,
}

/// Fits the decay of the full closed-loop vector `z = (E, P, Q, u, n)`
/// toward `equilibrium` over the last `tail_fraction` of the trajectory.
pub fn exponential_rate_fit(
    traj: &Trajectory,
    equilibrium: &[f64; 5],
    tail_fraction: f64,
) -> Result<RateFit> {
    if traj.len() < 3 {
        return Err(Error::InvalidInput(
            "trajectory too short for a rate fit".into(),
        ));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "tail fraction must lie in (0, 1], got {tail_fraction}"
        )));
    }
    let start = ((1.0 - tail_fraction) * (traj.len() - 1) as f64).floor() as usize;
    let mut saturated = false;
    let mut pts = Vec::with_capacity(traj.len() - start);
    for i in start..traj.len() {
        let s = traj.states[i];
        let c = traj.controls[i];
        let z = [s.energy, s.p, s.q, c.u, c.n];
        let dist = z
            .iter()
            .zip(equilibrium)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dist < SATURATION_FLOOR {
            saturated = true;
        } else {
            pts.push((traj.times[i], dist.ln()));
        }
    }
    if pts.len() < 2 {
        return Ok(RateFit {
            rate: 0.0,
            intercept: f64::NEG_INFINITY,
            saturated: true,
            samples: pts.len(),
            max_residual: 0.0,
            window_drop: 0.0,
        });
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut stt, mut sty) = (0.0, 0.0);
    for &(t, y) in &pts {
        stt += (t - mean_t) * (t - mean_t);
        sty += (t - mean_t) * (y - mean_y);
    }
    let slope = sty / stt;
    let intercept = mean_y - slope * mean_t;
    let max_residual = pts
        .iter()
        .map(|&(t, y)| (y - (intercept + slope * t)).abs())
        .fold(0.0, f64::max);
    let duration = pts[pts.len() - 1].0 - pts[0].0;
    Ok(RateFit {
        rate: -slope,
        intercept,
        saturated,
        samples: pts.len(),
        max_residual,
        window_drop: -slope * duration,
    })
}
