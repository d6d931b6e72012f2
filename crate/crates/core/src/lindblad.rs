//! Truncated-Fock master-equation oracle.
//!
//! Integrates
//!
//! ```text
//! drho/dt = -i [omega0 a^+a + u Q, rho]
//!           + gamma (n + 1) (2 a rho a^+ - rho a^+a - a^+a rho)
//!           + gamma n (2 a^+ rho a - a a^+ rho - rho a a^+)
//! ```
//!
//! on the lowest `N` number states and reads back `E = omega0 <a^+a>`,
//! `<Q>` and `<P>`, replaying controls recorded by a mean-field run.
//! All operators are the truncated `N x N` matrices, so `a a^+` has a zero in
//! its last diagonal entry; with that convention the generator is exactly
//! trace preserving.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::controllers::ControllerMemory;
use crate::error::{config_err, Error, Result};
use crate::integrator::{self, OdeState, Scenario, Trajectory};
use crate::model::{ControlInput, MeanState, OscillatorParams};

pub type CMatrix = DMatrix<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub const DEFAULT_DIM: usize = 60;
/// Extra levels used while preparing states, cut off afterwards.
const PREP_PADDING: usize = 48;
/// Allowed population above level `N - 1` when preparing a state.
pub const PREP_TAIL_TOL: f64 = 1e-8;
pub const TRACE_TOL: f64 = 1e-10;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const PREP_NEGATIVITY_TOL: f64 = 1e-8;

/// Run-time integrity limits of [`simulate_lindblad`].
pub mod limits {
    pub const TRACE_DRIFT: f64 = 1e-6;
    pub const NEGATIVITY: f64 = 1e-6;
    pub const TAIL_WARN: f64 = 1e-6;
    pub const TAIL_FAIL: f64 = 1e-4;
    /// Steps between eigenvalue scans.
    pub const EIGEN_STRIDE: usize = 100;
}

impl OdeState for CMatrix {
    fn add_scaled(&self, h: f64, k: &Self) -> Self {
        let mut out = self.clone();
        out.zip_apply(k, |a, b| *a += b * h);
        out
    }

    fn all_finite(&self) -> bool {
        self.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Dense ladder, quadrature and Hamiltonian matrices on `N` levels.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperators {
    pub dim: usize,
    pub omega0: f64,
    pub annihilate: CMatrix,
    pub create: CMatrix,
    pub number: CMatrix,
    pub position: CMatrix,
    pub momentum: CMatrix,
    pub h0: CMatrix,
}

pub fn build_operators(dim: usize, omega0: f64) -> Result<FockOperators> {
    if dim < 2 {
        return Err(Error::Dimension(format!(
            "Fock dimension must be >= 2, got {dim}"
        )));
    }
    if !(omega0 > 0.0 && omega0.is_finite()) {
        return Err(Error::Domain(format!("omega0 must be > 0, got {omega0}")));
    }
    let annihilate = CMatrix::from_fn(dim, dim, |j, k| {
        if k == j + 1 {
            Complex64::from((k as f64).sqrt())
        } else {
            Complex64::default()
        }
    });
    let create = annihilate.adjoint();
    let number = &create * &annihilate;
    let position = (&annihilate + &create) / Complex64::from((2.0 * omega0).sqrt());
    let momentum = (&annihilate - &create) * (Complex64::from((omega0 / 2.0).sqrt()) / I);
    let h0 = &number * Complex64::from(omega0);
    Ok(FockOperators {
        dim,
        omega0,
        annihilate,
        create,
        number,
        position,
        momentum,
        h0,
    })
}

/// A truncated density matrix. Construction through [`DensityMatrix::new`]
/// enforces Hermiticity, unit trace and (approximate) positivity.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
}

impl DensityMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        let rho = Self { entries };
        rho.validate(PREP_NEGATIVITY_TOL)?;
        Ok(rho)
    }

    pub(crate) fn from_unchecked(entries: CMatrix) -> Self {
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn validate(&self, negativity_tol: f64) -> Result<()> {
        let (r, c) = self.entries.shape();
        if r != c || r < 2 {
            return Err(Error::Dimension(format!(
                "density matrix must be square, N >= 2; got {r}x{c}"
            )));
        }
        let herm = hermiticity_residual(&self.entries);
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidInput(format!(
                "not Hermitian: residual {herm:e}"
            )));
        }
        let tr = trace_re(&self.entries);
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidInput(format!("trace {tr} != 1")));
        }
        let lam = min_eigenvalue(&self.entries);
        if lam < -negativity_tol {
            return Err(Error::InvalidInput(format!("negative eigenvalue {lam:e}")));
        }
        Ok(())
    }

    /// `(omega0 <a^+a>, <Q>, <P>)`.
    pub fn moments(&self, omega0: f64) -> MeanState {
        moments(&self.entries, omega0)
    }

    /// Population of the two highest retained levels.
    pub fn tail_mass(&self) -> f64 {
        tail_mass(&self.entries)
    }

    pub fn expectation(&self, op: &CMatrix) -> Complex64 {
        (op * &self.entries).trace()
    }
}

pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for k in j..n {
            worst = worst.max((m[(j, k)] - m[(k, j)].conj()).norm());
        }
    }
    worst
}

pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let herm = (m + m.adjoint()) * Complex64::from(0.5);
    SymmetricEigen::new(herm).eigenvalues.min()
}

fn tail_mass(m: &CMatrix) -> f64 {
    let n = m.nrows();
    m[(n - 1, n - 1)].re + m[(n - 2, n - 2)].re
}

fn moments(m: &CMatrix, omega0: f64) -> MeanState {
    let n = m.nrows();
    let mut number = 0.0;
    let mut a = Complex64::default();
    for k in 0..n {
        number += k as f64 * m[(k, k)].re;
        if k + 1 < n {
            a += m[(k + 1, k)] * ((k + 1) as f64).sqrt();
        }
    }
    MeanState {
        energy: omega0 * number,
        q: 2.0 * a.re / (2.0 * omega0).sqrt(),
        p: (2.0 * omega0).sqrt() * a.im,
    }
}

/// `D(beta) rho_th D(beta)^+` with `beta = sqrt(omega0/2) q0 + i p0 / sqrt(2 omega0)`
/// and thermal occupation `e0/omega0 - |beta|^2`, so that `<Q> = q0`,
/// `<P> = p0`, `omega0 <a^+a> = e0`.
pub fn displaced_thermal_state(
    dim: usize,
    q0: f64,
    p0: f64,
    e0: f64,
    omega0: f64,
) -> Result<DensityMatrix> {
    if dim < 2 {
        return Err(Error::Dimension(format!(
            "Fock dimension must be >= 2, got {dim}"
        )));
    }
    if !(omega0 > 0.0) || ![q0, p0, e0].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput(
            "state parameters must be finite, omega0 > 0".into(),
        ));
    }
    let beta = Complex64::new((omega0 / 2.0).sqrt() * q0, p0 / (2.0 * omega0).sqrt());
    let coherent = omega0 * beta.norm_sqr();
    let mut n_th = e0 / omega0 - beta.norm_sqr();
    if n_th < -1e-12 * (1.0 + e0 / omega0) {
        return Err(Error::Infeasible(format!(
            "E(0) = {e0} is below the coherent energy {coherent} of <Q> = {q0}, <P> = {p0}"
        )));
    }
    n_th = n_th.max(0.0);

    let big = dim + PREP_PADDING;
    let ratio = n_th / (n_th + 1.0);
    let mut thermal = CMatrix::zeros(big, big);
    let mut pk = 1.0 / (n_th + 1.0);
    for k in 0..big {
        thermal[(k, k)] = Complex64::from(pk);
        pk *= ratio;
    }
    let rho_big = if beta.norm_sqr() > 0.0 {
        let ops = build_operators(big, omega0)?;
        let generator = &ops.create * beta - &ops.annihilate * beta.conj();
        let d = generator.exp();
        &d * thermal * d.adjoint()
    } else {
        thermal
    };
    let mut block = rho_big.view((0, 0), (dim, dim)).into_owned();
    let kept = trace_re(&block);
    if 1.0 - kept > PREP_TAIL_TOL {
        return Err(Error::Truncation(format!(
            "population {:e} lies above level {}; increase the Fock dimension",
            1.0 - kept,
            dim - 1
        )));
    }
    block /= Complex64::from(kept);
    let block = (&block + block.adjoint()) * Complex64::from(0.5);
    DensityMatrix::new(block)
}

/// Master-equation generator, computed entrywise from the ladder structure.
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    ctrl: &ControlInput,
    ops: &FockOperators,
    params: &OscillatorParams,
) -> Result<CMatrix> {
    if !(ctrl.n >= 0.0) {
        return Err(Error::UnphysicalBath(ctrl.n));
    }
    if !ctrl.u.is_finite() {
        return Err(Error::InvalidInput(
            "coherent control must be finite".into(),
        ));
    }
    if rho.dim() != ops.dim {
        return Err(Error::Dimension(format!(
            "rho has dimension {}, operators {}",
            rho.dim(),
            ops.dim
        )));
    }
    let mut out = CMatrix::zeros(ops.dim, ops.dim);
    generator_into(&rho.entries, ctrl.u, ctrl.n, params, &mut out);
    Ok(out)
}

/// Same generator assembled from the dense operator matrices. Slower; kept as
/// an independent cross-check of [`lindblad_rhs`].
pub fn lindblad_rhs_dense(
    rho: &DensityMatrix,
    ctrl: &ControlInput,
    ops: &FockOperators,
    params: &OscillatorParams,
) -> Result<CMatrix> {
    if !(ctrl.n >= 0.0) {
        return Err(Error::UnphysicalBath(ctrl.n));
    }
    let r = &rho.entries;
    let a = &ops.annihilate;
    let ad = &ops.create;
    let h = &ops.h0 + &ops.position * Complex64::from(ctrl.u);
    let ada = ad * a;
    let aad = a * ad;
    let g = params.gamma;
    let comm = &h * r - r * &h;
    let down = (a * r * ad) * Complex64::from(2.0) - r * &ada - &ada * r;
    let up = (ad * r * a) * Complex64::from(2.0) - &aad * r - r * &aad;
    Ok(comm * (-I) + down * Complex64::from(g * (ctrl.n + 1.0)) + up * Complex64::from(g * ctrl.n))
}

fn generator_into(r: &CMatrix, u: f64, n: f64, params: &OscillatorParams, out: &mut CMatrix) {
    let dim = r.nrows();
    let omega0 = params.omega0;
    let down = params.gamma * (n + 1.0);
    let up = params.gamma * n;
    let c = 1.0 / (2.0 * omega0).sqrt();
    let s: Vec<f64> = (0..=dim).map(|k| (k as f64).sqrt()).collect();
    // Diagonal of the truncated a a^+.
    let aad: Vec<f64> = (0..dim)
        .map(|j| if j + 1 < dim { (j + 1) as f64 } else { 0.0 })
        .collect();
    // Column-major storage: entry (j, k) sits at k * dim + j.
    let src = r.as_slice();
    let dst = out.as_mut_slice();
    let zero = Complex64::default();
    for k in 0..dim {
        let col = k * dim;
        for j in 0..dim {
            let rho = src[col + j];
            let above = if j > 0 { src[col + j - 1] } else { zero };
            let below = if j + 1 < dim { src[col + j + 1] } else { zero };
            let left = if k > 0 { src[col - dim + j] } else { zero };
            let right = if k + 1 < dim {
                src[col + dim + j]
            } else {
                zero
            };
            let diag_next = if j + 1 < dim && k + 1 < dim {
                src[col + dim + j + 1]
            } else {
                zero
            };
            let diag_prev = if j > 0 && k > 0 {
                src[col - dim + j - 1]
            } else {
                zero
            };

            let q_rho = (above * s[j] + below * s[j + 1]) * c;
            let rho_q = (left * s[k] + right * s[k + 1]) * c;
            let comm = rho * (omega0 * (j as f64 - k as f64)) + (q_rho - rho_q) * u;
            let emit = diag_next * (2.0 * s[j + 1] * s[k + 1]) - rho * ((j + k) as f64);
            let absorb = diag_prev * (2.0 * s[j] * s[k]) - rho * (aad[j] + aad[k]);
            dst[col + j] = Complex64::new(comm.im, -comm.re) + emit * down + absorb * up;
        }
    }
}

/// Integrity statistics gathered over an oracle run.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct OracleIntegrity {
    pub max_trace_drift: f64,
    pub max_hermiticity_residual: f64,
    pub min_eigenvalue: f64,
    pub max_tail_mass: f64,
    /// Samples where the tail mass exceeded the warning limit.
    pub tail_warnings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub trajectory: Trajectory,
    pub integrity: OracleIntegrity,
    pub final_state: DensityMatrix,
}

/// Largest absolute differences in `(E, Q, P)` between two runs on the same grid.
pub fn max_discrepancy(a: &Trajectory, b: &Trajectory) -> Result<MeanState> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "trajectories differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut worst = MeanState::default();
    for (x, y) in a.states.iter().zip(&b.states) {
        worst.energy = worst.energy.max((x.energy - y.energy).abs());
        worst.q = worst.q.max((x.q - y.q).abs());
        worst.p = worst.p.max((x.p - y.p).abs());
    }
    Ok(worst)
}

/// Integrates the master equation from the displaced thermal state matching
/// `scenario.initial`, replaying the controls recorded in `controls_from`:
/// piecewise linear for continuous runs, held per step for sampled runs.
pub fn simulate_lindblad(scenario: &Scenario, controls_from: &Trajectory) -> Result<OracleRun> {
    scenario.validate()?;
    let dim = scenario
        .oracle_dim
        .ok_or_else(|| config_err("run.oracle_dim", "oracle run needs a Fock dimension"))?;
    let steps = scenario.n_steps();
    if controls_from.len() != steps + 1 {
        return Err(Error::InvalidInput(format!(
            "control record has {} samples, scenario needs {}",
            controls_from.len(),
            steps + 1
        )));
    }
    if let Some((i, c)) = controls_from
        .controls
        .iter()
        .enumerate()
        .find(|(_, c)| !(c.n >= 0.0))
    {
        return Err(Error::OracleIntegrity {
            t: controls_from.times[i],
            reason: format!("replayed control n = {} is negative (unphysical bath)", c.n),
        });
    }
    let params = scenario.params;
    let held = scenario.sample_interval.is_some();
    let init = scenario.initial;
    let rho0 = displaced_thermal_state(dim, init.q, init.p, init.energy, params.omega0)?;

    let h = scenario.h_int;
    let mut traj = Trajectory::with_capacity(steps + 1);
    let mut integrity = OracleIntegrity {
        min_eigenvalue: f64::INFINITY,
        ..Default::default()
    };
    let mut rho = rho0.into_entries();
    let mut scratch = CMatrix::zeros(dim, dim);
    for i in 0..=steps {
        let t = controls_from.times[i];
        check_integrity(&rho, t, i, i == steps, &mut integrity)?;
        let state = moments(&rho, params.omega0);
        let ctrl = controls_from.controls[i];
        let mem = ControllerMemory::new(ctrl.u, ctrl.n);
        traj.times.push(t);
        traj.states.push(state);
        traj.controls.push(ctrl);
        traj.monitors
            .push(integrator::monitor_for(scenario, &state, &mem, &ctrl));
        if i == steps {
            break;
        }
        let c0 = controls_from.controls[i];
        let c1 = if held {
            c0
        } else {
            controls_from.controls[i + 1]
        };
        let field = |tau: f64, y: &CMatrix| -> CMatrix {
            let s = ((tau - t) / h).clamp(0.0, 1.0);
            let u = c0.u + s * (c1.u - c0.u);
            let n = c0.n + s * (c1.n - c0.n);
            generator_into(y, u, n, &params, &mut scratch);
            scratch.clone()
        };
        rho = integrator::rk4_step(field, &rho, t, h)?;
    }
    Ok(OracleRun {
        trajectory: traj,
        integrity,
        final_state: DensityMatrix::from_unchecked(rho),
    })
}

fn check_integrity(
    rho: &CMatrix,
    t: f64,
    step: usize,
    last: bool,
    acc: &mut OracleIntegrity,
) -> Result<()> {
    let drift = (trace_re(rho) - 1.0).abs();
    acc.max_trace_drift = acc.max_trace_drift.max(drift);
    if drift > limits::TRACE_DRIFT {
        return Err(Error::OracleIntegrity {
            t,
            reason: format!("trace drifted by {drift:e}"),
        });
    }
    acc.max_hermiticity_residual = acc.max_hermiticity_residual.max(hermiticity_residual(rho));
    let tail = tail_mass(rho);
    acc.max_tail_mass = acc.max_tail_mass.max(tail);
    if tail > limits::TAIL_FAIL {
        return Err(Error::Truncation(format!(
            "top-level population {tail:e} at t = {t} exceeds {:e}",
            limits::TAIL_FAIL
        )));
    }
    if tail > limits::TAIL_WARN {
        acc.tail_warnings += 1;
    }
    if step.is_multiple_of(limits::EIGEN_STRIDE) || last {
        let lam = min_eigenvalue(rho);
        acc.min_eigenvalue = acc.min_eigenvalue.min(lam);
        if lam < -limits::NEGATIVITY {
            return Err(Error::OracleIntegrity {
                t,
                reason: format!(
                    "density matrix eigenvalue {lam:e} below -{:e}",
                    limits::NEGATIVITY
                ),
            });
        }
    }
    Ok(())
}
