//! Energy control of a damped quantum harmonic oscillator with a coherent
//! field `u(t)` and an engineered bath occupation `n(t)`.
//!
//! * [`model`]: mean-field `(E, Q, P)` plant and goal function.
//! * [`controllers`]: speed-gradient laws (differential, finite, incoherent-only,
//!   robustified).
//! * [`integrator`]: RK4 closed-loop simulation, continuous and sampled-data.
//! * [`analysis`]: Lyapunov monitors, positivity and stability certificates,
//!   rate fitting.
//! * [`lindblad`]: truncated-Fock master-equation oracle.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod controllers;
pub mod error;
pub mod integrator;
pub mod lindblad;
pub mod model;

pub use analysis::{PositivityMode, PositivityVerdict, RateFit};
pub use controllers::{ControllerConfig, ControllerMemory, Law, SgaGains};
pub use error::{Error, Result};
pub use integrator::{
    simulate, simulate_continuous, simulate_sampled, Monitor, Scenario, Trajectory,
};
pub use lindblad::{simulate_lindblad, DensityMatrix, FockOperators, OracleIntegrity, OracleRun};
pub use model::{ControlInput, MeanState, OscillatorParams, Target};
