//! Machine-readable run summaries written as `report.json`.

use serde::{Deserialize, Serialize};

use oscctl_core::analysis::{LyapunovCheck, PositivityVerdict, RateFit};
use oscctl_core::{Law, MeanState, OracleIntegrity, Scenario};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParameters {
    pub omega0: f64,
    pub gamma: f64,
    pub law: Law,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma2_tilde: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub kappa: f64,
    pub gamma_fin: f64,
    pub dr_use_tilde: bool,
    pub e_star: f64,
    pub n_star: f64,
    pub q0: f64,
    pub p0: f64,
    pub u0: f64,
    pub n0: f64,
    pub t_final: f64,
    pub h_int: f64,
    pub sample_interval: Option<f64>,
    pub literal_paper_update: bool,
    pub clamp_negative_n: bool,
    pub oracle_dim: Option<usize>,
}

impl ResolvedParameters {
    pub fn from_scenario(s: &Scenario) -> Self {
        let c = &s.controller;
        let m0 = s.memory0();
        Self {
            omega0: s.params.omega0,
            gamma: s.params.gamma,
            law: c.law,
            gamma1: c.gains.gamma1,
            gamma2: c.gains.gamma2,
            gamma2_tilde: c.gains.gamma2_tilde(&s.params),
            alpha1: c.gains.alpha1,
            alpha2: c.gains.alpha2,
            kappa: c.gains.kappa,
            gamma_fin: c.gains.gamma_fin,
            dr_use_tilde: c.dr_use_tilde,
            e_star: c.target.e_star,
            n_star: c.target.n_star,
            q0: s.initial.q,
            p0: s.initial.p,
            u0: m0.u,
            n0: m0.n,
            t_final: s.t_final,
            h_int: s.h_int,
            sample_interval: s.sample_interval,
            literal_paper_update: s.literal_paper_update,
            clamp_negative_n: s.clamp_negative_n,
            oracle_dim: s.oracle_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub dim: usize,
    pub status: Status,
    pub error: Option<String>,
    pub max_discrepancy: Option<MeanState>,
    pub integrity: Option<OracleIntegrity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub index: usize,
    pub initial_energy: f64,
    pub status: Status,
    pub exit_code: i32,
    pub error: Option<String>,
    pub trajectory: Option<String>,
    pub samples: usize,
    pub terminal_time: Option<f64>,
    pub terminal_energy: Option<f64>,
    pub terminal_error: Option<f64>,
    pub min_n: Option<f64>,
    pub negative_n_samples: usize,
    pub positivity: Option<PositivityVerdict>,
    pub rate_fit: Option<RateFit>,
    pub oracle: Option<OracleReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    /// `gamma > 4 Gamma1 Gamma2` for the robustified law.
    pub stability_condition: Option<bool>,
    /// Lyapunov matrix of the unforced quadratures at `gamma0 = gamma / 2`.
    pub lyapunov_matrix: Option<[[f64; 2]; 2]>,
    pub lyapunov_check: Option<LyapunovCheck>,
    /// Limit energy of the incoherent finite law.
    pub finite_form_limit: Option<f64>,
    /// Convergence rate of the incoherent exponential law.
    pub exponential_rate: Option<f64>,
    pub positivity: Vec<PositivityVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub scenario: String,
    pub title: Option<String>,
    pub status: Status,
    pub exit_code: i32,
    pub assumptions: Vec<String>,
    pub parameters: ResolvedParameters,
    pub certificates: Certificates,
    pub members: Vec<MemberReport>,
    pub figure: Option<String>,
}
