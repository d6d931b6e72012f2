//! Loading, running and reporting scenarios.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use oscctl_core::analysis::{self, exponential_rate_fit};
use oscctl_core::lindblad::max_discrepancy;
use oscctl_core::{simulate, simulate_lindblad, Law, Scenario, Trajectory};

use crate::config::{parse_config, Override, ScenarioFile};
use crate::error::{core_exit_code, CliError, Result};
use crate::report::{
    Certificates, MemberReport, OracleReport, ResolvedParameters, RunReport, Status, SCHEMA_VERSION,
};
use crate::svg::{self, FigureStyle};
use crate::{csv, registry};

/// Tail share of the horizon used for exponential-rate fits.
const RATE_FIT_TAIL: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct Loaded {
    pub id: String,
    pub file: ScenarioFile,
    pub scenarios: Vec<Scenario>,
}

/// Resolves a registry id or a path to a scenario file.
pub fn load(spec: &str, overrides: &[Override]) -> Result<Loaded> {
    let (id, text, origin) = match registry::source(spec) {
        Some(text) => (spec.to_string(), text.to_string(), format!("{spec}.toml")),
        None => {
            let path = Path::new(spec);
            if !path.exists() {
                return Err(CliError::UnknownScenario(spec.to_string()));
            }
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let id = path
                .file_stem()
                .map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
            (id, text, spec.to_string())
        }
    };
    let file = parse_config(&text, &origin, overrides)?;
    let scenarios = file.scenarios()?;
    Ok(Loaded {
        id,
        file,
        scenarios,
    })
}

pub struct MemberRun {
    pub report: MemberReport,
    pub trajectory: Option<Trajectory>,
}

fn failed(index: usize, s: &Scenario, err: &oscctl_core::Error) -> MemberReport {
    MemberReport {
        index,
        initial_energy: s.initial.energy,
        status: Status::Failed,
        exit_code: core_exit_code(err),
        error: Some(err.to_string()),
        trajectory: None,
        samples: 0,
        terminal_time: None,
        terminal_energy: None,
        terminal_error: None,
        min_n: None,
        negative_n_samples: 0,
        positivity: None,
        rate_fit: None,
        oracle: None,
    }
}

fn positivity(s: &Scenario) -> Option<analysis::PositivityVerdict> {
    (s.controller.law == Law::SgaD)
        .then(|| {
            analysis::positivity_verdict(
                s.initial.energy,
                s.controller.target.e_star,
                s.params.omega0,
                s.controller.gains.gamma2,
            )
            .ok()
        })
        .flatten()
}

fn rate_fit(s: &Scenario, traj: &Trajectory) -> Option<analysis::RateFit> {
    if s.controller.law != Law::SgaDr {
        return None;
    }
    let t = &s.controller.target;
    exponential_rate_fit(
        traj,
        &[t.e_star, 0.0, 0.0, t.u_star, t.n_star],
        RATE_FIT_TAIL,
    )
    .ok()
}

fn oracle(s: &Scenario, traj: &Trajectory) -> Option<(OracleReport, i32)> {
    let dim = s.oracle_dim?;
    let outcome = simulate_lindblad(s, traj).and_then(|run| {
        let d = max_discrepancy(traj, &run.trajectory)?;
        Ok((d, run.integrity))
    });
    Some(match outcome {
        Ok((d, integrity)) => (
            OracleReport {
                dim,
                status: Status::Ok,
                error: None,
                max_discrepancy: Some(d),
                integrity: Some(integrity),
            },
            0,
        ),
        Err(e) => (
            OracleReport {
                dim,
                status: Status::Failed,
                error: Some(e.to_string()),
                max_discrepancy: None,
                integrity: None,
            },
            core_exit_code(&e),
        ),
    })
}

/// Simulates one member and summarises it; errors are folded into the report.
pub fn run_member(index: usize, s: &Scenario) -> MemberRun {
    let traj = match simulate(s) {
        Ok(t) => t,
        Err(e) => {
            return MemberRun {
                report: failed(index, s, &e),
                trajectory: None,
            }
        }
    };
    let last = traj.states.last().copied();
    let (oracle, code) = match oracle(s, &traj) {
        Some((r, c)) => (Some(r), c),
        None => (None, 0),
    };
    let report = MemberReport {
        index,
        initial_energy: s.initial.energy,
        status: if code == 0 {
            Status::Ok
        } else {
            Status::Failed
        },
        exit_code: code,
        error: oracle.as_ref().and_then(|o| o.error.clone()),
        trajectory: None,
        samples: traj.len(),
        terminal_time: traj.times.last().copied(),
        terminal_energy: last.map(|st| st.energy),
        terminal_error: last.map(|st| (st.energy - s.controller.target.e_star).abs()),
        min_n: Some(traj.min_n()),
        negative_n_samples: traj.negative_n_samples,
        positivity: positivity(s),
        rate_fit: rate_fit(s, &traj),
        oracle,
    };
    MemberRun {
        report,
        trajectory: Some(traj),
    }
}

pub fn certificates(scenarios: &[Scenario]) -> Certificates {
    let s = &scenarios[0];
    let (p, c) = (&s.params, &s.controller);
    let r = analysis::lyapunov_matrix(p, 0.5 * p.gamma).ok();
    Certificates {
        stability_condition: (c.law == Law::SgaDr)
            .then(|| analysis::stability_condition_dr(p.gamma, c.gains.gamma1, c.gains.gamma2)),
        lyapunov_matrix: r.map(|r| [[r[(0, 0)], r[(0, 1)]], [r[(1, 0)], r[(1, 1)]]]),
        lyapunov_check: r.map(|r| analysis::verify_lyapunov_matrix(&r, p, 0.5 * p.gamma)),
        finite_form_limit: (c.law == Law::IncoherentFinite)
            .then(|| analysis::finite_form_limit(c.target.e_star, c.gains.gamma_fin, p)),
        exponential_rate: (c.law == Law::IncoherentExponential)
            .then_some(2.0 * p.gamma * c.gains.kappa),
        positivity: scenarios.iter().filter_map(positivity).collect(),
    }
}

pub fn trajectory_file_name(members: usize, index: usize) -> String {
    if members == 1 {
        "trajectory.csv".into()
    } else {
        format!("trajectory_{index}.csv")
    }
}

fn write(path: PathBuf, contents: &str) -> Result<()> {
    fs::write(&path, contents).map_err(|e| CliError::io(path, e))
}

/// Runs every member in parallel, writes CSV/SVG/JSON into `out_dir` when
/// given, and returns the report alongside the trajectories.
pub fn run_loaded(loaded: &Loaded, out_dir: Option<&Path>) -> Result<(RunReport, Vec<MemberRun>)> {
    let mut runs: Vec<MemberRun> = loaded
        .scenarios
        .par_iter()
        .enumerate()
        .map(|(i, s)| run_member(i, s))
        .collect();
    let n = runs.len();

    let mut figure = None;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for run in &mut runs {
            if let Some(traj) = &run.trajectory {
                let name = trajectory_file_name(n, run.report.index);
                write(dir.join(&name), &csv::to_string(traj))?;
                run.report.trajectory = Some(name);
            }
        }
        let trajs: Vec<&Trajectory> = runs.iter().filter_map(|r| r.trajectory.as_ref()).collect();
        if !trajs.is_empty() {
            let style = FigureStyle {
                title: loaded
                    .file
                    .meta
                    .title
                    .clone()
                    .unwrap_or_else(|| loaded.id.clone()),
                ..FigureStyle::default()
            };
            write(dir.join("figure.svg"), &svg::render(&trajs, &style)?)?;
            figure = Some("figure.svg".to_string());
        }
    }

    let exit_code = runs.iter().map(|r| r.report.exit_code).max().unwrap_or(0);
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        scenario: loaded.id.clone(),
        title: loaded.file.meta.title.clone(),
        status: if exit_code == 0 {
            Status::Ok
        } else {
            Status::Failed
        },
        exit_code,
        assumptions: loaded.file.meta.notes.clone(),
        parameters: ResolvedParameters::from_scenario(&loaded.scenarios[0]),
        certificates: certificates(&loaded.scenarios),
        members: runs.iter().map(|r| r.report.clone()).collect(),
        figure,
    };
    if let Some(dir) = out_dir {
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Output(format!("serialising report: {e}")))?;
        write(dir.join("report.json"), &(json + "\n"))?;
    }
    Ok((report, runs))
}
