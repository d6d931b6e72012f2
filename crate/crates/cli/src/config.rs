//! Scenario files: one TOML document per scenario, with `--set` overrides.

use serde::{Deserialize, Serialize};

use oscctl_core::{
    ControllerConfig, ControllerMemory, Law, MeanState, OscillatorParams, Scenario, SgaGains,
    Target,
};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub params: ParamsSection,
    pub initial: InitialSection,
    pub controller: ControllerSection,
    pub target: TargetSection,
    pub run: RunSection,
    pub meta: MetaSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub omega0: f64,
    pub gamma: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self {
            omega0: 1.0,
            gamma: 1.0,
        }
    }
}

/// A single initial energy or a batch of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Energies {
    One(f64),
    Many(Vec<f64>),
}

impl Energies {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Energies::One(e) => vec![*e],
            Energies::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub energy: Option<Energies>,
    pub q: f64,
    pub p: f64,
    /// Initial controller memory; defaults to `(u*, n*)`.
    pub u: Option<f64>,
    pub n: Option<f64>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            energy: None,
            q: 1.0,
            p: 0.0,
            u: None,
            n: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub law: Law,
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub kappa: f64,
    pub gamma_fin: f64,
    pub dr_use_tilde: bool,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let g = SgaGains::default();
        Self {
            law: Law::SgaD,
            gamma1: g.gamma1,
            gamma2: g.gamma2,
            alpha1: g.alpha1,
            alpha2: g.alpha2,
            kappa: g.kappa,
            gamma_fin: g.gamma_fin,
            dr_use_tilde: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    pub energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub t_final: f64,
    pub h_int: f64,
    pub sample_interval: Option<f64>,
    pub literal_paper_update: bool,
    pub clamp_negative_n: bool,
    pub oracle_dim: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t_final: oscctl_core::integrator::DEFAULT_T_FINAL,
            h_int: oscctl_core::integrator::DEFAULT_H_INT,
            sample_interval: None,
            literal_paper_update: false,
            clamp_negative_n: false,
            oracle_dim: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaSection {
    pub title: Option<String>,
    pub notes: Vec<String>,
}

/// A `section.key = value` edit applied on top of a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: toml::Value,
}

impl Override {
    /// Parses `key=value`; the value is read as a TOML literal and falls
    /// back to a bare string.
    pub fn parse(spec: &str) -> Result<Self> {
        let (key, raw) = spec
            .split_once('=')
            .ok_or_else(|| CliError::validation(spec, "override must have the form key=value"))?;
        let key = key.trim();
        let path: Vec<String> = key.split('.').map(|s| s.trim().to_string()).collect();
        if path.iter().any(String::is_empty) {
            return Err(CliError::validation(key, "empty path segment"));
        }
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        Ok(Self { path, value })
    }

    pub fn new(key: &str, value: toml::Value) -> Self {
        Self {
            path: key.split('.').map(str::to_string).collect(),
            value,
        }
    }

    pub fn key(&self) -> String {
        self.path.join(".")
    }

    fn apply(&self, root: &mut toml::Table) -> Result<()> {
        let (last, parents) = self.path.split_last().expect("non-empty path");
        let mut table = root;
        for seg in parents {
            let entry = table
                .entry(seg.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry.as_table_mut().ok_or_else(|| {
                CliError::validation(self.key(), format!("`{seg}` is not a table"))
            })?;
        }
        table.insert(last.clone(), self.value.clone());
        Ok(())
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map_or(before.len(), |i| before.len() - i - 1)
        + 1;
    (line, column)
}

fn parse_error(text: &str, origin: &str, err: toml::de::Error) -> CliError {
    let (line, column) = err.span().map_or((1, 1), |s| line_column(text, s.start));
    CliError::Parse {
        origin: origin.to_string(),
        line,
        column,
        message: err.message().trim().to_string(),
    }
}

/// Parses a scenario document and applies overrides in order.
pub fn parse_config(text: &str, origin: &str, overrides: &[Override]) -> Result<ScenarioFile> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| parse_error(text, origin, e))?;
    if overrides.is_empty() {
        return Ok(file);
    }
    let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, origin, e))?;
    for o in overrides {
        o.apply(&mut table)?;
    }
    let keys: Vec<String> = overrides.iter().map(Override::key).collect();
    table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::validation(keys.join(", "), e.message().trim()))
}

impl ScenarioFile {
    pub fn initial_energies(&self) -> Result<Vec<f64>> {
        let energies = self
            .initial
            .energy
            .as_ref()
            .ok_or_else(|| CliError::validation("initial.energy", "is required"))?
            .to_vec();
        if energies.is_empty() {
            return Err(CliError::validation("initial.energy", "list is empty"));
        }
        Ok(energies)
    }

    pub fn params(&self) -> Result<OscillatorParams> {
        Ok(OscillatorParams::new(
            self.params.omega0,
            self.params.gamma,
        )?)
    }

    pub fn controller(&self) -> Result<ControllerConfig> {
        let params = self.params()?;
        let e_star = self
            .target
            .energy
            .ok_or_else(|| CliError::validation("target.energy", "is required"))?;
        let c = &self.controller;
        let cfg = ControllerConfig {
            law: c.law,
            gains: SgaGains {
                gamma1: c.gamma1,
                gamma2: c.gamma2,
                alpha1: c.alpha1,
                alpha2: c.alpha2,
                kappa: c.kappa,
                gamma_fin: c.gamma_fin,
            },
            target: Target::new(e_star, &params)?,
            dr_use_tilde: c.dr_use_tilde,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// One validated scenario per initial energy.
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        let energies = self.initial_energies()?;
        let params = self.params()?;
        let controller = self.controller()?;
        let memory = match (self.initial.u, self.initial.n) {
            (None, None) => None,
            (u, n) => {
                let eq = ControllerMemory::at_equilibrium(&controller.target);
                Some(ControllerMemory::new(u.unwrap_or(eq.u), n.unwrap_or(eq.n)))
            }
        };
        energies
            .into_iter()
            .map(|e0| {
                let mut s = Scenario::new(
                    params,
                    MeanState::new(e0, self.initial.q, self.initial.p),
                    controller,
                );
                s.initial_memory = memory;
                s.t_final = self.run.t_final;
                s.h_int = self.run.h_int;
                s.sample_interval = self.run.sample_interval;
                s.literal_paper_update = self.run.literal_paper_update;
                s.clamp_negative_n = self.run.clamp_negative_n;
                s.oracle_dim = self.run.oracle_dim;
                s.validate()?;
                Ok(s)
            })
            .collect()
    }
}
