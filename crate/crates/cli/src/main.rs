use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use oscctl_cli::report::Status;
use oscctl_cli::{config, load, registry, run, CliError, Override, Result};

#[derive(Parser)]
#[command(
    name = "oscctl",
    version,
    about = "Energy control of a damped quantum oscillator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trajectory CSV, figure SVG and report JSON.
    Simulate {
        /// Registry id or path to a scenario TOML file.
        scenario: String,
        /// Output directory (default: out/<scenario>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cross-check against the master equation with this Fock dimension.
        #[arg(long, value_name = "N")]
        oracle: Option<usize>,
        /// Zero-order-hold sampling interval for the robustified law.
        #[arg(long, value_name = "H")]
        sample_interval: Option<f64>,
        /// Override a configuration key, e.g. controller.gamma2=30.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// List built-in scenarios.
    ListScenarios,
    /// Evaluate stability and positivity certificates without simulating.
    Verify {
        scenario: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn overrides(set: &[String]) -> Result<Vec<Override>> {
    set.iter().map(|s| Override::parse(s)).collect()
}

fn simulate(
    scenario: &str,
    out: Option<PathBuf>,
    oracle: Option<usize>,
    sample_interval: Option<f64>,
    set: &[String],
) -> Result<i32> {
    let mut ov = overrides(set)?;
    if let Some(n) = oracle {
        ov.push(Override::new(
            "run.oracle_dim",
            toml::Value::Integer(n as i64),
        ));
    }
    if let Some(h) = sample_interval {
        ov.push(Override::new("run.sample_interval", toml::Value::Float(h)));
    }
    let loaded = load(scenario, &ov)?;
    let dir = out.unwrap_or_else(|| PathBuf::from("out").join(&loaded.id));
    let (report, _) = run::run_loaded(&loaded, Some(&dir))?;
    for m in &report.members {
        match m.status {
            Status::Ok => println!(
                "{}[{}] E(0)={} E({})={:.6} |E-E*|={:.3e} min n={:.4}",
                report.scenario,
                m.index,
                m.initial_energy,
                m.terminal_time.unwrap_or(f64::NAN),
                m.terminal_energy.unwrap_or(f64::NAN),
                m.terminal_error.unwrap_or(f64::NAN),
                m.min_n.unwrap_or(f64::NAN),
            ),
            Status::Failed => eprintln!(
                "{}[{}] failed: {}",
                report.scenario,
                m.index,
                m.error.as_deref().unwrap_or("unknown error")
            ),
        }
    }
    println!("wrote {}", dir.display());
    Ok(report.exit_code)
}

fn verify(scenario: &str, set: &[String]) -> Result<i32> {
    let loaded = load(scenario, &overrides(set)?)?;
    let certs = run::certificates(&loaded.scenarios);
    let json = serde_json::to_string_pretty(&certs)
        .map_err(|e| CliError::Output(format!("serialising certificates: {e}")))?;
    println!("{json}");
    Ok(0)
}

fn list() -> Result<i32> {
    for id in registry::ids() {
        let title = registry::source(id)
            .and_then(|text| config::parse_config(text, id, &[]).ok())
            .and_then(|f| f.meta.title)
            .unwrap_or_default();
        println!("{id:<20} {title}");
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate {
            scenario,
            out,
            oracle,
            sample_interval,
            set,
        } => simulate(&scenario, out, oracle, sample_interval, &set),
        Command::ListScenarios => list(),
        Command::Verify { scenario, set } => verify(&scenario, &set),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
