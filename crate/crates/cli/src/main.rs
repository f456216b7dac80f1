//! `aqc`: command-line front end for the aqc-core experiments.
//!
//! Every run writes a deterministic `report.json` plus `metadata.json`
//! (timestamps, thread count, argv) and any TSV or field artifacts into
//! `--out`. Exit status: 0 on success, 2 when a check reports a violated
//! hypothesis, 1 on errors.

mod commands;
mod render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "aqc", version, about = "Experiments on constant-coefficient differential operators and A-quasiconvex energies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Seed for every sampled check.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory for report.json, metadata.json and artifacts.
    #[arg(long, global = true, default_value = "aqc-out")]
    pub out: PathBuf,

    /// Print the report as JSON instead of the text summary.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct OperatorArgs {
    /// Builtin operator, e.g. `symmetric_gradient`, `curl:3`, `gradient:2:2`.
    #[arg(long)]
    pub builtin: Option<String>,

    /// Operator definition file (JSON).
    #[arg(long)]
    pub operator: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Ellipticity, constant rank and gradient-form reduction of an operator.
    CheckOperator {
        #[command(flatten)]
        op: OperatorArgs,
        /// Number of sample frequencies on the unit sphere.
        #[arg(long)]
        samples: Option<usize>,
        /// Builtin annihilator for an exactness check of the sequence.
        #[arg(long)]
        annihilator: Option<String>,
    },
    /// Modular Korn ratios over random mean-zero periodic fields.
    Korn {
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long, default_value = "power:2")]
        psi: String,
        /// Points per axis.
        #[arg(long, default_value_t = 32)]
        grid: usize,
        #[arg(long, default_value_t = 100)]
        fields: usize,
        /// Frequency cutoff of the random fields (default: grid/4 - 1).
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// Plane-wave sequence violating the modular Korn inequality.
    Counterexample {
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long, default_value = "power:2")]
        psi: String,
        #[arg(long, default_value_t = 6)]
        imax: usize,
        /// Also sample the last field of the sequence on this many points per axis.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Sampled structural hypotheses and strong quasiconvexity of an integrand.
    Quasiconvexity {
        #[command(flatten)]
        op: OperatorArgs,
        /// `vp:P`, `nonautonomous:P:SIGMA`, `concave_quadratic`, `det_plus_vp:MU[:P]` or `bounded`.
        #[arg(long, default_value = "vp:2")]
        integrand: String,
        #[arg(long, default_value_t = 16)]
        grid: usize,
        #[arg(long, default_value_t = 20)]
        fields: usize,
        /// Sample budget for the hypothesis checks.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Minimize the energy described by a problem file.
    Minimize {
        /// Problem definition (JSON).
        #[arg(long)]
        problem: PathBuf,
        /// Number of random perturbations for the local minimality check.
        #[arg(long, default_value_t = 20)]
        fields: usize,
        /// Sample budget for the hypothesis checks.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Print the text summary of an existing report.json.
    Render {
        report: PathBuf,
    },
}

impl OperatorArgs {
    pub fn load(&self) -> Result<aqc_core::Operator> {
        match (&self.builtin, &self.operator) {
            (Some(name), _) => Ok(aqc_core::operators::builtin(name)?),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                aqc_core::Operator::from_json(&text).with_context(|| format!("parsing {}", path.display()))
            }
            (None, None) => bail!("one of --builtin or --operator is required"),
        }
    }

    pub fn source(&self) -> serde_json::Value {
        match (&self.builtin, &self.operator) {
            (Some(name), _) => json!({ "builtin": name }),
            (_, Some(path)) => json!({ "file": path.display().to_string() }),
            _ => serde_json::Value::Null,
        }
    }
}

/// What a command produced: the report, whether a hypothesis was violated,
/// and extra files to write next to the report.
pub struct Outcome {
    pub report: serde_json::Value,
    pub violation: bool,
    pub artifacts: Vec<(String, Vec<u8>)>,
}

fn configure_threads() -> Result<usize> {
    if let Ok(v) = std::env::var("AQC_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("AQC_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            bail!("AQC_THREADS must be a positive integer, got `{v}`");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(rayon::current_num_threads())
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn write_outputs(out: &Path, outcome: &Outcome, metadata: &serde_json::Value) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut report = serde_json::to_string_pretty(&outcome.report)?;
    report.push('\n');
    std::fs::write(out.join("report.json"), report)?;
    for (name, bytes) in &outcome.artifacts {
        std::fs::write(out.join(name), bytes).with_context(|| format!("writing {name}"))?;
    }
    let mut meta = serde_json::to_string_pretty(metadata)?;
    meta.push('\n');
    std::fs::write(out.join("metadata.json"), meta)?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Command::Render { report } = &cli.command {
        let text = std::fs::read_to_string(report).with_context(|| format!("reading {}", report.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", report.display()))?;
        print!("{}", render::render(&value)?);
        return Ok(ExitCode::SUCCESS);
    }

    let threads = configure_threads()?;
    let started = unix_now();
    let clock = Instant::now();
    let outcome = commands::execute(&cli)?;
    let metadata = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "argv": std::env::args().collect::<Vec<_>>(),
        "threads": threads,
        "started_unix": started,
        "finished_unix": unix_now(),
        "elapsed_seconds": clock.elapsed().as_secs_f64(),
    });
    write_outputs(&cli.out, &outcome, &metadata)?;

    if cli.json {
        println!("{}", serde_json::to_string_pretty(&outcome.report)?);
    } else {
        print!("{}", render::render(&outcome.report)?);
    }
    Ok(if outcome.violation { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
