use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mkdv_harness::experiments;
use mkdv_harness::spec::{ExperimentKind, ExperimentSpec};
use mkdv_harness::Timed;

/// Experiment driver for the mKdV solver. Exits 0 iff every check passes.
#[derive(Parser)]
#[command(name = "mkdv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Directory for report.json, timing.json and CSV artifacts; without it the
    /// report is printed to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random test functions and probes (overrides the spec file).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct KindArgs {
    /// JSON file with the experiment's parameters.
    params: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a spec file.
    Run {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Discrete identities on random compact mesh functions.
    Identities(KindArgs),
    /// h-uniformity of the discrete Sobolev constants.
    Sobolev(KindArgs),
    /// Exponent lattice and resonance tables against enumeration.
    Gamma(KindArgs),
    /// Coefficient trajectories against closed forms.
    Series(KindArgs),
    /// Far-field decay of the background defect.
    Background(KindArgs),
    /// A single solver run with monitors.
    Solve(KindArgs),
    /// Refinement study against the travelling wave.
    Converge(KindArgs),
    /// Perturbation test of the energy estimate.
    Uniqueness(KindArgs),
    /// Cardinal-series smoothing audits.
    Sinc(KindArgs),
    /// Background plus correction with amplitude tracking.
    Pipeline(KindArgs),
}

fn kind_spec(kind: ExperimentKind, a: KindArgs) -> Result<(ExperimentSpec, Common)> {
    let mut spec = ExperimentSpec::new(kind, 0);
    if let Some(p) = &a.params {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        spec.params = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
    }
    Ok((spec, a.common))
}

fn emit(t: &Timed, out: Option<&Path>) -> Result<()> {
    for c in &t.report.checks {
        eprintln!("{c}");
    }
    let secs = t.elapsed.as_secs_f64();
    eprintln!(
        "{}: {} ({} checks, {secs:.2} s)",
        t.report.experiment,
        if t.report.passed { "PASS" } else { "FAIL" },
        t.report.checks.len()
    );
    let json = t.report.to_json()?;
    match out {
        Some(d) => {
            std::fs::write(d.join("report.json"), json + "\n")?;
            let timing = serde_json::json!({ "experiment": t.report.experiment, "runtime_s": secs });
            std::fs::write(d.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    let (mut spec, common) = match cli.command {
        Command::Run { spec, common } => (ExperimentSpec::from_file(&spec)?, common),
        Command::Identities(a) => kind_spec(ExperimentKind::Identities, a)?,
        Command::Sobolev(a) => kind_spec(ExperimentKind::SobolevAudit, a)?,
        Command::Gamma(a) => kind_spec(ExperimentKind::Gamma, a)?,
        Command::Series(a) => kind_spec(ExperimentKind::Series, a)?,
        Command::Background(a) => kind_spec(ExperimentKind::Background, a)?,
        Command::Solve(a) => kind_spec(ExperimentKind::Solve, a)?,
        Command::Converge(a) => kind_spec(ExperimentKind::Converge, a)?,
        Command::Uniqueness(a) => kind_spec(ExperimentKind::Uniqueness, a)?,
        Command::Sinc(a) => kind_spec(ExperimentKind::SincAudit, a)?,
        Command::Pipeline(a) => kind_spec(ExperimentKind::Pipeline, a)?,
    };
    if let Some(s) = common.seed {
        spec.seed = s;
    }
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let out = common.out.or_else(|| spec.out.clone());
    let timed = experiments::run(&spec, out.as_deref())?;
    emit(&timed, out.as_deref())?;
    Ok(timed.report.passed)
}
