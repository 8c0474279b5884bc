use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use slowfast::experiments::{self, Outputs, SweepVariable};
use slowfast::models::{self, Params};
use slowfast::{Error, Result};

#[derive(Parser)]
#[command(name = "slowfast", version, about = "Slow-manifold trajectories and transients for slow-fast ODEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV tables and summary.json.
    Run(RunArgs),
    /// List experiments and models.
    List,
    /// Check a model's analytic Jacobians against finite differences.
    Validate {
        model: String,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        probes: usize,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    experiment: String,
    /// One value, or the sweep when the experiment sweeps eps.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    eps: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    r: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    dtau: Vec<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Flat JSON map of model parameter overrides.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_trajectories: bool,
}

fn read_params(path: &Option<PathBuf>) -> Result<Params> {
    match path {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => Ok(Params::new()),
    }
}

/// Values for `variable`: they replace the sweep when the experiment sweeps it,
/// otherwise exactly one value sets the scalar.
fn apply(spec: &mut experiments::ExperimentSpec, variable: SweepVariable, values: &[f64], flag: &str) -> Result<()> {
    if values.is_empty() {
        return Ok(());
    }
    if let Some(sw) = spec.sweep.as_mut().filter(|s| s.variable == variable) {
        sw.values = values.to_vec();
        return Ok(());
    }
    let [v] = values else {
        return Err(Error::BadParams(format!("--{flag} takes one value for this experiment")));
    };
    match variable {
        SweepVariable::Eps => spec.eps = *v,
        SweepVariable::R => spec.r = *v,
        SweepVariable::Dtau => spec.dtau = *v,
        SweepVariable::H => spec.h = Some(*v),
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<bool> {
    let mut spec = experiments::default_spec(&args.experiment)?;
    spec.params = read_params(&args.params)?;
    if let Some(e) = spec.params.get("eps").copied() {
        spec.eps = e;
    }
    apply(&mut spec, SweepVariable::Eps, &args.eps, "eps")?;
    apply(&mut spec, SweepVariable::R, &args.r, "r")?;
    apply(&mut spec, SweepVariable::Dtau, &args.dtau, "dtau")?;
    if let Some(h) = args.h {
        apply(&mut spec, SweepVariable::H, &[h], "h")?;
    }
    spec.seed = args.seed;
    spec.outputs = Outputs { trajectories: !args.no_trajectories, ..Outputs::default() };
    // bad input is a usage error (exit 1); exit 2 is reserved for numerical failures
    spec.validate()?;

    let outcome = experiments::run(&spec, args.jobs);
    let paths = experiments::write_outcome(&args.out, &outcome)?;
    for p in &paths {
        println!("{}", p.display());
    }
    if let Some(err) = &outcome.report.error {
        eprintln!("{} failed: {err}", spec.experiment);
    }
    Ok(outcome.succeeded())
}

fn list() {
    println!("experiments:");
    for e in experiments::registry() {
        println!("  {:<16} {:<22} {}", e.name, e.model, e.description);
    }
    println!("models:");
    for m in models::catalog() {
        println!("  {:<22} {}", m.name, m.description);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::List => {
            list();
            Ok(true)
        }
        Command::Validate { model, params, seed, probes } => read_params(&params)
            .and_then(|p| experiments::validate_model(&model, &p, seed, probes, 1e-6))
            .and_then(|v| {
                println!("{}", serde_json::to_string_pretty(&v)?);
                Ok(v.passed)
            }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
