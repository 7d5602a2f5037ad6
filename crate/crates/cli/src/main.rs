use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fluctsel_cli::{parse_config, run_spec, verify, ExperimentSpec};

#[derive(Parser)]
#[command(name = "fluctsel", version, about = "Simulators for allele frequencies under fluctuating selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Simulate {
        config: PathBuf,
        /// Output directory (default: the config's `out`, else `runs/<config name>`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the experiment and the checks relevant to its kind.
    Verify {
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(path: &std::path::Path, seed: Option<u64>) -> Result<ExperimentSpec, ExitCode> {
    match parse_config(path) {
        Ok(spec) => Ok(match seed {
            Some(s) => spec.with_seed(s),
            None => spec,
        }),
        Err(errors) => {
            eprintln!("{} has {} problem(s):", path.display(), errors.0.len());
            for e in &errors.0 {
                eprintln!("  {e}");
            }
            Err(ExitCode::from(2))
        }
    }
}

fn workers(flag: Option<usize>, spec: &ExperimentSpec) -> Result<Option<usize>, ExitCode> {
    match flag.or(spec.workers) {
        Some(0) => {
            eprintln!("--workers must be at least 1");
            Err(ExitCode::from(2))
        }
        w => Ok(w),
    }
}

fn simulate(config: PathBuf, out: Option<PathBuf>, workers_flag: Option<usize>, seed: Option<u64>) -> ExitCode {
    let spec = match load(&config, seed) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let workers = match workers(workers_flag, &spec) {
        Ok(w) => w,
        Err(code) => return code,
    };
    let out = out.or_else(|| spec.out.clone()).unwrap_or_else(|| {
        let stem = config.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
        PathBuf::from("runs").join(stem)
    });
    let report = match run_spec(&spec, &out, workers) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    for child in &report.children {
        let name = if child.name.is_empty() { spec.kind.name() } else { &child.name };
        println!("{name}: {}", child.summary);
        for c in child.checks.iter().filter(|c| c.invariant && !c.pass) {
            println!("  invariant violated: {} ({})", c.name, c.detail);
        }
    }
    println!("{} files listed in {}", report.manifest.len(), out.join("manifest.txt").display());
    if report.invariants_hold() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn run_verify(config: PathBuf, workers_flag: Option<usize>, seed: Option<u64>) -> ExitCode {
    let spec = match load(&config, seed) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let workers = match workers(workers_flag, &spec) {
        Ok(w) => w,
        Err(code) => return code,
    };
    let checks = match verify(&spec, workers) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    for c in &checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{tag} {}", c.name);
        } else {
            println!("{tag} {}: {}", c.name, c.detail);
        }
    }
    if checks.iter().all(|c| c.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Simulate {
            config,
            out,
            workers,
            seed,
        } => simulate(config, out, workers, seed),
        Command::Verify { config, workers, seed } => run_verify(config, workers, seed),
    }
}
