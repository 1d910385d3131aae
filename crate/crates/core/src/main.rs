use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fracblow::harness::{
    exponent_query, simulation_summary, snapshots_csv, sweep_csv, sweep_p, system_exponent_query,
    system_sweep, system_sweep_csv, trace_csv, verify_all, ExperimentSpec, VerifyOptions,
};
use fracblow::solver::run;
use fracblow::Error;

/// Exit statuses of the tool.
mod exit {
    pub const VERIFY_FAILED: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const VALIDATION: u8 = 3;
    pub const SOLVER: u8 = 4;
    pub const IO: u8 = 5;
}

#[derive(Parser, Debug)]
#[command(
    name = "fracblow",
    version,
    about = "Fractional damped-wave blow-up laboratory"
)]
struct Cli {
    /// TOML config with [params], [system], [simulation], [sweep], [verify] tables.
    #[arg(long, global = true, env = "FRACBLOW_CONFIG")]
    config: Option<PathBuf>,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true, env = "FRACBLOW_OUT")]
    out: Option<PathBuf>,
    /// Tolerance replacing every verification tolerance.
    #[arg(long, global = true, env = "FRACBLOW_TOL")]
    tol: Option<f64>,
    /// Worker threads for sweeps (default: number of processors).
    #[arg(long, global = true, env = "FRACBLOW_JOBS")]
    jobs: Option<usize>,
    /// Seed for randomized verification inputs.
    #[arg(long, global = true, env = "FRACBLOW_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the identity, scaling and bound checks.
    Verify,
    /// Print the thresholds for the configured parameters.
    Exponent {
        /// Query the coupled system instead of the scalar equation.
        #[arg(long)]
        system: bool,
    },
    /// Run one scalar simulation and print its sup-norm trace.
    Simulate {
        /// Also write solution snapshots (needs `snapshot_every`).
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Scalar runs over a list of powers p.
    Sweep {
        /// Comma-separated p values, overriding [sweep] p_values.
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
    },
    /// Coupled runs over the [sweep] pairs list.
    SystemSweep,
}

enum Failure {
    Verify(String),
    Usage(String),
    Lib(Error),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verify(_) => exit::VERIFY_FAILED,
            Failure::Usage(_) => exit::USAGE,
            Failure::Io(_) => exit::IO,
            Failure::Lib(e) => match e {
                Error::Parameter(_)
                | Error::Order { .. }
                | Error::Hypothesis(_)
                | Error::Geometry(_) => exit::VALIDATION,
                Error::Input(_) => exit::USAGE,
                _ => exit::SOLVER,
            },
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(format!("stdout: {e}"))),
    }
}

fn load_spec(path: Option<&Path>) -> Result<ExperimentSpec, Failure> {
    match path {
        None => Ok(ExperimentSpec::default()),
        Some(p) => ExperimentSpec::load(p)
            .map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?
            .map_err(|e| Failure::Usage(e.to_string())),
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let spec = load_spec(cli.config.as_deref())?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Verify => {
            if let Some(t) = cli.tol.or(spec.verify.tol) {
                if !(t >= 0.0) {
                    return Err(Failure::Usage(format!(
                        "tolerance must be nonnegative, got {t}"
                    )));
                }
            }
            let opts = VerifyOptions {
                tol_override: cli.tol.or(spec.verify.tol),
                seed: cli.seed.unwrap_or(spec.verify.seed),
            };
            let report = verify_all(&opts);
            let text = report.render();
            write_output(out, &text)?;
            if !report.passed() {
                return Err(Failure::Verify("verification failed".into()));
            }
        }
        Command::Exponent { system } => {
            let text = if system {
                system_exponent_query(&spec.system)?
            } else {
                exponent_query(&spec.params)?
            };
            write_output(out, &text)?;
        }
        Command::Simulate { snapshots } => {
            let params = spec.params.param_set()?;
            let cfg = spec.simulation.scalar_config(params)?;
            let res = run(&cfg)?;
            if let Some(path) = snapshots {
                std::fs::write(&path, snapshots_csv(&res, &cfg.space))
                    .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            }
            eprint!("{}", simulation_summary(&res));
            write_output(out, &trace_csv(&res))?;
        }
        Command::Sweep { p } => {
            let values = p.unwrap_or_else(|| spec.sweep.p_values.clone());
            let rows = sweep_p(&spec, &values, cli.jobs)?;
            write_output(out, &sweep_csv(&rows))?;
        }
        Command::SystemSweep => {
            let rows = system_sweep(&spec, &spec.sweep.pairs, cli.jobs)?;
            write_output(out, &system_sweep_csv(&rows))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Verify(m) | Failure::Usage(m) | Failure::Io(m) => eprintln!("error: {m}"),
                Failure::Lib(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(f.code())
        }
    }
}
