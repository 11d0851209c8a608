use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nhimpact_cli::{
    catalog_listing, converge, jump, run, CliError, JumpRequest, RunConfig, SystemConfig,
};
use nhimpact_core::StepperConfig;

#[derive(Debug, Parser)]
#[command(
    name = "nhimpact",
    version,
    about = "Discrete Lagrange-d'Alembert simulation of nonholonomic systems with impacts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a configured scenario and write the trajectory, impact log
    /// and summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides output.directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Newton residual tolerance (overrides solver.newton.residual_tolerance).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Measure the convergence order of an impact-free scenario at h, h/2 and
    /// h/4 against the reference integrator.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Solve the continuous jump conditions at one boundary state and print
    /// the result as JSON.
    Jump {
        /// Catalog system name.
        #[arg(long)]
        system: String,
        /// System parameter as NAME=VALUE; repeatable.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, f64)>,
        /// Label of the inequality constraint (default: the first one).
        #[arg(long)]
        boundary: Option<String>,
        /// Boundary configuration, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        q: Option<Vec<f64>>,
        /// Incoming velocity, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        v: Option<Vec<f64>>,
        /// Sample a random incoming boundary state with this seed instead of
        /// giving --q and --v.
        #[arg(long, conflicts_with_all = ["q", "v"])]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// List the catalog systems and their parameters.
    Catalog,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|e| format!("parameter {name}: {e}"))?;
    Ok((name.trim().to_string(), value))
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, out, tol } => {
            let cfg = RunConfig::load(&config)?.with_overrides(out, tol);
            let summary = run(&cfg)?;
            println!(
                "{}: {} points, {} impacts, final time {}",
                summary.system, summary.points, summary.impacts, summary.final_time
            );
            println!("trajectory: {}", summary.trajectory_file.display());
            println!("impacts:    {}", summary.impacts_file.display());
        }
        Command::Converge { config, out, tol } => {
            let cfg = RunConfig::load(&config)?.with_overrides(out, tol);
            let report = converge(&cfg)?;
            println!("{:>12} {:>14} {:>8}", "h", "error", "order");
            for (i, (h, e)) in report.step_sizes.iter().zip(&report.errors).enumerate() {
                let order = match i.checked_sub(1).and_then(|j| report.orders[j]) {
                    Some(p) => format!("{p:.3}"),
                    None if i == 0 => String::new(),
                    None => "exact".to_string(),
                };
                println!("{h:>12.3e} {e:>14.6e} {order:>8}");
            }
            if report.exact {
                println!("scheme is exact for this scenario");
            }
        }
        Command::Jump {
            system,
            params,
            boundary,
            q,
            v,
            seed,
            tol,
        } => {
            let mut solver = StepperConfig::default();
            if let Some(tol) = tol {
                solver.newton.residual_tolerance = tol;
            }
            let report = jump(&JumpRequest {
                system: SystemConfig {
                    name: system,
                    parameters: params.into_iter().collect(),
                },
                boundary,
                q,
                v_minus: v,
                seed,
                solver,
            })?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("jump report serializes")
            );
        }
        Command::Catalog => print!("{}", catalog_listing()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
