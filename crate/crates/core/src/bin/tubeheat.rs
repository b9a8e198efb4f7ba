use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tubeheat::cli::{run_converge, run_solve, run_verify, Status};
use tubeheat::config::RunConfig;
use tubeheat::operators::HypersingularChoice;
use tubeheat::output::fmt_f64;

/// Environment variable that sets the worker thread count when `--threads`
/// is absent.
const THREADS_ENV: &str = "TUBEHEAT_THREADS";

#[derive(Parser)]
#[command(name = "tubeheat", version, about = "Space-time boundary elements for the heat equation on moving domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overriding `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for assembly and verification.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Hypersingular matrix used by the solves.
    #[arg(long = "d-operator", global = true, value_parser = parse_choice)]
    d_operator: Option<HypersingularChoice>,

    /// Seed for the random test densities, overriding `verify.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured boundary value problem.
    Solve,
    /// Run the operator identity checks.
    Verify,
    /// Refinement study over `converge.levels`.
    Converge,
}

fn parse_choice(s: &str) -> Result<HypersingularChoice, String> {
    s.parse().map_err(|e: tubeheat::Error| e.to_string())
}

fn threads(cli: &Cli) -> Result<Option<usize>, String> {
    if let Some(n) = cli.threads {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("{THREADS_ENV} must be a positive integer, got {v:?}")),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<bool, String> {
    if let Some(n) = threads(&cli)? {
        if n == 0 {
            return Err("thread count must be positive".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let path = cli.config.as_ref().ok_or("--config <path> is required")?;
    let mut config = RunConfig::load(path).map_err(|e| e.to_string())?;
    if let Some(out) = &cli.out {
        config.output.directory = out.clone();
    }
    if let Some(d) = cli.d_operator {
        config.problem.hypersingular = d;
    }
    if let Some(seed) = cli.seed {
        config.verify.seed = seed;
    }

    match cli.command {
        Command::Solve => {
            let report = run_solve(&config).map_err(|e| e.to_string())?;
            println!("formulation {}", report.formulation);
            println!("residual {}", fmt_f64(report.residual));
            if let Some(e) = report.errors {
                println!("density error {}", fmt_f64(e.density));
                println!("interior error {}", fmt_f64(e.interior));
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            Ok(true)
        }
        Command::Verify => {
            let report = run_verify(&config).map_err(|e| e.to_string())?;
            for r in &report.rows {
                let bound = r
                    .bound
                    .map(|(rel, t)| format!(" {} {}", rel.symbol(), fmt_f64(t)))
                    .unwrap_or_default();
                let status = r.status();
                let tag = if status == Status::Info { "" } else { status.name() };
                println!("{:<5} {} {} = {}{}", tag, r.check, r.quantity, fmt_f64(r.value), bound);
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            Ok(report.all_pass())
        }
        Command::Converge => {
            let report = run_converge(&config).map_err(|e| e.to_string())?;
            let orders = report.orders(|e| e.density);
            for (l, o) in report.levels.iter().zip(orders) {
                let o = o.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
                println!(
                    "M=N={:<4} density error {:.3e} (order {o})  interior error {:.3e}",
                    l.size, l.errors.density, l.errors.interior
                );
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("tubeheat: some checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("tubeheat: {e}");
            ExitCode::from(2)
        }
    }
}
