use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hyperlim::driver::check::{run_checks, CheckOptions};
use hyperlim::driver::convergence::convergence;
use hyperlim::driver::{run_file, RunConfig, RunError};

/// Invariant-domain-preserving graph-viscosity solver.
#[derive(Parser)]
#[command(name = "hyperlim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML config: snapshots, diagnostics.csv and summary.json.
    Run { config: PathBuf },
    /// Error table against the preset's exact solution under refinement.
    Convergence {
        config: PathBuf,
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
    /// Seeded property suites; exits 1 when any suite fails.
    Check {
        /// Run only suites whose name contains this string.
        #[arg(long)]
        suite: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fraction of the full trial counts.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("HYPERLIM_THREADS") else { return Ok(()) };
    let threads: usize =
        value.parse().ok().filter(|n| *n > 0).ok_or_else(|| format!("HYPERLIM_THREADS={value} is not a positive count"))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| e.to_string())
}

fn report(err: RunError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match cli.command {
        Command::Run { config } => match run_file(&config) {
            Ok(out) => {
                let s = &out.summary;
                println!("{}: {} steps to t = {} in {:.3}s", s.problem, s.steps, s.time, s.wall_time_s);
                for (k, name) in s.components.iter().enumerate() {
                    println!(
                        "  {name:>6}: min {:.6e}  max {:.6e}  drift {:.3e}",
                        s.min[k], s.max[k], s.mass_drift_relative[k]
                    );
                }
                ExitCode::SUCCESS
            }
            Err(e) => report(e),
        },
        Command::Convergence { config, levels } => {
            let cfg = match RunConfig::load(&config) {
                Ok(cfg) => cfg,
                Err(e) => return report(e.into()),
            };
            let table = match convergence(&cfg, levels) {
                Ok(t) => t,
                Err(e) => return report(e),
            };
            print!("{table}");
            if let Some(dir) = &cfg.output.dir {
                let dir = if dir.is_relative() { config.parent().unwrap_or(dir).join(dir) } else { dir.clone() };
                let written = std::fs::create_dir_all(&dir)
                    .and_then(|_| File::create(dir.join("convergence.csv")))
                    .and_then(|f| table.write_csv(&mut BufWriter::new(f)));
                if let Err(e) = written {
                    return report(RunError::Io(e));
                }
            }
            ExitCode::SUCCESS
        }
        Command::Check { suite, seed, scale } => {
            if !(scale > 0.0 && scale <= 1.0) {
                eprintln!("error: --scale must be in (0, 1]");
                return ExitCode::from(2);
            }
            match run_checks(suite.as_deref(), CheckOptions { seed, scale }) {
                Ok(reports) => {
                    for r in &reports {
                        println!("{r}");
                    }
                    let failed = reports.iter().filter(|r| !r.passed).count();
                    println!("{} of {} suites passed", reports.len() - failed, reports.len());
                    if failed == 0 {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
