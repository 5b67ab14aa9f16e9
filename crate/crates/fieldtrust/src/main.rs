use clap::{Parser, Subcommand};
use fieldtrust::config::ExperimentConfig;
use fieldtrust::driver;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "fieldtrust",
    version,
    about = "Physics-informed field inference with model-trust estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the trust parameter and tabulate its posterior potential.
    Infer {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for trust_report.json, posterior_grid.csv, fields.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Model-error sweep and/or data-density study from the config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for sweep.csv, convergence.csv, summary.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Cross-check closed forms against sampling and finite differences.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for verify.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<(), (u8, String)> {
    match cli.command {
        Command::Infer { config, out } => {
            let (cfg, base) = ExperimentConfig::load(&config).map_err(plain)?;
            let report = driver::run_infer(&cfg, &base, &out).map_err(|e| recorded(&out, e))?;
            match report.beta_hat {
                Some(beta) => println!(
                    "inferred trust {beta:.6e} after {} iterations (residual {:.2e})",
                    report.iterations, report.grad_residual
                ),
                None => println!(
                    "trust diverged after {} iterations: the model explains the data",
                    report.iterations
                ),
            }
            Ok(())
        }
        Command::Sweep { config, out } => {
            let (cfg, base) = ExperimentConfig::load(&config).map_err(plain)?;
            driver::run_sweep(&cfg, &base, &out).map_err(|e| recorded(&out, e))?;
            println!("sweep artifacts written to {}", out.display());
            Ok(())
        }
        Command::Verify { seed, out } => {
            let report = driver::run_verify(seed, &out).map_err(|e| recorded(&out, e))?;
            for check in &report.checks {
                println!(
                    "{} {} (worst {:.3e}, tolerance {:.1e})",
                    if check.passed { "pass" } else { "FAIL" },
                    check.name,
                    check.worst_deviation,
                    check.tolerance
                );
            }
            if report.passed {
                Ok(())
            } else {
                Err((4, "verification failed; see verify.json".into()))
            }
        }
    }
}

fn plain(e: fieldtrust::Error) -> (u8, String) {
    (driver::exit_code(&e) as u8, e.to_string())
}

/// On runtime failures (exit 3) leave a machine-readable record next to
/// where the artifacts would have gone. Config errors write nothing.
fn recorded(out: &Path, e: fieldtrust::Error) -> (u8, String) {
    let (code, message) = plain(e);
    if code == 3 {
        let record = serde_json::json!({ "code": 3, "error": message });
        if std::fs::create_dir_all(out).is_ok() {
            if let Ok(mut bytes) = serde_json::to_vec_pretty(&record) {
                bytes.push(b'\n');
                let tmp = out.join(".error.json.tmp");
                if std::fs::write(&tmp, bytes).is_ok() {
                    let _ = std::fs::rename(tmp, out.join("error.json"));
                }
            }
        }
    }
    (code, message)
}
