use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rieszlab::config::parse_config;
use rieszlab::run::{RunError, run};
use rieszlab_core::selfcheck::{Suite, elliptic_suite, kernel_suite, oracle_suite};

#[derive(Parser)]
#[command(name = "rieszlab", version, about = "Growth experiments for 2d Euler with Riesz forcing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file
    Run { config: PathBuf },
    /// Check the kernel against its closed form and bounds
    VerifyKernel,
    /// Check the mode solver against exact and manufactured solutions
    VerifyElliptic,
    /// Check the model integrator against its closed-form limit
    VerifyOracle,
}

fn report(suite: Suite) -> ExitCode {
    for c in &suite.checks {
        println!("{c}");
    }
    if suite.passed() {
        println!("{}: all {} checks passed", suite.name, suite.checks.len());
        ExitCode::SUCCESS
    } else {
        let failed = suite.checks.iter().filter(|c| !c.passed).count();
        println!("{}: {failed} of {} checks failed", suite.name, suite.checks.len());
        ExitCode::from(4)
    }
}

fn fail(e: &RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let cfg = match parse_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e.into()),
            };
            let (manifest, result) = run(&cfg);
            for c in &manifest.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            match result {
                Ok(()) => {
                    println!("wrote {} files to {}", manifest.files.len(), cfg.output_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::VerifyKernel => report(kernel_suite()),
        Command::VerifyElliptic => report(elliptic_suite()),
        Command::VerifyOracle => report(oracle_suite()),
    }
}
