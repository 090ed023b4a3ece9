use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mtil::xp::{emit_plots_from_files, parse_config, run_bound_sweep_to_dir, run_grid_to_dir, run_selftest};

#[derive(Parser)]
#[command(name = "mtil", version, about = "Multitask behavioral cloning on finite MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment grid of a config and write records.csv
    Run { config: PathBuf },
    /// Render SVG plots and a summary CSV from a records CSV
    Plot { csv: PathBuf, spec: PathBuf },
    /// Compute bound reports on a planted family and write bounds.csv
    Bounds { config: PathBuf },
    /// Run the quick oracle checks
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> mtil::Result<bool> {
    match cli.command {
        Command::Run { config } => {
            let cfg = parse_config(&config)?;
            let (records, path) = run_grid_to_dir(&cfg)?;
            let failed = records.iter().filter(|r| r.normalized_return.is_none()).count();
            println!("wrote {} records to {}", records.len(), path.display());
            if failed > 0 {
                eprintln!("{failed} records have no return (failed cells or degenerate normalization)");
            }
            Ok(true)
        }
        Command::Plot { csv, spec } => {
            let out = emit_plots_from_files(&csv, &spec)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for p in &out.files {
                println!("wrote {}", p.display());
            }
            Ok(true)
        }
        Command::Bounds { config } => {
            let cfg = parse_config(&config)?;
            let (sweep, path) = run_bound_sweep_to_dir(&cfg)?;
            for t in &sweep.truth {
                println!(
                    "seed {}: d_bar(phi*; phi*, f*) = {:.3e}, zeta_hat = {:.3e}",
                    t.seed, t.d_bar_truth, t.zeta.value
                );
            }
            let complete = sweep.rows.iter().filter(|r| r.report.is_complete()).count();
            let holds = sweep.rows.iter().filter(|r| r.report.holds() == Some(true)).count();
            println!(
                "wrote {} reports to {} ({complete} complete, bound holds in {holds})",
                sweep.rows.len(),
                path.display()
            );
            for ((seed, n, t, m), e) in &sweep.failures {
                eprintln!("cell seed={seed} N={n} T={t} M={m} failed: {e}");
            }
            Ok(sweep.failures.is_empty())
        }
        Command::Selftest { seed } => {
            let results = run_selftest(seed);
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            Ok(results.iter().all(|r| r.passed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
