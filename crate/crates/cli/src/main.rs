use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slipflow::sweep::parse_schedule;
use slipflow::{
    mms_study, run_simulation, run_sweep_to, verify_archive, ResidualReport, RunConfig, SweepParam,
    Verification,
};

/// Exit status when every check passes.
const OK: u8 = 0;
/// Exit status when the run completed but a check failed.
const FAILED: u8 = 1;
/// Exit status for rejected input or a solver error.
const ERROR: u8 = 2;

#[derive(Parser)]
#[command(
    name = "slipflow",
    version,
    about = "Compressible channel flow with friction-type slip walls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration, verify it and write the archive.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the diagnostics on an archive.
    Verify {
        #[arg(long)]
        archive: PathBuf,
    },
    /// Run one configuration per level of a parameter schedule.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = ["delta", "n", "eps", "alpha"])]
        param: String,
        /// Comma-separated levels, e.g. 0.1,0.05,0.025.
        #[arg(long)]
        schedule: String,
        #[arg(long)]
        out: PathBuf,
        /// Levels solved concurrently.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Manufactured-solution convergence study.
    Mms {
        #[arg(long)]
        config: PathBuf,
    },
}

fn print_report(r: &ResidualReport) {
    let verdict = if r.pass { "PASS" } else { "FAIL" };
    println!(
        "{verdict} {:<32} {:>13.6e} (tol {:.3e}) {}",
        r.name, r.value, r.tolerance, r.context
    );
}

fn verdict(v: &Verification) -> u8 {
    match v.first_failing() {
        None => {
            println!("all checks passed");
            OK
        }
        Some(r) => {
            eprintln!(
                "first failing check: {} = {:.6e} (tolerance {:.3e}; {})",
                r.name, r.value, r.tolerance, r.context
            );
            FAILED
        }
    }
}

fn execute(command: Command) -> slipflow::Result<u8> {
    match command {
        Command::Run { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let outcome = run_simulation(&cfg, &out)?;
            for r in &outcome.verification().reports {
                print_report(r);
            }
            println!("archive written to {}", out.display());
            Ok(verdict(outcome.verification()))
        }
        Command::Verify { archive } => {
            let v = verify_archive(&archive)?;
            for r in &v.reports {
                print_report(r);
            }
            Ok(verdict(&v))
        }
        Command::Sweep {
            config,
            param,
            schedule,
            out,
            workers,
        } => {
            let cfg = RunConfig::load(&config)?;
            let param: SweepParam = param.parse()?;
            let schedule = parse_schedule(&schedule)?;
            let report = run_sweep_to(&cfg, param, &schedule, &out, workers)?;
            for l in &report.levels {
                println!(
                    "{} = {:<10} energy {:.3e}  gap {:.3e} <= {:.3e}  defect {:.3e}  artificial {:.6e}  {}",
                    param.name(),
                    l.value,
                    l.energy_residual,
                    l.boundary_gap,
                    l.gap_bound,
                    l.defect,
                    l.artificial_potential,
                    l.first_failure.as_deref().map_or("pass".into(), |f| format!("FAIL {f}"))
                );
            }
            for d in &report.distances {
                println!(
                    "distance {} -> {}: rho {:.6e}, u {:.6e}",
                    d.from, d.to, d.rho, d.u
                );
            }
            println!("{}", format_flags(&report));
            println!(
                "report written to {}",
                out.join("sweep_report.json").display()
            );
            if let Some(why) = &report.aborted {
                eprintln!("sweep aborted: {why}");
                return Ok(ERROR);
            }
            Ok(if report.all_levels_pass() { OK } else { FAILED })
        }
        Command::Mms { config } => {
            let cfg = RunConfig::load(&config)?;
            let study = mms_study(&cfg)?;
            for l in &study.spatial {
                println!(
                    "ky_max = {:<4} velocity error {:.6e}  density error {:.6e}",
                    l.level, l.outcome.u_error, l.outcome.rho_error
                );
            }
            for l in &study.temporal {
                println!(
                    "K = {:<6} velocity error {:.6e}  density error {:.6e}",
                    l.level, l.outcome.u_error, l.outcome.rho_error
                );
            }
            for r in &study.verification.reports {
                print_report(r);
            }
            Ok(verdict(&study.verification))
        }
    }
}

fn format_flags(report: &slipflow::SweepReport) -> String {
    let f = &report.flags;
    format!(
        "flags: distances_decreasing={} gap_within_bound={} artificial_potential_decreasing={} regularization_decreasing={} defect_slope={} defect_linear={}",
        f.distances_decreasing,
        f.gap_within_bound,
        f.artificial_potential_decreasing,
        f.regularization_decreasing,
        f.defect_slope.map_or("-".into(), |s| format!("{s:.3}")),
        f.defect_linear.map_or("-".into(), |b| b.to_string())
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(ERROR)
        }
    }
}
