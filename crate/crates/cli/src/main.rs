//! `nsdecay` command-line driver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nsdecay::harness::{
    check_heat, decompose_file, load_config, run_scenario, run_sweep, ScenarioConfig, HEAT_GAMMA_TOL,
    OUTPUT_DIR_ENV,
};
use nsdecay::harness::InitKind;
use nsdecay::Error;

#[derive(Parser)]
#[command(name = "nsdecay", version, about = "Energy decay of 2D flows around a radial vortex")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write series.csv, report.txt and report.csv.
    Simulate { config: PathBuf },
    /// Run several scenarios and write sweep.csv.
    Sweep {
        #[arg(required = false)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Directory for sweep.csv and per-scenario outputs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split a vorticity snapshot into a finite-energy part and a Gaussian vortex.
    Decompose {
        file: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        t0: f64,
    },
    /// Heat-flow decay exponent of the configured initial data.
    CheckHeat { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<ScenarioConfig, Error> {
    let mut cfg = load_config(path)?;
    cfg.apply_env();
    Ok(cfg)
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Simulate { config } => {
            let cfg = load(&config)?;
            let outcome = run_scenario(&cfg)?;
            print!("{}", outcome.report.to_text());
            Ok(outcome.exit_code())
        }
        Command::Sweep { configs, jobs, out } => {
            let cfgs = configs.iter().map(load).collect::<Result<Vec<_>, _>>()?;
            let out = out
                .or_else(|| std::env::var(OUTPUT_DIR_ENV).ok().filter(|d| !d.is_empty()).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("sweep"));
            let rows = run_sweep(&cfgs, jobs, &out)?;
            for r in &rows {
                println!("{}", r.csv());
            }
            Ok(if rows.iter().all(|r| r.ok()) { 0 } else { 1 })
        }
        Command::Decompose { file, t0 } => {
            let summary = decompose_file(&file, t0)?;
            print!("{}", summary.to_text());
            Ok(0)
        }
        Command::CheckHeat { config } => {
            let cfg = load(&config)?;
            let p = check_heat(&cfg)?;
            println!("gamma_fitted = {:.16e}", p.gamma);
            println!("raw_exponent = {:.16e}", p.raw_exponent);
            println!("stderr = {:.16e}", p.stderr);
            println!("fit_t_min = {:.16e}", p.fit_window.0);
            println!("fit_t_max = {:.16e}", p.fit_window.1);
            println!("algebraic = {}", p.algebraic);
            if cfg.init_kind == InitKind::PrescribedGamma {
                let ok = (p.gamma - cfg.gamma).abs() <= HEAT_GAMMA_TOL;
                println!("gamma_target = {:.16e}", cfg.gamma);
                println!("verdict = {}", if ok { "pass" } else { "fail" });
                Ok(if ok { 0 } else { 1 })
            } else {
                Ok(0)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
