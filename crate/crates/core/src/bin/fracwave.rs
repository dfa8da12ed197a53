use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracwave::config::{run_experiment, run_solve, RunConfig};
use fracwave::harness::ExperimentKind;
use fracwave::mittag_leffler::ml_eval;
use fracwave::output::fmt_num;
use fracwave::Error;
use num_complex::Complex64;

const EXIT_EXPERIMENT_FAILURES: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ML: u8 = 3;
const EXIT_SOLVER: u8 = 4;
const EXIT_BLOWUP: u8 = 10;

#[derive(Parser)]
#[command(
    name = "fracwave",
    version,
    about = "Time-fractional diffusion-wave toolkit"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run even when the growth exponent fails the admissibility test.
    #[arg(long, global = true)]
    override_admissibility: bool,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate E_{alpha,beta}(re + i im).
    Ml {
        alpha: f64,
        beta: f64,
        #[arg(allow_negative_numbers = true)]
        re: f64,
        #[arg(allow_negative_numbers = true, default_value_t = 0.0)]
        im: f64,
    },
    /// Solve the configured problem and write the trajectory.
    Solve {
        #[arg(value_name = "CONFIG")]
        path: Option<PathBuf>,
    },
    /// Run one experiment of the analysis harness.
    Experiment {
        #[arg(value_parser = parse_kind)]
        kind: ExperimentKind,
        #[arg(value_name = "CONFIG")]
        path: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn fail(code: u8, err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(code)
}

/// Config-class errors exit with 2; anything else is a runtime failure.
fn runtime_code(err: &Error, runtime: u8) -> u8 {
    match err.root() {
        Error::Config(_)
        | Error::InvalidDomain(_)
        | Error::InvalidParameter(_)
        | Error::ShapeMismatch { .. }
        | Error::Inadmissible(_) => EXIT_CONFIG,
        _ => runtime,
    }
}

fn load(cli: &Cli, positional: &Option<PathBuf>) -> Result<(RunConfig, PathBuf), Error> {
    let path = positional
        .as_ref()
        .or(cli.config.as_ref())
        .ok_or_else(|| Error::Config("no config file given (use --config PATH)".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if cli.override_admissibility {
        cfg.solver.override_admissibility = true;
    }
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| cfg.output.directory.clone());
    Ok((cfg, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        eprintln!("warning: thread pool already initialised: {e}");
    }

    match &cli.command {
        Command::Ml {
            alpha,
            beta,
            re,
            im,
        } => match ml_eval(*alpha, *beta, Complex64::new(*re, *im)) {
            Ok(ev) => {
                let sign = if ev.value.im.is_sign_negative() {
                    '-'
                } else {
                    '+'
                };
                println!(
                    "value        {} {sign} {}i",
                    fmt_num(ev.value.re),
                    fmt_num(ev.value.im.abs())
                );
                println!("branch       {}", ev.branch);
                match ev.disagreement {
                    Some(d) => println!("disagreement {}", fmt_num(d)),
                    None => println!("disagreement n/a"),
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(runtime_code(&e, EXIT_ML), &e),
        },
        Command::Solve { path } => {
            let (cfg, out) = match load(&cli, path) {
                Ok(x) => x,
                Err(e) => return fail(EXIT_CONFIG, &e),
            };
            match run_solve(&cfg, &out) {
                Ok(outcome) => {
                    let tr = &outcome.trajectory;
                    for w in &tr.warnings {
                        eprintln!("warning: {w}");
                    }
                    for p in &outcome.written {
                        println!("wrote {}", p.display());
                    }
                    if tr.blown {
                        println!("blow-up flagged at t = {}", fmt_num(tr.final_time()));
                        ExitCode::from(EXIT_BLOWUP)
                    } else {
                        println!("reached t = {}", fmt_num(tr.final_time()));
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => fail(runtime_code(&e, EXIT_SOLVER), &e),
            }
        }
        Command::Experiment { kind, path } => {
            let (cfg, out) = match load(&cli, path) {
                Ok(x) => x,
                Err(e) => return fail(EXIT_CONFIG, &e),
            };
            match run_experiment(&cfg, *kind, &out) {
                Ok(report) => {
                    println!(
                        "{kind}: {} passed, {} failed",
                        report.pass_count, report.fail_count
                    );
                    if report.fail_count == 0 {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_EXPERIMENT_FAILURES)
                    }
                }
                Err(e) => fail(runtime_code(&e, EXIT_SOLVER), &e),
            }
        }
    }
}
