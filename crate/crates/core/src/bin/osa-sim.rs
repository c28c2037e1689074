use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use osa_core::config::{explain, parse_config, ExperimentConfig};
use osa_core::experiment::{run_experiment, RunOptions};
use osa_core::replay::Fixture;
use osa_core::Error;

#[derive(Parser)]
#[command(name = "osa-sim", version, about = "Spectrum-access bandit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all repetitions of an experiment config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        stride: Option<u64>,
        /// Worker threads for repetitions.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the phase durations and probe tables a config implies.
    Explain { config: PathBuf },
    /// Replay a scripted trekking fixture and check its checkpoints.
    Replay { fixture: PathBuf },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(1)
    })?;
    parse_config(&text).map_err(|e| {
        match e {
            Error::Config(errs) => {
                for m in errs {
                    eprintln!("config error: {m}");
                }
            }
            other => eprintln!("config error: {other}"),
        }
        ExitCode::from(1)
    })
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            reps,
            out,
            stride,
            threads,
        } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(r) = reps {
                if r == 0 {
                    eprintln!("config error: --reps must be >= 1");
                    return ExitCode::from(1);
                }
                cfg.repetitions = r;
            }
            if let Some(s) = stride {
                if s == 0 {
                    eprintln!("config error: --stride must be >= 1");
                    return ExitCode::from(1);
                }
                cfg.stride = s;
            }
            let out = out.unwrap_or_else(|| cfg.output_directory.clone());
            let opts = RunOptions {
                out: Some(out.clone()),
                threads,
                ..Default::default()
            };
            match run_experiment(&cfg, &opts) {
                Ok(summary) => {
                    let mut text = String::new();
                    for p in &summary.policies {
                        let _ = writeln!(
                            text,
                            "{:<12} R_T = {:>10.2}  C_T = {:>8.2}  S_T = {:>6.2}%  fairness = {:.3}  runs = {}",
                            p.label,
                            p.regret_mean,
                            p.collisions_mean,
                            p.utilization_mean,
                            p.fairness,
                            p.runs.len()
                        );
                        for f in &p.failures {
                            eprintln!("run failure [{}]: {f}", p.label);
                        }
                    }
                    let _ = writeln!(text, "outputs in {}", out.display());
                    emit(&text);
                    if summary.partial {
                        ExitCode::from(2)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("run error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Explain { config } => match load(&config) {
            Ok(cfg) => match explain(&cfg) {
                Ok(s) => {
                    emit(&s);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("config error: {e}");
                    ExitCode::from(1)
                }
            },
            Err(code) => code,
        },
        Command::Replay { fixture } => {
            let text = match std::fs::read_to_string(&fixture) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", fixture.display());
                    return ExitCode::from(1);
                }
            };
            let fx = match Fixture::from_json(&text) {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("fixture error: {e}");
                    return ExitCode::from(1);
                }
            };
            match fx.run() {
                Ok(report) => {
                    let mut text = format!("{}\n", report.name);
                    for c in &report.checkpoints {
                        let _ = writeln!(
                            text,
                            "  SU{} settles on rank {} at slot {}",
                            c.id, c.rank, c.slot
                        );
                    }
                    for o in &report.outcomes {
                        let x = &o.expectation;
                        let _ = writeln!(
                            text,
                            "  {} SU{} rank {} slot {} by {}: observed {}",
                            if o.passed { "PASS" } else { "FAIL" },
                            x.id,
                            opt(x.rank),
                            opt(x.slot),
                            opt(x.by),
                            opt(o.observed)
                        );
                    }
                    emit(&text);
                    if report.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("run error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
