//! Command-line front end: run scenarios from JSON configurations and write
//! CSV results.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hcqlink::config::{load_config, RunConfig, ScenarioKind};
use hcqlink::scenario::{
    analyze_stream, compare_summaries, read_summary, read_time_tags, run_scenario, write_outputs,
    RunOutput,
};
use hcqlink::Error;

#[derive(Parser)]
#[command(name = "hcqlink", version, about = "Quantum-dot links over dual-band hollow-core fiber: simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    config: PathBuf,
    /// Override the configured random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for summary.csv and artifacts.
    #[arg(long, env = "HCQLINK_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario selected by the configuration file.
    Sim(RunArgs),
    /// Report resonances, window assignments and loss budgets.
    Fiber(RunArgs),
    /// Run a BB84 scenario (the configuration must select one).
    Qkd(RunArgs),
    /// Compute secret-key-rate and distance curves.
    Keyrate(RunArgs),
    /// Correlate a recorded channel,timestamp_ps stream offline.
    Analyze {
        /// Time-tag CSV (channel,timestamp_ps).
        tags: PathBuf,
        /// Repetition period in picoseconds.
        #[arg(long, default_value_t = 12_500)]
        rep_period_ps: i64,
        #[arg(long, default_value_t = 100)]
        bin_width_ps: i64,
        #[arg(long, default_value_t = 62_500)]
        span_ps: i64,
        #[arg(long, default_value_t = 12_500)]
        window_ps: i64,
        #[arg(long, env = "HCQLINK_OUT", default_value = "out")]
        out: PathBuf,
    },
    /// Compare two summary.csv files metric by metric.
    Compare {
        summary_a: PathBuf,
        summary_b: PathBuf,
        #[arg(long, env = "HCQLINK_OUT")]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::Parse(_) | Error::InvalidParameter(_) => 1,
        Error::Infeasible(_) | Error::NoSolution(_) | Error::OnResonance { .. } => 3,
        _ => 2,
    }
}

fn print_output(output: &RunOutput) {
    println!("scenario: {} ({})", output.name, output.scenario.as_str());
    for m in &output.metrics {
        if m.sigma > 0.0 {
            println!("  {} = {} +- {}", m.name, m.value, m.sigma);
        } else {
            println!("  {} = {}", m.name, m.value);
        }
    }
}

fn run_with_scenario(args: &RunArgs, force: Option<ScenarioKind>) -> Result<(), Error> {
    let mut config: RunConfig = load_config(&args.config)?;
    if let Some(kind) = force {
        config.scenario = kind;
    }
    let output = run_scenario(&config, args.seed)?;
    print_output(&output);
    let paths = write_outputs(&output, &args.out)?;
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Sim(args) => run_with_scenario(args, None),
        Command::Fiber(args) => run_with_scenario(args, Some(ScenarioKind::FiberReport)),
        Command::Keyrate(args) => run_with_scenario(args, Some(ScenarioKind::Keyrate)),
        Command::Qkd(args) => {
            let config = load_config(&args.config)?;
            match config.scenario {
                ScenarioKind::Bb84Pol | ScenarioKind::Bb84Timebin => {}
                other => {
                    return Err(Error::Config {
                        key: "scenario".into(),
                        message: format!(
                            "qkd needs a bb84_pol or bb84_timebin scenario, got {}",
                            other.as_str()
                        ),
                    })
                }
            }
            run_with_scenario(args, None)
        }
        Command::Analyze {
            tags,
            rep_period_ps,
            bin_width_ps,
            span_ps,
            window_ps,
            out,
        } => {
            let stream = read_time_tags(tags)?;
            let analysis = hcqlink::config::AnalysisConfig {
                bin_width_ps: *bin_width_ps,
                span_ps: *span_ps,
                window_ps: *window_ps,
                exclude_orders: None,
            };
            let output = analyze_stream(&stream, &analysis, *rep_period_ps)?;
            print_output(&output);
            let paths = write_outputs(&output, out)?;
            for p in paths {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Compare {
            summary_a,
            summary_b,
            out,
        } => {
            let a = read_summary(summary_a)?;
            let b = read_summary(summary_b)?;
            let (csv, worst) = compare_summaries(&a, &b);
            print!("{csv}");
            println!("worst_z = {worst}");
            if let Some(dir) = out {
                std::fs::create_dir_all(dir)?;
                let path = dir.join("compare.csv");
                std::fs::write(&path, csv)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
