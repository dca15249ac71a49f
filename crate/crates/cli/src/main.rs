use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use semrob_core::engine::Evaluation;
use semrob_core::query::{parse, pretty_print, PrefixMap};
use semrob_core::runtime::Mode;
use semrob_core::scenario::{self, RunOptions, Scenario};

#[derive(Parser)]
#[command(name = "semrob", version, about = "Run continuous RDF-star stream queries over simulated semantic nodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario under virtual time.
    Run {
        file: PathBuf,
        /// Fail when a query reads a named stream that nobody publishes.
        #[arg(long)]
        strict: bool,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for results logs, outputs and metrics.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Ref)]
        mode: ModeArg,
        /// Recompute every query from scratch after each change.
        #[arg(long)]
        recompute: bool,
    },
    /// Check a scenario, its queries and replay files without running it.
    Validate { file: PathBuf },
    /// Parse a query and print its syntax tree.
    Parse {
        file: PathBuf,
        /// Print the normalized query text instead of the tree.
        #[arg(long)]
        pretty: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ref,
    Threaded,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { file, strict, seed, out, mode, recompute } => {
            let options = RunOptions {
                seed,
                mode: match mode {
                    ModeArg::Ref => Mode::Reference,
                    ModeArg::Threaded => Mode::Threaded,
                },
                evaluation: if recompute { Evaluation::Recompute } else { Evaluation::Incremental },
                strict,
            };
            run(&file, &options, &out)
        }
        Command::Validate { file } => {
            let problems = scenario::validate(&file);
            for p in &problems {
                println!("{p}");
            }
            if problems.is_empty() {
                println!("ok");
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Parse { file, pretty } => {
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{}: {e}", file.display());
                    return ExitCode::from(1);
                }
            };
            match parse(&text, &PrefixMap::standard()) {
                Ok(q) if pretty => {
                    print!("{}", pretty_print(&q));
                    ExitCode::SUCCESS
                }
                Ok(q) => {
                    println!("{q:#?}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{}: {e}", file.display());
                    ExitCode::from(2)
                }
            }
        }
    }
}

fn run(file: &std::path::Path, options: &RunOptions, out: &std::path::Path) -> ExitCode {
    let scenario = match Scenario::load(file) {
        Ok(s) => s,
        Err(e) => {
            for p in e.problems() {
                eprintln!("{p}");
            }
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let report = scenario::run(&scenario, options);
    if let Err(e) = report.write(out) {
        eprintln!("{e}");
        return ExitCode::from(1);
    }
    let m = &report.metrics.domain;
    log::info!(
        "published {} messages, {} deliveries, {} late drops, {} evaluations",
        m.broker.published,
        m.delivered,
        m.engine.late_dropped,
        m.engine.evaluations
    );
    for p in &report.problems {
        eprintln!("{p}");
    }
    if report.problems.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
