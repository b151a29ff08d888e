use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use demon_engine::report::{run_scenario, sweep_csv, sweep_summary_line, RunReport};
use demon_engine::scenario::{builtin, load_scenario, OutputFormat, Scenario, BUILTIN_NAMES};
use demon_engine::sweep::{run_sweep, SweepDims, SweepSettings};
use demon_engine::Error;
use log::info;

const EXIT_INPUT: u8 = 1;
const EXIT_THEOREM: u8 = 2;

#[derive(Parser)]
#[command(
    name = "demon-engine",
    version,
    about = "Measurement-feedback quantum heat engine simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        file: PathBuf,
        /// Report destination; defaults to the file's `output.path`, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Check every bound on random scenarios; writes one CSV row per scenario.
    Sweep {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dimensions s,r,a,b of system, reservoir, ancilla and memory.
        #[arg(long, default_value = "2,2,2,2")]
        dims: String,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in scenario.
    Builtin {
        name: String,
        /// Only `carnot2` uses it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Print the names of the built-in scenarios.
    ListBuiltins,
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DEMON_ENGINE_LOG", "warn"))
        .format_timestamp(None)
        .init();
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            info!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit(report: &RunReport, out: Option<&Path>, format: OutputFormat) -> Result<ExitCode, Error> {
    let text = match format {
        OutputFormat::Json => {
            let mut s = report.to_json()?;
            s.push('\n');
            s
        }
        OutputFormat::Csv => report.to_csv(),
    };
    write_output(out, &text)?;
    if report.theorems_hold {
        Ok(ExitCode::SUCCESS)
    } else {
        for c in report.failed_checks() {
            eprintln!(
                "check `{}` failed: margin {:e} (tolerance {:e})",
                c.name, c.margin, c.tolerance
            );
        }
        Ok(ExitCode::from(EXIT_THEOREM))
    }
}

fn run_and_emit(scenario: &Scenario, out: Option<PathBuf>, format: Option<Format>) -> Result<ExitCode, Error> {
    let out = out.or_else(|| {
        scenario
            .output
            .as_ref()
            .and_then(|o| o.path.as_ref())
            .map(PathBuf::from)
    });
    let format = format
        .map(OutputFormat::from)
        .or_else(|| scenario.output.as_ref().map(|o| o.format))
        .unwrap_or_default();
    let report = run_scenario(scenario)?;
    emit(&report, out.as_deref(), format)
}

fn execute(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run { file, out, format } => {
            let scenario = load_scenario(&file)?;
            run_and_emit(&scenario, out, format)
        }
        Command::Builtin {
            name,
            seed,
            out,
            format,
        } => {
            let scenario = builtin(&name, seed)?;
            run_and_emit(&scenario, out, Some(format))
        }
        Command::Sweep {
            count,
            seed,
            dims,
            jobs,
            out,
        } => {
            if count == 0 {
                return Err(Error::InvalidScenario("--count must be at least 1".into()));
            }
            let dims: SweepDims = dims.parse()?;
            let outcome = run_sweep(&SweepSettings {
                count,
                seed,
                dims,
                jobs,
            })?;
            write_output(out.as_deref(), &sweep_csv(&outcome))?;
            eprintln!("{}", sweep_summary_line(&outcome));
            if outcome.theorem_violations() == 0 {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(EXIT_THEOREM))
            }
        }
        Command::ListBuiltins => {
            for name in BUILTIN_NAMES {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
