//! `psm`: run, explore, lint and replay state machine models.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use psm_core::cli::{execute, Command, Format, Invocation, StrategyArg};
use psm_core::linter::Severity;

#[derive(Parser)]
#[command(name = "psm", version, about = "Interpreter, trace explorer and linter for state machines with do-activities")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one trace and print it as an RTC timeline.
    Run {
        model: PathBuf,
        scenario: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// first, random, or script:FILE.
        #[arg(long, default_value = "random")]
        strategy: String,
        /// Write the trace as JSON.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Explore every scheduler choice and partition the traces.
    Explore {
        model: PathBuf,
        scenario: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        max_traces: usize,
        #[arg(long, default_value_t = 16)]
        max_pool: usize,
        /// Enumerate every path instead of sharing equal states.
        #[arg(long)]
        full: bool,
        /// Distinguish classes by stable configuration sequence.
        #[arg(long)]
        configs: bool,
        /// Write one witness trace per observable class into this directory.
        #[arg(long)]
        witness_dir: Option<PathBuf>,
    },
    /// Report do-activity patterns and their issues.
    Lint {
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = SeverityArg::Applicable)]
        severity: SeverityArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
    },
    /// Re-execute a stored trace and report the first divergence.
    Replay {
        model: PathBuf,
        trace: PathBuf,
        scenario: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    max_steps: usize,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Structured,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeverityArg {
    Important,
    Applicable,
    Slight,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => Format::Text,
            FormatArg::Structured => Format::Structured,
        }
    }
}

impl From<SeverityArg> for Severity {
    fn from(s: SeverityArg) -> Self {
        match s {
            SeverityArg::Important => Severity::Important,
            SeverityArg::Applicable => Severity::Applicable,
            SeverityArg::Slight => Severity::Slight,
        }
    }
}

fn parse_strategy(s: &str) -> Result<StrategyArg, String> {
    match s {
        "first" => Ok(StrategyArg::First),
        "random" => Ok(StrategyArg::Random),
        _ => s
            .strip_prefix("script:")
            .map(|f| StrategyArg::Script(PathBuf::from(f)))
            .ok_or_else(|| format!("unknown strategy `{s}`; expected first, random or script:FILE")),
    }
}

fn invocation(cli: Cli) -> Result<Invocation, String> {
    Ok(match cli.command {
        Cmd::Run { model, scenario, common, strategy, trace_out } => {
            let mut inv = Invocation::new(Command::Run, model);
            inv.scenario = scenario;
            inv.seed = common.seed;
            inv.max_steps = common.max_steps;
            inv.format = common.format.into();
            inv.strategy = parse_strategy(&strategy)?;
            inv.trace_out = trace_out;
            inv
        }
        Cmd::Explore { model, scenario, common, max_traces, max_pool, full, configs, witness_dir } => {
            let mut inv = Invocation::new(Command::Explore, model);
            inv.scenario = scenario;
            inv.seed = common.seed;
            inv.max_steps = common.max_steps;
            inv.format = common.format.into();
            inv.max_traces = max_traces;
            inv.max_pool = max_pool;
            inv.full = full;
            inv.track_configs = configs;
            inv.witness_dir = witness_dir;
            inv
        }
        Cmd::Lint { model, severity, format } => {
            let mut inv = Invocation::new(Command::Lint, model);
            inv.severity = severity.into();
            inv.format = format.into();
            inv
        }
        Cmd::Replay { model, trace, scenario, format } => {
            let mut inv = Invocation::new(Command::Replay, model);
            inv.trace = Some(trace);
            inv.scenario = scenario;
            inv.format = format.into();
            inv
        }
    })
}

fn main() -> ExitCode {
    let inv = match invocation(Cli::parse()) {
        Ok(inv) => inv,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = execute(&inv);
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    ExitCode::from(out.code as u8)
}
