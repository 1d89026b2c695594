use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dcap_cli::{builtin_scenario, list_builtins, run_scenario, validate, CliError, CliResult, Overrides, Scenario};

#[derive(Parser)]
#[command(name = "dcap", version, about = "Exact truncated computations with completed p-adic differential operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its JSON report
    Run {
        #[command(flatten)]
        input: Input,
        /// Report destination; defaults to the scenario's "out" or stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave the wall time out of the report
        #[arg(long)]
        no_timing: bool,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Check a scenario file against the schema without running it
    Validate {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// List operations, coverings and built-in scenarios
    List,
    /// Print a built-in scenario file
    Show { name: String },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Input {
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Name of a built-in scenario
    #[arg(long)]
    builtin: Option<String>,
}

#[derive(Args)]
struct OverrideArgs {
    #[arg(long)]
    p: Option<u64>,
    #[arg(long)]
    deg_cap: Option<usize>,
    #[arg(long)]
    op_cap: Option<usize>,
    #[arg(long)]
    levels: Option<u32>,
    /// Comma-separated caps, e.g. 32,64,128
    #[arg(long, value_delimiter = ',')]
    ladder: Option<Vec<usize>>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides { p: a.p, deg_cap: a.deg_cap, op_cap: a.op_cap, levels: a.levels, ladder: a.ladder }
    }
}

fn load_value(input: &Input, overrides: &Overrides) -> CliResult<serde_json::Value> {
    let mut v = match (&input.scenario, &input.builtin) {
        (Some(path), _) => dcap_cli::scenario::read_json(path)?,
        (None, Some(name)) => {
            let text = builtin_scenario(name).ok_or_else(|| CliError::Parse(format!("no built-in scenario {name:?}")))?;
            serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?
        }
        (None, None) => unreachable!("clap requires an input"),
    };
    overrides.apply(&mut v);
    Ok(v)
}

fn write_out(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Write { path: path.display().to_string(), source })
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { input, out, no_timing, overrides } => {
            let s = Scenario::from_value(load_value(&input, &overrides.into())?)?;
            let report = run_scenario(&s)?;
            let text = report.to_json(!no_timing);
            match out.or_else(|| s.out.clone().map(PathBuf::from)) {
                Some(path) => write_out(&path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Validate { input, overrides } => {
            let diags = validate(&load_value(&input, &overrides.into())?);
            for d in &diags {
                println!("{d}");
            }
            if diags.is_empty() {
                println!("ok");
            }
        }
        Command::List => print!("{}", list_builtins()),
        Command::Show { name } => {
            let text = builtin_scenario(&name).ok_or_else(|| CliError::Parse(format!("no built-in scenario {name:?}")))?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
