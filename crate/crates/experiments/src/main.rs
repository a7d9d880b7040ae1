use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use squad_experiments::commands::{analyze, cost, decode_sim, disseminate_cmd, yield_dump, CostMode};
use squad_experiments::output::{Cell, Table};
use squad_experiments::settings::{CommonArgs, Settings};
use squad_experiments::validation::{run_all, run_one};
use squad_experiments::ExpError;

#[derive(Debug, Parser)]
#[command(name = "squadsim", version, about = "Doped fountain-code collection experiments on circular squad networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo collection and doped decoding; one row per trial plus summaries.
    DecodeSim {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Analytical doping prediction over the delta grid, or a yield pmf dump.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Dump P(Y = t) for this ripple intensity instead.
        #[arg(long = "yield-lambda")]
        yield_lambda: Option<f64>,
        #[arg(long = "t-max", default_value_t = 100)]
        t_max: usize,
    },
    /// Per-relay transmission counts of the dissemination schemes.
    Disseminate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Collection cost curves.
    Cost {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value_t = CostMode::Delta)]
        mode: CostMode,
        /// Take k_d from Monte Carlo means (--trials runs per delta).
        #[arg(long = "monte-carlo")]
        monte_carlo: bool,
    },
    /// Run the validation criteria; exits nonzero if any fails.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        /// Criterion name or number; repeatable. Default: all.
        #[arg(long)]
        criterion: Vec<String>,
        /// Divide every tolerance by this factor.
        #[arg(long, default_value_t = 1.0)]
        tighten: f64,
    },
}

fn emit(table: &Table, common: &CommonArgs) -> Result<(), ExpError> {
    match &common.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            table.write(&mut w)?;
            w.flush()?;
        }
        None => table.write(io::stdout().lock())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, ExpError> {
    match cli.command {
        Command::DecodeSim { common } => emit(&decode_sim(&Settings::resolve(&common)?)?, &common)?,
        Command::Analyze { common, yield_lambda, t_max } => {
            let s = Settings::resolve(&common)?;
            let table = match yield_lambda {
                Some(lambda) => yield_dump(&s, lambda, t_max)?,
                None => analyze(&s)?,
            };
            emit(&table, &common)?;
        }
        Command::Disseminate { common } => emit(&disseminate_cmd(&Settings::resolve(&common)?)?, &common)?,
        Command::Cost { common, mode, monte_carlo } => emit(&cost(&Settings::resolve(&common)?, mode, monte_carlo)?, &common)?,
        Command::Validate { common, criterion, tighten } => {
            if !(tighten > 0.0) {
                return Err(ExpError::Usage(format!("--tighten must be positive, got {tighten}")));
            }
            let verdicts = if criterion.is_empty() {
                run_all(tighten)?
            } else {
                criterion.iter().map(|c| run_one(c, tighten)).collect::<Result<_, _>>()?
            };
            for v in &verdicts {
                eprintln!("{v}");
            }
            let mut table = Table::new(vec!["id", "criterion", "passed", "measured"]);
            table.meta("command", "validate");
            table.meta("tighten", tighten);
            for v in &verdicts {
                table.push(vec![Cell::from(v.id as usize), v.name.into(), v.passed.into(), v.measured.clone().into()]);
            }
            emit(&table, &common)?;
            return Ok(verdicts.iter().all(|v| v.passed));
        }
    }
    Ok(true)
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
