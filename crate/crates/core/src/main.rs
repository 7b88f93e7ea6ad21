use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ggec::harness::{
    grammar_command, plot_csv, run_experiment, ExperimentSpec, HarnessError, RunOptions,
};

#[derive(Parser)]
#[command(
    name = "ggec",
    version,
    about = "Grammar-guided evolutionary computation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment spec (TOML).
    Run {
        spec: PathBuf,
        /// Recompute cells that already have records.
        #[arg(long)]
        force: bool,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Plot mean curves with 95% confidence ribbons from a results CSV.
    Plot {
        csv: PathBuf,
        /// Output directory (default: the CSV's directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "best_so_far")]
        statistic: String,
    },
    /// Grammar analysis and transforms.
    Grammar {
        #[arg(value_enum)]
        action: GrammarAction,
        file: PathBuf,
        /// Non-terminal for `balance` and `inline`.
        nonterminal: Option<String>,
        /// Depth cap for `bias`.
        #[arg(long, default_value_t = 10)]
        depth: u32,
        /// Write the output here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GrammarAction {
    Analyze,
    Balance,
    Inline,
    Unlink,
    Bias,
}

impl GrammarAction {
    fn name(self) -> &'static str {
        match self {
            GrammarAction::Analyze => "analyze",
            GrammarAction::Balance => "balance",
            GrammarAction::Inline => "inline",
            GrammarAction::Unlink => "unlink",
            GrammarAction::Bias => "bias",
        }
    }
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { spec, force, jobs } => {
            let s = ExperimentSpec::load(&spec)?;
            let base = spec.parent().unwrap_or(Path::new("."));
            let summary = run_experiment(&s, base, &RunOptions { force, jobs })?;
            println!(
                "{}: {} computed, {} reused, results in {}",
                s.name,
                summary.computed,
                summary.skipped,
                summary.output_dir.display()
            );
        }
        Command::Plot {
            csv,
            out,
            statistic,
        } => {
            let dir = out.unwrap_or_else(|| csv.parent().unwrap_or(Path::new(".")).to_path_buf());
            for p in plot_csv(&csv, &dir, &statistic)? {
                println!("{}", p.display());
            }
        }
        Command::Grammar {
            action,
            file,
            nonterminal,
            depth,
            out,
        } => {
            let text = grammar_command(action.name(), &file, nonterminal.as_deref(), depth)?;
            match out {
                Some(p) => std::fs::write(&p, text)
                    .map_err(|e| HarnessError::internal(format!("{}: {e}", p.display())))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
