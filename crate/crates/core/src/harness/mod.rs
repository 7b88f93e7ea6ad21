//! Experiment orchestration behind the `ggec` command line: experiment
//! specs, the run grid, result tables, plots and grammar tooling.

mod plot;
mod runner;
mod spec;

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::grammar::{analyze, parse_bnf, validate, Grammar, NtId};
use crate::transform::{balance, bias_report, inline_nonterminal, unlink};

pub use plot::{panels, plot_csv, read_results, render_svg, Line, Panel, ResultRow};
pub use runner::{
    config_hash, record_path, run_experiment, write_results_csv, CellRun, RunOptions, RunRecord,
    RunSummary, CSV_HEADER,
};
pub use spec::{
    load_grammar, EngineOverrides, ExperimentSpec, MethodName, NamedGrammar, ProblemSpec,
    OUTPUT_DIR_ENV,
};

/// Errors carry the process exit code: 1 for problems with the user's
/// input, 2 for everything else.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    User(String),
    #[error("{0}")]
    Internal(String),
}

impl HarnessError {
    pub fn user(msg: impl Into<String>) -> Self {
        HarnessError::User(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        HarnessError::Internal(msg.into())
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        HarnessError::Internal(format!("{}: {e}", path.display()))
    }

    pub fn message(&self) -> &str {
        match self {
            HarnessError::User(m) | HarnessError::Internal(m) => m,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::User(_) => 1,
            HarnessError::Internal(_) => 2,
        }
    }
}

/// Reads and parses a grammar file, prefixing errors with the path.
pub fn read_grammar(path: &Path) -> Result<Grammar, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::user(format!("{}: {e}", path.display())))?;
    parse_bnf(&text).map_err(|e| HarnessError::user(format!("{}: {e}", path.display())))
}

/// Human-readable analysis: diagnostics, then every rule with its minimum
/// depth and each production's minimum depth and recursion flag.
pub fn analyze_report(g: &Grammar) -> Result<String, HarnessError> {
    let mut out = String::new();
    let diags = validate(g);
    for d in &diags {
        let _ = writeln!(
            out,
            "{}: {d}",
            if d.is_fatal() { "error" } else { "warning" }
        );
    }
    if diags.iter().any(|d| d.is_fatal()) {
        return Err(HarnessError::user(out.trim_end().to_string()));
    }
    let a = analyze(g).map_err(|e| HarnessError::user(e.to_string()))?;
    for (i, rule) in g.rules().iter().enumerate() {
        let id = NtId(i);
        let _ = writeln!(
            out,
            "<{}> min depth {}{}",
            rule.name,
            a.min_depth(id),
            if a.is_reachable(id) {
                ""
            } else {
                " (unreachable)"
            }
        );
        for (j, p) in rule.productions.iter().enumerate() {
            let _ = writeln!(
                out,
                "  [{j}] depth {:>2}{}  {}",
                a.min_depth_prod(id, j),
                if a.is_recursive(id, j) {
                    "  recursive"
                } else {
                    ""
                },
                g.render_production(p)
            );
        }
    }
    Ok(out)
}

/// Runs a `grammar` subcommand on `path` and returns its output text.
pub fn grammar_command(
    sub: &str,
    path: &Path,
    nonterminal: Option<&str>,
    depth: u32,
) -> Result<String, HarnessError> {
    let g = read_grammar(path)?;
    let ctx = |e: crate::transform::TransformError| {
        HarnessError::user(format!("{}: {e}", path.display()))
    };
    let need_nt = || {
        nonterminal.ok_or_else(|| HarnessError::user(format!("'{sub}' needs a non-terminal name")))
    };
    Ok(match sub {
        "analyze" => analyze_report(&g)?,
        "balance" => balance(&g, need_nt()?).map_err(ctx)?.render(),
        "inline" => inline_nonterminal(&g, need_nt()?).map_err(ctx)?.render(),
        "unlink" => unlink(&g).map_err(ctx)?.render(),
        "bias" => {
            let r = bias_report(&g, depth).map_err(ctx)?;
            let mut out = String::from("termination mass\n");
            for (k, v) in &r.termination_mass {
                let _ = writeln!(out, "  <{k}> {v:.4}");
            }
            out.push_str("terminal sampling\n");
            for (k, v) in &r.terminal_sampling {
                let _ = writeln!(out, "  {k} {v:.4}");
            }
            out.push_str("codon linkage\n");
            for (k, v) in &r.codon_linkage {
                let _ = writeln!(out, "  <{k}> {v}");
            }
            out
        }
        other => {
            return Err(HarnessError::user(format!(
                "unknown grammar command '{other}'"
            )))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn ant_report_shows_depth_five_chain() {
        let r = analyze_report(&corpus::ant_grammar(0)).unwrap();
        assert!(r.contains("<line> min depth 3"), "{r}");
        assert!(r.contains("[0] depth  5  recursive  <condition>"), "{r}");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(HarnessError::user("x").exit_code(), 1);
        assert_eq!(HarnessError::internal("x").exit_code(), 2);
    }
}
