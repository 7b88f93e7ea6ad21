//! Fitness environments. Every problem scores a derivation tree directly;
//! lower fitness is better.

mod ant;
mod dataset;
mod regression;

use thiserror::Error;

use crate::derivation::DerivationTree;
use crate::grammar::{Grammar, Symbol};

pub use ant::{
    compile_ant, run_ant, AntOutcome, AntProblem, Heading, Stmt, TrailWorld, SANTA_FE_TRAIL,
};
pub use dataset::{load_csv, parse_csv, Dataset, DatasetError};
pub use regression::{
    compile_expression, eval_expression, keijzer6, regression_grammar, vladislavleva4, Expr,
    GrammarDesign, RegressionProblem, BINARY_OPS, UNARY_OPS,
};

/// Fitness assigned to invalid individuals and non-finite model output.
/// Strictly worse than any finite fitness.
pub const WORST_FITNESS: f64 = f64::INFINITY;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("unknown terminal '{0}'")]
    UnknownTerminal(String),
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("{0}")]
    Domain(String),
}

pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    /// Training fitness. Trees the problem cannot interpret, or whose output
    /// is not finite, get [`WORST_FITNESS`].
    fn fitness(&self, tree: &DerivationTree) -> f64;

    /// Out-of-sample error, when the problem has a test set.
    fn test_error(&self, _tree: &DerivationTree) -> Option<f64> {
        None
    }

    /// Whether `token` is a terminal this problem can interpret.
    fn knows_terminal(&self, token: &str) -> bool;

    /// Every literal of `g` must be interpretable by the problem.
    fn check_grammar(&self, g: &Grammar) -> Result<(), ProblemError> {
        for rule in g.rules() {
            for p in &rule.productions {
                for s in &p.symbols {
                    if let Symbol::Literal(t) = s {
                        if !self.knows_terminal(t) {
                            return Err(ProblemError::UnknownTerminal(t.to_string()));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
