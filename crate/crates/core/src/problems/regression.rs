use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Problem, ProblemError, WORST_FITNESS};
use crate::derivation::{DerivationTree, Leaf};
use crate::grammar::{CodonRange, Grammar, Item};
use crate::transform::balance;

/// Binary prefix operators understood by the evaluator.
pub const BINARY_OPS: &[&str] = &["+", "-", "*", "/", "pow"];
/// Unary prefix functions understood by the evaluator.
pub const UNARY_OPS: &[&str] = &["sqrt", "log", "exp", "sin", "cos", "tanh", "neg", "inv"];

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Var(usize),
    Const(f64),
    Unary(&'static str, Box<Expr>),
    Binary(&'static str, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Unprotected arithmetic: division by zero, log of negatives and the
    /// like produce non-finite values.
    pub fn eval(&self, row: &[f64]) -> f64 {
        match self {
            Expr::Var(i) => row[*i],
            Expr::Const(c) => *c,
            Expr::Unary(op, a) => {
                let a = a.eval(row);
                match *op {
                    "sqrt" => a.sqrt(),
                    "log" => a.ln(),
                    "exp" => a.exp(),
                    "sin" => a.sin(),
                    "cos" => a.cos(),
                    "tanh" => a.tanh(),
                    "neg" => -a,
                    "inv" => 1.0 / a,
                    _ => unreachable!(),
                }
            }
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(row), b.eval(row));
                match *op {
                    "+" => a + b,
                    "-" => a - b,
                    "*" => a * b,
                    "/" => a / b,
                    "pow" => a.powf(b),
                    _ => unreachable!(),
                }
            }
        }
    }
}

/// Compiles the prefix-notation yield of `tree` into an [`Expr`].
/// Variables are resolved against `variables`; numeric literals and codon
/// constants become constants.
pub fn compile_expression(
    tree: &DerivationTree,
    variables: &[String],
) -> Result<Expr, ProblemError> {
    let leaves = tree.leaves();
    let mut pos = 0;
    let e = parse_expr(&leaves, &mut pos, variables)?;
    if pos != leaves.len() {
        return Err(ProblemError::Malformed(
            "trailing tokens after expression".into(),
        ));
    }
    Ok(e)
}

fn parse_expr(leaves: &[Leaf<'_>], pos: &mut usize, vars: &[String]) -> Result<Expr, ProblemError> {
    let tok = leaves
        .get(*pos)
        .ok_or_else(|| ProblemError::Malformed("unexpected end of expression".into()))?;
    *pos += 1;
    match *tok {
        Leaf::Constant(v) => Ok(Expr::Const(v)),
        Leaf::Literal("(") => {
            let op = match leaves.get(*pos) {
                Some(Leaf::Literal(op)) => *op,
                _ => {
                    return Err(ProblemError::Malformed(
                        "expected operator after '('".into(),
                    ))
                }
            };
            *pos += 1;
            let e = if let Some(b) = BINARY_OPS.iter().find(|o| **o == op) {
                let l = parse_expr(leaves, pos, vars)?;
                let r = parse_expr(leaves, pos, vars)?;
                Expr::Binary(b, Box::new(l), Box::new(r))
            } else if let Some(u) = UNARY_OPS.iter().find(|o| **o == op) {
                Expr::Unary(u, Box::new(parse_expr(leaves, pos, vars)?))
            } else {
                return Err(ProblemError::UnknownTerminal(op.to_string()));
            };
            match leaves.get(*pos) {
                Some(Leaf::Literal(")")) => {
                    *pos += 1;
                    Ok(e)
                }
                _ => Err(ProblemError::Malformed("expected ')'".into())),
            }
        }
        Leaf::Literal(t) => {
            if let Some(i) = vars.iter().position(|v| v == t) {
                Ok(Expr::Var(i))
            } else if let Ok(v) = t.parse::<f64>() {
                Ok(Expr::Const(v))
            } else {
                Err(ProblemError::UnknownTerminal(t.to_string()))
            }
        }
    }
}

/// Evaluates `tree` on one row of variable values.
pub fn eval_expression(
    tree: &DerivationTree,
    variables: &[String],
    row: &[f64],
) -> Result<f64, ProblemError> {
    Ok(compile_expression(tree, variables)?.eval(row))
}

/// Harmonic number `1 + 1/2 + ... + 1/x`.
pub fn keijzer6(x: u32) -> Result<f64, ProblemError> {
    if x < 1 {
        return Err(ProblemError::Domain("keijzer6 needs x >= 1".into()));
    }
    Ok((1..=x).map(|i| 1.0 / i as f64).sum())
}

/// `10 / (5 + sum (x_i - 3)^2)` over five inputs.
pub fn vladislavleva4(x: &[f64]) -> Result<f64, ProblemError> {
    if x.len() != 5 {
        return Err(ProblemError::Domain(format!(
            "vladislavleva4 takes 5 inputs, got {}",
            x.len()
        )));
    }
    let s: f64 = x.iter().map(|v| (v - 3.0).powi(2)).sum();
    Ok(10.0 / (5.0 + s))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrammarDesign {
    /// Structured: separate operator, function, variable and constant rules.
    G0,
    /// Compromise: operators folded into `<expr>`, one `<term>` rule for
    /// variables and constants, balanced by duplicating `<term>`.
    G6,
}

/// Builds the prefix regression grammar for the given variables and
/// operator sets.
pub fn regression_grammar(
    design: GrammarDesign,
    variables: &[&str],
    binary: &[&str],
    unary: &[&str],
) -> Grammar {
    let constant = Item::Codon(CodonRange::new(-1.0, 1.0, 0.001, 3).expect("valid range"));
    let lit = |s: &str| Item::lit(s);
    let e = || Item::nt("expr");
    match design {
        GrammarDesign::G0 => Grammar::builder()
            .rule(
                "expr",
                [
                    vec![lit("("), Item::nt("op"), e(), e(), lit(")")],
                    vec![lit("("), Item::nt("fn"), e(), lit(")")],
                    vec![Item::nt("var")],
                    vec![Item::nt("const")],
                ],
            )
            .rule("op", binary.iter().map(|o| vec![lit(o)]))
            .rule("fn", unary.iter().map(|o| vec![lit(o)]))
            .rule("var", variables.iter().map(|v| vec![lit(v)]))
            .rule("const", [vec![constant]])
            .build()
            .expect("well-formed regression grammar"),
        GrammarDesign::G6 => {
            let mut expr: Vec<Vec<Item>> = binary
                .iter()
                .map(|o| vec![lit("("), lit(o), e(), e(), lit(")")])
                .collect();
            expr.extend(unary.iter().map(|o| vec![lit("("), lit(o), e(), lit(")")]));
            expr.push(vec![Item::nt("term")]);
            let mut terms: Vec<Vec<Item>> = variables.iter().map(|v| vec![lit(v)]).collect();
            terms.push(vec![constant]);
            let g = Grammar::builder()
                .rule("expr", expr)
                .rule("term", terms)
                .build()
                .expect("well-formed regression grammar");
            balance(&g, "expr").expect("expr has both classes")
        }
    }
}

/// Symbolic regression scored by training RMSE.
#[derive(Clone, Debug)]
pub struct RegressionProblem {
    name: String,
    variables: Vec<String>,
    train_x: Vec<Vec<f64>>,
    train_y: Vec<f64>,
    test_x: Vec<Vec<f64>>,
    test_y: Vec<f64>,
}

impl RegressionProblem {
    pub fn new(
        name: impl Into<String>,
        variables: Vec<String>,
        train: (Vec<Vec<f64>>, Vec<f64>),
        test: (Vec<Vec<f64>>, Vec<f64>),
    ) -> Self {
        RegressionProblem {
            name: name.into(),
            variables,
            train_x: train.0,
            train_y: train.1,
            test_x: test.0,
            test_y: test.1,
        }
    }

    /// Train on `x in 1..=50`, test on `x in 1..=120`.
    pub fn keijzer6() -> Self {
        let data = |n: u32| {
            let xs: Vec<Vec<f64>> = (1..=n).map(|x| vec![x as f64]).collect();
            let ys = (1..=n).map(|x| keijzer6(x).expect("x >= 1")).collect();
            (xs, ys)
        };
        Self::new("keijzer6", vec!["x0".into()], data(50), data(120))
    }

    /// 1024 training points uniform in `[0.05, 6.05]^5`, 5000 test points
    /// uniform in `[-0.25, 6.35]^5`, drawn from `data_seed`.
    pub fn vladislavleva4(data_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
        let mut sample = |n: usize, lo: f64, hi: f64| {
            let xs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..5).map(|_| rng.gen_range(lo..=hi)).collect())
                .collect();
            let ys = xs
                .iter()
                .map(|x| vladislavleva4(x).expect("arity 5"))
                .collect();
            (xs, ys)
        };
        let train = sample(1024, 0.05, 6.05);
        let test = sample(5000, -0.25, 6.35);
        let vars = (0..5).map(|i| format!("x{i}")).collect();
        Self::new("vladislavleva4", vars, train, test)
    }

    pub fn from_dataset(name: impl Into<String>, d: &Dataset) -> Self {
        let pick = |idx: &[usize]| {
            (
                idx.iter().map(|&i| d.features[i].clone()).collect(),
                idx.iter().map(|&i| d.target[i]).collect(),
            )
        };
        Self::new(name, d.names.clone(), pick(&d.train), pick(&d.test))
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn train_targets(&self) -> &[f64] {
        &self.train_y
    }

    fn rmse(&self, tree: &DerivationTree, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
        let Ok(expr) = compile_expression(tree, &self.variables) else {
            return WORST_FITNESS;
        };
        if ys.is_empty() {
            return WORST_FITNESS;
        }
        let mut sse = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            let d = expr.eval(x) - y;
            sse += d * d;
        }
        let r = (sse / ys.len() as f64).sqrt();
        if r.is_finite() {
            r
        } else {
            WORST_FITNESS
        }
    }
}

impl Problem for RegressionProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn fitness(&self, tree: &DerivationTree) -> f64 {
        self.rmse(tree, &self.train_x, &self.train_y)
    }

    fn test_error(&self, tree: &DerivationTree) -> Option<f64> {
        if self.test_y.is_empty() {
            None
        } else {
            Some(self.rmse(tree, &self.test_x, &self.test_y))
        }
    }

    fn knows_terminal(&self, token: &str) -> bool {
        matches!(token, "(" | ")")
            || BINARY_OPS.contains(&token)
            || UNARY_OPS.contains(&token)
            || self.variables.iter().any(|v| v == token)
            || token.parse::<f64>().is_ok()
    }
}
