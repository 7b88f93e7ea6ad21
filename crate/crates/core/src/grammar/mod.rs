//! Context-free grammars in the BNF dialect used throughout the crate.
//!
//! A [`Grammar`] is an ordered list of rules. Production order inside a rule
//! is significant: GE chooses productions by `codon mod k`, so reordering
//! alternatives changes every mapped phenotype.
//!
//! Non-terminals are interned into [`NtId`]s. Defined rules occupy ids
//! `0..rules().len()` in source order; names that are referenced but never
//! defined receive the following ids so that [`validate`] can report them.

mod analysis;
mod parse;
mod validate;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use analysis::{analyze, GrammarAnalysis, UNREACHABLE_DEPTH};
pub use parse::parse_bnf;
pub use validate::{validate, Diagnostic};

/// Index of a non-terminal within a [`Grammar`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NtId(pub usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("rule <{name}> is defined more than once (line {line})")]
    DuplicateRule { name: String, line: usize },
    #[error("grammar has no rules")]
    Empty,
    #[error("rule <{0}> has no productions")]
    NoProductions(String),
    #[error("rule <{0}> has an empty production")]
    EmptyProduction(String),
    #[error("invalid codon value terminal: {0}")]
    InvalidCodonValue(String),
    #[error("non-terminal <{0}> is referenced but never defined")]
    Undefined(String),
    #[error("non-terminal <{0}> cannot derive a finite string")]
    NonTerminating(String),
    #[error("unknown non-terminal <{0}>")]
    UnknownNonTerminal(String),
}

/// The `<GECodonValue{low : high : step}>` terminal: a constant drawn from
/// an evenly spaced grid `low, low + step, ..., high`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CodonRange {
    pub low: f64,
    pub high: f64,
    pub step: f64,
    /// Decimal places used when rounding and printing grid values.
    pub decimals: u8,
}

impl CodonRange {
    pub fn new(low: f64, high: f64, step: f64, decimals: u8) -> Result<Self, GrammarError> {
        let bad = |why: &str| {
            Err(GrammarError::InvalidCodonValue(format!(
                "{{{low} : {high} : {step}}} {why}"
            )))
        };
        if !(low.is_finite() && high.is_finite() && step.is_finite()) {
            return bad("has non-finite bounds");
        }
        if low >= high {
            return bad("requires low < high");
        }
        if step <= 0.0 {
            return bad("requires step > 0");
        }
        let steps = (high - low) / step;
        if (steps - steps.round()).abs() > 1e-9 {
            return bad("requires (high - low) / step to be integral");
        }
        Ok(CodonRange {
            low,
            high,
            step,
            decimals,
        })
    }

    /// Infers the printing precision from the way `step` is written,
    /// e.g. `0.001` gives three decimals.
    pub fn from_text(low: &str, high: &str, step: &str) -> Result<Self, GrammarError> {
        let num = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| {
                GrammarError::InvalidCodonValue(format!("'{}' is not a number", s.trim()))
            })
        };
        let decimals = step
            .trim()
            .split_once('.')
            .map(|(_, frac)| frac.len())
            .unwrap_or(0)
            .min(12) as u8;
        Self::new(num(low)?, num(high)?, num(step)?, decimals)
    }

    /// Number of grid points.
    pub fn grid_len(&self) -> u64 {
        ((self.high - self.low) / self.step).round() as u64 + 1
    }

    /// Grid value at `index` (taken modulo the grid size), rounded to the
    /// configured precision.
    pub fn value_at(&self, index: u64) -> f64 {
        let raw = self.low + (index % self.grid_len()) as f64 * self.step;
        round_to(raw, self.decimals)
    }

    /// Grid index of `value`, or `None` when it is off the grid.
    pub fn index_of(&self, value: f64) -> Option<u64> {
        if !value.is_finite() {
            return None;
        }
        let idx = ((value - self.low) / self.step).round();
        if idx < 0.0 || idx as u64 >= self.grid_len() {
            return None;
        }
        let idx = idx as u64;
        let tolerance = 1e-6 * self.step;
        if (self.value_at(idx) - value).abs() <= tolerance {
            Some(idx)
        } else {
            None
        }
    }

    pub fn format_value(&self, value: f64) -> String {
        format!("{:.*}", self.decimals as usize, value)
    }
}

impl fmt::Display for CodonRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.decimals as usize;
        write!(
            f,
            "<GECodonValue{{{:.*} : {:.*} : {:.*}}}>",
            d, self.low, d, self.high, d, self.step
        )
    }
}

pub(crate) fn round_to(value: f64, decimals: u8) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let r = (value * scale).round() / scale;
    // avoid printing "-0.000"
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Symbol {
    NonTerminal(NtId),
    Literal(Arc<str>),
    CodonValue(CodonRange),
}

impl Symbol {
    pub fn as_nonterminal(&self) -> Option<NtId> {
        match self {
            Symbol::NonTerminal(id) => Some(*id),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Production {
    pub symbols: Vec<Symbol>,
}

impl Production {
    pub fn nonterminals(&self) -> impl Iterator<Item = NtId> + '_ {
        self.symbols.iter().filter_map(Symbol::as_nonterminal)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub name: String,
    pub productions: Vec<Production>,
}

/// Name-based symbol used to assemble grammars before ids are assigned.
#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Nt(String),
    Lit(String),
    Codon(CodonRange),
}

impl Item {
    pub fn nt(name: impl Into<String>) -> Self {
        Item::Nt(name.into())
    }
    pub fn lit(text: impl Into<String>) -> Self {
        Item::Lit(text.into())
    }
}

/// Collects rules by name and interns them into a [`Grammar`].
/// The first rule added becomes the start symbol.
#[derive(Clone, Debug, Default)]
pub struct GrammarBuilder {
    rules: Vec<(String, Vec<Vec<Item>>)>,
}

impl GrammarBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rule<I, P>(mut self, name: impl Into<String>, productions: I) -> Self
    where
        I: IntoIterator<Item = P>,
        P: IntoIterator<Item = Item>,
    {
        self.push(name, productions);
        self
    }

    pub fn push<I, P>(&mut self, name: impl Into<String>, productions: I)
    where
        I: IntoIterator<Item = P>,
        P: IntoIterator<Item = Item>,
    {
        self.rules.push((
            name.into(),
            productions
                .into_iter()
                .map(|p| p.into_iter().collect())
                .collect(),
        ));
    }

    pub fn build(self) -> Result<Grammar, GrammarError> {
        if self.rules.is_empty() {
            return Err(GrammarError::Empty);
        }
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, NtId> = HashMap::new();
        for (line, (name, prods)) in self.rules.iter().enumerate() {
            if index.contains_key(name) {
                return Err(GrammarError::DuplicateRule {
                    name: name.clone(),
                    line: line + 1,
                });
            }
            if prods.is_empty() {
                return Err(GrammarError::NoProductions(name.clone()));
            }
            index.insert(name.clone(), NtId(names.len()));
            names.push(name.clone());
        }
        let mut literals: HashMap<String, Arc<str>> = HashMap::new();
        let mut rules = Vec::with_capacity(self.rules.len());
        for (name, prods) in self.rules {
            let mut productions = Vec::with_capacity(prods.len());
            for items in prods {
                if items.is_empty() {
                    return Err(GrammarError::EmptyProduction(name));
                }
                let symbols = items
                    .into_iter()
                    .map(|item| match item {
                        Item::Nt(n) => {
                            let next = NtId(names.len());
                            let id = *index.entry(n.clone()).or_insert_with(|| {
                                names.push(n);
                                next
                            });
                            Symbol::NonTerminal(id)
                        }
                        Item::Lit(t) => Symbol::Literal(
                            literals
                                .entry(t.clone())
                                .or_insert_with(|| Arc::from(t.as_str()))
                                .clone(),
                        ),
                        Item::Codon(r) => Symbol::CodonValue(r),
                    })
                    .collect();
                productions.push(Production { symbols });
            }
            rules.push(Rule { name, productions });
        }
        Ok(Grammar {
            names,
            rules,
            start: NtId(0),
            index,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Grammar {
    names: Vec<String>,
    rules: Vec<Rule>,
    start: NtId,
    index: HashMap<String, NtId>,
}

impl PartialEq for Grammar {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.rules == other.rules && self.start == other.start
    }
}

impl Grammar {
    pub fn builder() -> GrammarBuilder {
        GrammarBuilder::new()
    }

    pub fn start(&self) -> NtId {
        self.start
    }

    /// Defined rules in source order; `rules()[i]` belongs to `NtId(i)`.
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: NtId) -> Option<&Rule> {
        self.rules.get(id.0)
    }

    /// Productions of a defined non-terminal.
    ///
    /// Panics on undefined ids; engines only run on validated grammars.
    pub fn productions(&self, id: NtId) -> &[Production] {
        &self.rules[id.0].productions
    }

    pub fn is_defined(&self, id: NtId) -> bool {
        id.0 < self.rules.len()
    }

    pub fn name(&self, id: NtId) -> &str {
        &self.names[id.0]
    }

    /// Number of interned non-terminal names, including undefined ones.
    pub fn symbol_count(&self) -> usize {
        self.names.len()
    }

    pub fn id(&self, name: &str) -> Option<NtId> {
        self.index.get(name).copied()
    }

    /// Looks up a defined non-terminal by name.
    pub fn rule_id(&self, name: &str) -> Result<NtId, GrammarError> {
        self.id(name)
            .filter(|id| self.is_defined(*id))
            .ok_or_else(|| GrammarError::UnknownNonTerminal(name.to_string()))
    }

    /// Total number of productions summed over all rules.
    pub fn production_count(&self) -> usize {
        self.rules.iter().map(|r| r.productions.len()).sum()
    }

    /// Converts back into name-based rules, in source order.
    pub fn to_items(&self) -> Vec<(String, Vec<Vec<Item>>)> {
        self.rules
            .iter()
            .map(|rule| {
                let prods = rule
                    .productions
                    .iter()
                    .map(|p| p.symbols.iter().map(|s| self.item(s)).collect())
                    .collect();
                (rule.name.clone(), prods)
            })
            .collect()
    }

    pub fn item(&self, symbol: &Symbol) -> Item {
        match symbol {
            Symbol::NonTerminal(id) => Item::Nt(self.names[id.0].clone()),
            Symbol::Literal(t) => Item::Lit(t.to_string()),
            Symbol::CodonValue(r) => Item::Codon(*r),
        }
    }

    pub fn from_items(rules: Vec<(String, Vec<Vec<Item>>)>) -> Result<Self, GrammarError> {
        let mut b = GrammarBuilder::new();
        for (name, prods) in rules {
            b.push(name, prods);
        }
        b.build()
    }

    /// Canonical BNF text: one rule per line, alternatives separated by ` | `.
    pub fn render(&self) -> String {
        self.to_string()
    }

    pub fn render_symbol(&self, symbol: &Symbol) -> String {
        match symbol {
            Symbol::NonTerminal(id) => format!("<{}>", self.names[id.0]),
            Symbol::Literal(t) => render_literal(t),
            Symbol::CodonValue(r) => r.to_string(),
        }
    }

    pub fn render_production(&self, production: &Production) -> String {
        production
            .symbols
            .iter()
            .map(|s| self.render_symbol(s))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn render_literal(text: &str) -> String {
    let bare = !text.is_empty()
        && !text.chars().any(char::is_whitespace)
        && !text.contains('|')
        && !text.starts_with('"')
        && !text.starts_with('\'')
        && !text.starts_with('<')
        && text != "::=";
    if bare {
        text.to_string()
    } else if text.contains('"') {
        format!("'{text}'")
    } else {
        format!("\"{text}\"")
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            let alts = rule
                .productions
                .iter()
                .map(|p| self.render_production(p))
                .collect::<Vec<_>>()
                .join(" | ");
            writeln!(f, "<{}> ::= {}", rule.name, alts)?;
        }
        Ok(())
    }
}
