use std::fmt;

use super::analysis::{min_depths, reachable_from_start, UNREACHABLE_DEPTH};
use super::{Grammar, NtId};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Diagnostic {
    /// Referenced by `referenced_by` but has no rule.
    Undefined {
        name: String,
        referenced_by: String,
    },
    Unreachable {
        name: String,
    },
    /// No finite derivation exists.
    NonTerminating {
        name: String,
    },
}

impl Diagnostic {
    /// Unreachable rules are harmless to the engines; the other kinds are not.
    pub fn is_fatal(&self) -> bool {
        !matches!(self, Diagnostic::Unreachable { .. })
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::Undefined {
                name,
                referenced_by,
            } => write!(f, "undefined: <{name}> (referenced by <{referenced_by}>)"),
            Diagnostic::Unreachable { name } => write!(f, "unreachable: <{name}>"),
            Diagnostic::NonTerminating { name } => write!(f, "non-terminating: <{name}>"),
        }
    }
}

/// Structural checks. An empty result means every engine can use the grammar.
pub fn validate(g: &Grammar) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut reported = vec![false; g.symbol_count()];
    for rule in g.rules() {
        for prod in &rule.productions {
            for nt in prod.nonterminals() {
                if !g.is_defined(nt) && !reported[nt.0] {
                    reported[nt.0] = true;
                    out.push(Diagnostic::Undefined {
                        name: g.name(nt).to_string(),
                        referenced_by: rule.name.clone(),
                    });
                }
            }
        }
    }
    let reachable = reachable_from_start(g);
    for (i, rule) in g.rules().iter().enumerate() {
        if !reachable[i] {
            out.push(Diagnostic::Unreachable {
                name: rule.name.clone(),
            });
        }
    }
    let (depth_nt, _) = min_depths(g);
    for (i, rule) in g.rules().iter().enumerate() {
        if depth_nt[i] == UNREACHABLE_DEPTH {
            // a rule that only fails because it leans on an undefined
            // symbol is already reported above
            let leans_on_undefined = rule
                .productions
                .iter()
                .all(|p| p.nonterminals().any(|nt: NtId| !g.is_defined(nt)));
            if !leans_on_undefined {
                out.push(Diagnostic::NonTerminating {
                    name: rule.name.clone(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_bnf;

    #[test]
    fn undefined_reference() {
        let g = parse_bnf("<e> ::= <f>").unwrap();
        assert_eq!(
            validate(&g),
            vec![Diagnostic::Undefined {
                name: "f".into(),
                referenced_by: "e".into()
            }]
        );
    }

    #[test]
    fn non_terminating_rule() {
        let g = parse_bnf("<e> ::= <e>").unwrap();
        assert_eq!(
            validate(&g),
            vec![Diagnostic::NonTerminating { name: "e".into() }]
        );
    }

    #[test]
    fn unreachable_rule() {
        let g = parse_bnf("<e> ::= x\n<z> ::= y").unwrap();
        assert_eq!(
            validate(&g),
            vec![Diagnostic::Unreachable { name: "z".into() }]
        );
        assert!(!validate(&g)[0].is_fatal());
    }

    #[test]
    fn clean_grammar() {
        let g = parse_bnf("<e> ::= x | ( <e> <f> )\n<f> ::= y").unwrap();
        assert!(validate(&g).is_empty());
    }

    #[test]
    fn mutually_recursive_without_exit() {
        let g = parse_bnf("<e> ::= <f> | x\n<f> ::= ( <g> )\n<g> ::= <f>").unwrap();
        let d = validate(&g);
        assert_eq!(
            d,
            vec![
                Diagnostic::NonTerminating { name: "f".into() },
                Diagnostic::NonTerminating { name: "g".into() }
            ]
        );
    }
}
