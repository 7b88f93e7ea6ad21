//! Minimum termination depths, recursion and reachability.
//!
//! Depth convention: the depth of a derivation tree is the number of nodes
//! on its longest root-to-leaf path. The root non-terminal counts as 1 and
//! terminals (literals and codon values) are leaves, so `<e> ::= x` yields a
//! tree of depth 2. Under this convention the `<line> ::= <condition>`
//! production of the O'Neill–Ryan Santa Fe grammar needs depth 5.

use super::{Grammar, GrammarError, NtId, Symbol};
use crate::grammar::validate::{validate, Diagnostic};

/// Marker for "no finite derivation".
pub const UNREACHABLE_DEPTH: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct GrammarAnalysis {
    min_depth_nt: Vec<u32>,
    min_depth_prod: Vec<Vec<u32>>,
    recursive_prod: Vec<Vec<bool>>,
    reachable: Vec<bool>,
    /// `derives[a][b]`: some derivation from `a` contains `b`.
    derives: Vec<Vec<bool>>,
}

impl GrammarAnalysis {
    /// Smallest depth of a complete tree rooted at `nt`.
    pub fn min_depth(&self, nt: NtId) -> u32 {
        self.min_depth_nt[nt.0]
    }

    /// Smallest depth of a complete tree rooted at `nt` that uses production `prod` at the root.
    pub fn min_depth_prod(&self, nt: NtId, prod: usize) -> u32 {
        self.min_depth_prod[nt.0][prod]
    }

    pub fn prod_depths(&self, nt: NtId) -> &[u32] {
        &self.min_depth_prod[nt.0]
    }

    /// Largest per-production minimum depth of `nt`.
    pub fn max_prod_depth(&self, nt: NtId) -> u32 {
        self.min_depth_prod[nt.0].iter().copied().max().unwrap_or(0)
    }

    /// Whether production `prod` of `nt` can derive `nt` again.
    pub fn is_recursive(&self, nt: NtId, prod: usize) -> bool {
        self.recursive_prod[nt.0][prod]
    }

    pub fn recursive_flags(&self, nt: NtId) -> &[bool] {
        &self.recursive_prod[nt.0]
    }

    pub fn is_reachable(&self, nt: NtId) -> bool {
        self.reachable[nt.0]
    }

    /// Whether some derivation from `from` contains `to` (in one or more steps).
    pub fn derives(&self, from: NtId, to: NtId) -> bool {
        self.derives[from.0][to.0]
    }

    pub fn reachable(&self) -> impl Iterator<Item = NtId> + '_ {
        self.reachable
            .iter()
            .enumerate()
            .filter(|(_, r)| **r)
            .map(|(i, _)| NtId(i))
    }
}

/// Fixed-point minimum depths for every defined rule and production.
/// Depths only decrease from "infinity", so iteration converges.
pub(crate) fn min_depths(g: &Grammar) -> (Vec<u32>, Vec<Vec<u32>>) {
    let n = g.rules().len();
    let mut nt = vec![UNREACHABLE_DEPTH; n];
    let mut prod: Vec<Vec<u32>> = g
        .rules()
        .iter()
        .map(|r| vec![UNREACHABLE_DEPTH; r.productions.len()])
        .collect();
    loop {
        let mut changed = false;
        for (i, rule) in g.rules().iter().enumerate() {
            for (j, p) in rule.productions.iter().enumerate() {
                let mut deepest = 1u32;
                for s in &p.symbols {
                    if let Symbol::NonTerminal(id) = s {
                        let d = if g.is_defined(*id) {
                            nt[id.0]
                        } else {
                            UNREACHABLE_DEPTH
                        };
                        deepest = deepest.max(d);
                    }
                }
                let d = if deepest == UNREACHABLE_DEPTH {
                    UNREACHABLE_DEPTH
                } else {
                    deepest + 1
                };
                if d < prod[i][j] {
                    prod[i][j] = d;
                    changed = true;
                }
                if d < nt[i] {
                    nt[i] = d;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (nt, prod)
}

fn direct_edges(g: &Grammar) -> Vec<Vec<bool>> {
    let n = g.rules().len();
    let mut edges = vec![vec![false; n]; n];
    for (i, rule) in g.rules().iter().enumerate() {
        for p in &rule.productions {
            for b in p.nonterminals() {
                if g.is_defined(b) {
                    edges[i][b.0] = true;
                }
            }
        }
    }
    edges
}

fn closure(mut m: Vec<Vec<bool>>) -> Vec<Vec<bool>> {
    let n = m.len();
    for k in 0..n {
        for i in 0..n {
            if m[i][k] {
                let row = m[k].clone();
                for (cell, via) in m[i].iter_mut().zip(row) {
                    *cell |= via;
                }
            }
        }
    }
    m
}

pub(crate) fn reachable_from_start(g: &Grammar) -> Vec<bool> {
    let edges = direct_edges(g);
    let mut seen = vec![false; g.rules().len()];
    let mut stack = vec![g.start().0];
    seen[g.start().0] = true;
    while let Some(i) = stack.pop() {
        for (j, &e) in edges[i].iter().enumerate() {
            if e && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

/// Computes the [`GrammarAnalysis`]. Fails on undefined references or
/// non-terminating rules; unreachable rules are analysed normally.
pub fn analyze(g: &Grammar) -> Result<GrammarAnalysis, GrammarError> {
    for d in validate(g) {
        match d {
            Diagnostic::Undefined { name, .. } => return Err(GrammarError::Undefined(name)),
            Diagnostic::NonTerminating { name } => return Err(GrammarError::NonTerminating(name)),
            Diagnostic::Unreachable { .. } => {}
        }
    }
    let (min_depth_nt, min_depth_prod) = min_depths(g);
    let derives = closure(direct_edges(g));
    let recursive_prod = g
        .rules()
        .iter()
        .enumerate()
        .map(|(a, rule)| {
            rule.productions
                .iter()
                .map(|p| p.nonterminals().any(|b| b.0 == a || derives[b.0][a]))
                .collect()
        })
        .collect();
    Ok(GrammarAnalysis {
        min_depth_nt,
        min_depth_prod,
        recursive_prod,
        reachable: reachable_from_start(g),
        derives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_bnf;

    #[test]
    fn single_terminal_rule_has_depth_two() {
        let g = parse_bnf("<e> ::= x").unwrap();
        let a = analyze(&g).unwrap();
        assert_eq!(a.min_depth(NtId(0)), 2);
    }

    #[test]
    fn binary_recursive_rule() {
        let g = parse_bnf("<e> ::= x | ( <e> <e> )").unwrap();
        let a = analyze(&g).unwrap();
        assert_eq!(a.min_depth_prod(NtId(0), 0), 2);
        assert_eq!(a.min_depth_prod(NtId(0), 1), 3);
        assert_eq!(a.min_depth(NtId(0)), 2);
        assert!(!a.is_recursive(NtId(0), 0));
        assert!(a.is_recursive(NtId(0), 1));
    }

    #[test]
    fn indirect_recursion_is_detected() {
        let g = parse_bnf("<e> ::= <f> | x\n<f> ::= ( <e> ) | y").unwrap();
        let a = analyze(&g).unwrap();
        let (e, f) = (NtId(0), NtId(1));
        assert!(a.is_recursive(e, 0));
        assert!(!a.is_recursive(e, 1));
        assert!(a.is_recursive(f, 0));
        assert!(!a.is_recursive(f, 1));
        assert!(a.derives(e, f) && a.derives(f, e));
        assert_eq!(a.max_prod_depth(e), 3);
    }

    #[test]
    fn codon_values_are_leaves() {
        let g = parse_bnf("<e> ::= <GECodonValue{-1.000 : 1.000 : 0.001}>").unwrap();
        assert_eq!(analyze(&g).unwrap().min_depth(NtId(0)), 2);
    }

    #[test]
    fn analyze_rejects_bad_grammars() {
        assert_eq!(
            analyze(&parse_bnf("<e> ::= <e>").unwrap()),
            Err(GrammarError::NonTerminating("e".into()))
        );
        assert_eq!(
            analyze(&parse_bnf("<e> ::= <f>").unwrap()),
            Err(GrammarError::Undefined("f".into()))
        );
    }

    #[test]
    fn unreachable_rules_still_analysed() {
        let g = parse_bnf("<e> ::= x\n<z> ::= ( y )").unwrap();
        let a = analyze(&g).unwrap();
        assert!(!a.is_reachable(NtId(1)));
        assert_eq!(a.min_depth(NtId(1)), 2);
        assert_eq!(a.reachable().collect::<Vec<_>>(), vec![NtId(0)]);
    }
}
