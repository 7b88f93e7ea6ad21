//! Language-preserving grammar rewrites (balancing, inlining, unlinking)
//! and the bias diagnostics that motivate them.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::grammar::{analyze, Grammar, GrammarError, Item, NtId, Symbol};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("<{0}> has only recursive or only non-recursive productions; nothing to balance")]
    NothingToBalance(String),
    #[error("<{0}> is the start symbol and cannot be inlined")]
    InlineStart(String),
    #[error("<{0}> is recursive and cannot be inlined")]
    InlineRecursive(String),
    #[error("unlinking would need {0} productions per rule")]
    TooLarge(u128),
    #[error("depth cap {cap} is below the minimum start depth {needed}")]
    DepthCap { cap: u32, needed: u32 },
}

/// Duplicates the rarer class of `nt`'s productions (recursive versus
/// non-recursive) until both classes have the same size. Copies are taken
/// round-robin over the class and inserted right after its last member.
pub fn balance(g: &Grammar, nt: &str) -> Result<Grammar, TransformError> {
    let id = g.rule_id(nt)?;
    let a = analyze(g)?;
    let flags = a.recursive_flags(id);
    let rec: Vec<usize> = (0..flags.len()).filter(|&i| flags[i]).collect();
    let term: Vec<usize> = (0..flags.len()).filter(|&i| !flags[i]).collect();
    if rec.is_empty() || term.is_empty() {
        return Err(TransformError::NothingToBalance(nt.to_string()));
    }
    let (rare, deficit) = if rec.len() < term.len() {
        let d = term.len() - rec.len();
        (rec, d)
    } else {
        let d = rec.len() - term.len();
        (term, d)
    };
    let mut rules = g.to_items();
    let prods = &mut rules[id.0].1;
    let copies: Vec<Vec<Item>> = (0..deficit)
        .map(|k| prods[rare[k % rare.len()]].clone())
        .collect();
    let insert_at = rare.last().expect("non-empty class") + 1;
    prods.splice(insert_at..insert_at, copies);
    Ok(Grammar::from_items(rules)?)
}

/// Replaces every occurrence of `nt` by each of its productions (all
/// combinations when a production mentions `nt` several times) and drops
/// the rule.
pub fn inline_nonterminal(g: &Grammar, nt: &str) -> Result<Grammar, TransformError> {
    let id = g.rule_id(nt)?;
    if id == g.start() {
        return Err(TransformError::InlineStart(nt.to_string()));
    }
    let a = analyze(g)?;
    if a.derives(id, id) {
        return Err(TransformError::InlineRecursive(nt.to_string()));
    }
    let bodies: Vec<Vec<Item>> = g
        .productions(id)
        .iter()
        .map(|p| p.symbols.iter().map(|s| g.item(s)).collect())
        .collect();
    let mut rules = Vec::new();
    for (i, rule) in g.rules().iter().enumerate() {
        if i == id.0 {
            continue;
        }
        let mut prods = Vec::new();
        for p in &rule.productions {
            let mut expanded: Vec<Vec<Item>> = vec![Vec::new()];
            for s in &p.symbols {
                if *s == Symbol::NonTerminal(id) {
                    expanded = expanded
                        .into_iter()
                        .flat_map(|prefix| {
                            bodies.iter().map(move |b| {
                                let mut v = prefix.clone();
                                v.extend(b.iter().cloned());
                                v
                            })
                        })
                        .collect();
                } else {
                    let item = g.item(s);
                    for e in &mut expanded {
                        e.push(item.clone());
                    }
                }
            }
            prods.extend(expanded);
        }
        rules.push((rule.name.clone(), prods));
    }
    Ok(Grammar::from_items(rules)?)
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Refuse unlinking beyond this many productions per rule.
pub const UNLINK_LIMIT: u128 = 1_000_000;

/// Repeats every multi-production rule's production list until all such
/// rules have the least common multiple of their counts. Rules with one
/// production consume no codon in GE and are left alone.
pub fn unlink(g: &Grammar) -> Result<Grammar, TransformError> {
    let counts: Vec<usize> = g.rules().iter().map(|r| r.productions.len()).collect();
    let mut lcm: u128 = 1;
    for &c in counts.iter().filter(|&&c| c > 1) {
        lcm = lcm / gcd(lcm, c as u128) * c as u128;
        if lcm > UNLINK_LIMIT {
            return Err(TransformError::TooLarge(lcm));
        }
    }
    let mut rules = g.to_items();
    for (name_prods, &c) in rules.iter_mut().zip(&counts) {
        if c > 1 {
            let original = name_prods.1.clone();
            let target = lcm as usize;
            name_prods.1 = original.iter().cycle().take(target).cloned().collect();
        }
    }
    Ok(Grammar::from_items(rules)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasReport {
    /// Fraction of each rule's productions that are non-recursive.
    pub termination_mass: BTreeMap<String, f64>,
    /// Expected share of each terminal among all terminals of a derivation
    /// drawn with uniform production choice, conditioned on finishing within
    /// the depth cap.
    pub terminal_sampling: BTreeMap<String, f64>,
    /// Production count per rule; unequal counts link choices under `mod`.
    pub codon_linkage: BTreeMap<String, usize>,
}

/// Exact bias diagnostics. Derivations that would exceed `depth_cap` are
/// discarded and the rest renormalised.
pub fn bias_report(g: &Grammar, depth_cap: u32) -> Result<BiasReport, TransformError> {
    let a = analyze(g)?;
    let needed = a.min_depth(g.start());
    if depth_cap < needed {
        return Err(TransformError::DepthCap {
            cap: depth_cap,
            needed,
        });
    }
    let mut termination_mass = BTreeMap::new();
    let mut codon_linkage = BTreeMap::new();
    for (i, rule) in g.rules().iter().enumerate() {
        let flags = a.recursive_flags(NtId(i));
        let term = flags.iter().filter(|f| !**f).count();
        termination_mass.insert(rule.name.clone(), term as f64 / flags.len() as f64);
        codon_linkage.insert(rule.name.clone(), rule.productions.len());
    }

    // terminal keys
    let mut keys: Vec<String> = Vec::new();
    let mut key_of = |text: String| -> usize {
        if let Some(i) = keys.iter().position(|k| *k == text) {
            i
        } else {
            keys.push(text);
            keys.len() - 1
        }
    };
    let mut sym_keys: Vec<Vec<Vec<Option<usize>>>> = Vec::new();
    for rule in g.rules() {
        let mut per_rule = Vec::new();
        for p in &rule.productions {
            per_rule.push(
                p.symbols
                    .iter()
                    .map(|s| match s {
                        Symbol::NonTerminal(_) => None,
                        other => Some(key_of(g.render_symbol(other))),
                    })
                    .collect(),
            );
        }
        sym_keys.push(per_rule);
    }
    let n_keys = keys.len();
    let n_rules = g.rules().len();

    // complete[d][A]: probability that a derivation from A finishes within
    // depth d. weight[d][A][t]: expected count of t times that indicator.
    let cap = depth_cap as usize;
    let mut complete = vec![vec![0.0f64; n_rules]; cap + 1];
    let mut weight = vec![vec![vec![0.0f64; n_keys]; n_rules]; cap + 1];
    for d in 2..=cap {
        for (i, rule) in g.rules().iter().enumerate() {
            let k = rule.productions.len() as f64;
            let mut p_total = 0.0;
            let mut w_total = vec![0.0; n_keys];
            for (j, p) in rule.productions.iter().enumerate() {
                let child_p: Vec<f64> = p
                    .symbols
                    .iter()
                    .map(|s| match s {
                        Symbol::NonTerminal(b) => complete[d - 1][b.0],
                        _ => 1.0,
                    })
                    .collect();
                let prod_p: f64 = child_p.iter().product();
                p_total += prod_p / k;
                if prod_p == 0.0 {
                    continue;
                }
                for (pos, s) in p.symbols.iter().enumerate() {
                    let others: f64 = child_p
                        .iter()
                        .enumerate()
                        .filter(|(q, _)| *q != pos)
                        .map(|(_, v)| *v)
                        .product();
                    match s {
                        Symbol::NonTerminal(b) => {
                            for (t, w) in weight[d - 1][b.0].iter().enumerate() {
                                w_total[t] += w * others / k;
                            }
                        }
                        _ => {
                            let t = sym_keys[i][j][pos].expect("terminal key");
                            w_total[t] += others / k;
                        }
                    }
                }
            }
            complete[d][i] = p_total;
            weight[d][i] = w_total;
        }
    }
    let w = &weight[cap][g.start().0];
    let total: f64 = w.iter().sum();
    let terminal_sampling = keys
        .into_iter()
        .zip(w.iter())
        .filter(|(_, v)| **v > 0.0)
        .map(|(k, v)| (k, v / total))
        .collect();
    Ok(BiasReport {
        termination_mass,
        terminal_sampling,
        codon_linkage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_bnf;

    fn bnf(s: &str) -> Grammar {
        parse_bnf(s).unwrap()
    }

    #[test]
    fn balance_examples() {
        let g = bnf("<e> ::= x | ( <e> <e> )");
        assert_eq!(balance(&g, "e").unwrap(), g);

        let g = bnf("<e> ::= x | ( <e> <e> ) | ( <e> + <e> )");
        assert_eq!(
            balance(&g, "e").unwrap(),
            bnf("<e> ::= x | x | ( <e> <e> ) | ( <e> + <e> )")
        );

        let g = bnf("<e> ::= x | y | ( <e> <e> )");
        assert_eq!(
            balance(&g, "e").unwrap(),
            bnf("<e> ::= x | y | ( <e> <e> ) | ( <e> <e> )")
        );
    }

    #[test]
    fn balance_round_robin() {
        let g = bnf("<e> ::= a | b | <e> 1 | <e> 2 | <e> 3 | <e> 4 | <e> 5");
        assert_eq!(
            balance(&g, "e").unwrap(),
            bnf("<e> ::= a | b | a | b | a | <e> 1 | <e> 2 | <e> 3 | <e> 4 | <e> 5")
        );
    }

    #[test]
    fn balance_errors() {
        let g = bnf("<e> ::= x | y");
        assert_eq!(
            balance(&g, "e"),
            Err(TransformError::NothingToBalance("e".into()))
        );
        assert!(matches!(
            balance(&g, "nope"),
            Err(TransformError::Grammar(GrammarError::UnknownNonTerminal(_)))
        ));
    }

    #[test]
    fn inline_examples() {
        let g = bnf("<e> ::= <op> x\n<op> ::= + | -");
        assert_eq!(
            inline_nonterminal(&g, "op").unwrap(),
            bnf("<e> ::= + x | - x")
        );

        let g = bnf("<e> ::= <v> <v>\n<v> ::= a | b");
        assert_eq!(
            inline_nonterminal(&g, "v").unwrap(),
            bnf("<e> ::= a a | a b | b a | b b")
        );

        let g = bnf("<e> ::= ( <e> <c> ) | x\n<c> ::= k");
        let out = inline_nonterminal(&g, "c").unwrap();
        assert_eq!(out.production_count(), g.production_count() - 1);
        assert_eq!(out, bnf("<e> ::= ( <e> k ) | x"));
    }

    #[test]
    fn inline_errors() {
        let g = bnf("<e> ::= <f> | x\n<f> ::= ( <f> ) | <e>");
        assert_eq!(
            inline_nonterminal(&g, "e"),
            Err(TransformError::InlineStart("e".into()))
        );
        assert_eq!(
            inline_nonterminal(&g, "f"),
            Err(TransformError::InlineRecursive("f".into()))
        );
    }

    #[test]
    fn unlink_to_lcm() {
        let g = bnf("<e> ::= ( <op> <e> <e> ) | <v>\n<op> ::= + | - | *\n<v> ::= x\n");
        let u = unlink(&g).unwrap();
        assert_eq!(u.rules()[0].productions.len(), 6);
        assert_eq!(u.rules()[1].productions.len(), 6);
        assert_eq!(u.rules()[2].productions.len(), 1);
        assert_eq!(u.rules()[0].productions[2], u.rules()[0].productions[0]);
        assert_eq!(u.rules()[1].productions[4], u.rules()[1].productions[1]);
    }

    #[test]
    fn bias_symmetry_and_counting() {
        let r = bias_report(&bnf("<e> ::= x | y"), 6).unwrap();
        assert!((r.terminal_sampling["x"] - 0.5).abs() < 1e-12);
        assert!((r.terminal_sampling["y"] - 0.5).abs() < 1e-12);

        let r = bias_report(&bnf("<e> ::= x | x | y"), 6).unwrap();
        assert!((r.terminal_sampling["x"] - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.terminal_sampling["y"] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.codon_linkage["e"], 3);
        assert_eq!(r.termination_mass["e"], 1.0);
    }

    #[test]
    fn bias_rejects_small_cap() {
        let g = bnf("<e> ::= ( <f> )\n<f> ::= x");
        assert_eq!(
            bias_report(&g, 2),
            Err(TransformError::DepthCap { cap: 2, needed: 3 })
        );
    }
}
