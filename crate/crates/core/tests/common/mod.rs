//! Independent oracles shared by the integration tests: an Earley
//! recogniser, a bounded derivation enumerator and a decision walker.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};

use ggec::derivation::DerivationTree;
use ggec::grammar::{Grammar, NtId, Symbol};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Lit(String),
    Num(f64),
}

pub fn tokens(t: &DerivationTree) -> Vec<Tok> {
    t.leaves()
        .into_iter()
        .map(|l| match l {
            ggec::derivation::Leaf::Literal(s) => Tok::Lit(s.to_string()),
            ggec::derivation::Leaf::Constant(v) => Tok::Num(v),
        })
        .collect()
}

fn matches(g: &Grammar, sym: &Symbol, tok: &Tok) -> bool {
    match (sym, tok) {
        (Symbol::Literal(a), Tok::Lit(b)) => **a == **b,
        // enumerated strings carry codon ranges in rendered form
        (Symbol::CodonValue(_), Tok::Lit(b)) => g.render_symbol(sym) == *b,
        (Symbol::CodonValue(r), Tok::Num(v)) => r.index_of(*v).is_some(),
        _ => false,
    }
}

/// Earley recogniser: is `toks` in the language of `g`?
pub fn recognizes(g: &Grammar, toks: &[Tok]) -> bool {
    // state: (nt, production, dot, origin)
    type State = (usize, usize, usize, usize);
    let n = toks.len();
    let mut chart: Vec<Vec<State>> = vec![Vec::new(); n + 1];
    let mut seen: Vec<HashSet<State>> = vec![HashSet::new(); n + 1];
    let push = |chart: &mut Vec<Vec<State>>, seen: &mut Vec<HashSet<State>>, i: usize, s: State| {
        if seen[i].insert(s) {
            chart[i].push(s);
        }
    };
    let start = g.start().0;
    for j in 0..g.productions(NtId(start)).len() {
        push(&mut chart, &mut seen, 0, (start, j, 0, 0));
    }
    for i in 0..=n {
        let mut k = 0;
        while k < chart[i].len() {
            let (nt, p, dot, origin) = chart[i][k];
            k += 1;
            let syms = &g.productions(NtId(nt))[p].symbols;
            if dot == syms.len() {
                // no empty productions, so `origin < i` and that column is final
                for w in 0..chart[origin].len() {
                    let (a, q, d, o) = chart[origin][w];
                    let s2 = &g.productions(NtId(a))[q].symbols;
                    if d < s2.len() && s2[d] == Symbol::NonTerminal(NtId(nt)) {
                        push(&mut chart, &mut seen, i, (a, q, d + 1, o));
                    }
                }
                continue;
            }
            match &syms[dot] {
                Symbol::NonTerminal(b) => {
                    for j in 0..g.productions(*b).len() {
                        push(&mut chart, &mut seen, i, (b.0, j, 0, i));
                    }
                }
                sym => {
                    if i < n && matches(g, sym, &toks[i]) {
                        push(&mut chart, &mut seen, i + 1, (nt, p, dot + 1, origin));
                    }
                }
            }
        }
    }
    chart[n].iter().any(|&(nt, p, dot, o)| {
        nt == start && o == 0 && dot == g.productions(NtId(nt))[p].symbols.len()
    })
}

/// Terminal strings (codon values rendered symbolically) of every
/// derivation of depth at most `depth` from `nt`, or `None` once any
/// intermediate set exceeds `cap`.
pub fn enumerate(g: &Grammar, nt: NtId, depth: u32, cap: usize) -> Option<BTreeSet<Vec<String>>> {
    let mut memo = HashMap::new();
    enum_rec(g, nt, depth, cap, &mut memo)
}

type Memo = HashMap<(usize, u32), Option<BTreeSet<Vec<String>>>>;

fn enum_rec(
    g: &Grammar,
    nt: NtId,
    depth: u32,
    cap: usize,
    memo: &mut Memo,
) -> Option<BTreeSet<Vec<String>>> {
    if let Some(v) = memo.get(&(nt.0, depth)) {
        return v.clone();
    }
    let mut out = BTreeSet::new();
    if depth >= 2 {
        for p in g.productions(nt) {
            let mut partial: Vec<Vec<String>> = vec![Vec::new()];
            for s in &p.symbols {
                let options: Vec<Vec<String>> = match s {
                    Symbol::NonTerminal(b) => match enum_rec(g, *b, depth - 1, cap, memo) {
                        Some(set) => set.into_iter().collect(),
                        None => {
                            memo.insert((nt.0, depth), None);
                            return None;
                        }
                    },
                    other => vec![vec![g.render_symbol(other)]],
                };
                let mut next = Vec::new();
                for pre in &partial {
                    for o in &options {
                        let mut v = pre.clone();
                        v.extend(o.iter().cloned());
                        next.push(v);
                    }
                    if next.len() > cap {
                        memo.insert((nt.0, depth), None);
                        return None;
                    }
                }
                partial = next;
            }
            out.extend(partial);
            if out.len() > cap {
                memo.insert((nt.0, depth), None);
                return None;
            }
        }
    }
    memo.insert((nt.0, depth), Some(out.clone()));
    Some(out)
}

/// Is the rendered string `s` (as produced by [`enumerate`]) in `g`'s language?
pub fn recognizes_rendered(g: &Grammar, s: &[String]) -> bool {
    let toks: Vec<Tok> = s.iter().map(|t| Tok::Lit(t.clone())).collect();
    recognizes(g, &toks)
}

/// Smallest depth at which `nt` derives a terminal string, by enumeration.
pub fn brute_min_depth(g: &Grammar, nt: NtId, limit: u32) -> Option<u32> {
    (1..=limit).find(|&d| enumerate(g, nt, d, 64).is_none_or(|s| !s.is_empty()))
}

/// Number of alternatives behind each codon a genome for `t` consumes, in
/// mapping order.
pub fn decision_arities(g: &Grammar, t: &DerivationTree) -> Vec<u64> {
    let mut out = Vec::new();
    walk(g, t, &mut out);
    out
}

fn walk(g: &Grammar, t: &DerivationTree, out: &mut Vec<u64>) {
    if let DerivationTree::NonTerminal {
        nt,
        chosen,
        children,
    } = t
    {
        let prods = g.productions(*nt);
        if prods.len() > 1 {
            out.push(prods.len() as u64);
        }
        for (s, c) in prods[*chosen].symbols.iter().zip(children) {
            match s {
                Symbol::NonTerminal(_) => walk(g, c, out),
                Symbol::CodonValue(r) => out.push(r.grid_len()),
                Symbol::Literal(_) => {}
            }
        }
    }
}

/// Does the tree contain an expansion of the ant `if(food_ahead())`
/// production?
pub fn has_if(t: &DerivationTree) -> bool {
    t.leaves()
        .iter()
        .any(|l| matches!(l, ggec::derivation::Leaf::Literal("if(food_ahead())")))
}
