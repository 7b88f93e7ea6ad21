mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{brute_min_depth, decision_arities, enumerate, recognizes, tokens};
use ggec::derivation::DerivationTree;
use ggec::grammar::{analyze, parse_bnf, Grammar, Item, NtId, Symbol};
use ggec::init::grow;
use ggec::mapping::{backmap, map, Genome};
use ggec::stats::summarize;
use ggec::transform::{balance, bias_report, inline_nonterminal, unlink};

/// Small random grammars over terminals `a`, `b`, `c` and up to four rules.
/// Only grammars that terminate everywhere are kept.
fn grammar() -> impl Strategy<Value = Grammar> {
    // (is_terminal, index)
    let symbol = prop_oneof![2 => (Just(true), 0usize..3), 1 => (Just(false), 0usize..4)];
    let production = prop::collection::vec(symbol, 1..4);
    let rule = prop::collection::vec(production, 1..4);
    prop::collection::vec(rule, 1..5).prop_filter_map("non-terminating", |rules| {
        let n = rules.len();
        let items: Vec<(String, Vec<Vec<Item>>)> = rules
            .into_iter()
            .enumerate()
            .map(|(i, prods)| {
                let prods = prods
                    .into_iter()
                    .map(|p| {
                        p.into_iter()
                            .map(|(term, k)| {
                                if term {
                                    Item::lit(["a", "b", "c"][k])
                                } else {
                                    Item::nt(format!("n{}", k % n))
                                }
                            })
                            .collect()
                    })
                    .collect();
                (format!("n{i}"), prods)
            })
            .collect();
        let g = Grammar::from_items(items).ok()?;
        analyze(&g).ok()?;
        Some(g)
    })
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_tree(g: &Grammar, seed: u64) -> DerivationTree {
    let a = analyze(g).unwrap();
    let mut r = rng(seed);
    let min = a.min_depth(g.start());
    let depth = min + (seed % 4) as u32;
    grow(g, &a, g.start(), depth, &mut r).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn render_parse_round_trip(g in grammar()) {
        prop_assert_eq!(parse_bnf(&g.render()).unwrap(), g);
    }

    #[test]
    fn min_depth_matches_enumeration(g in grammar()) {
        let a = analyze(&g).unwrap();
        for i in 0..g.rules().len() {
            let nt = NtId(i);
            prop_assert_eq!(Some(a.min_depth(nt)), brute_min_depth(&g, nt, 12));
        }
    }

    #[test]
    fn backmap_then_map_is_identity(g in grammar(), seed in any::<u64>()) {
        let t = random_tree(&g, seed);
        let genome = backmap(&g, &t, &mut rng(seed ^ 1)).unwrap();
        prop_assert_eq!(map(&g, &genome, 0).tree, Some(t));
    }

    #[test]
    fn adding_multiples_of_the_arity_keeps_the_tree(
        g in grammar(), seed in any::<u64>(), pick in any::<prop::sample::Index>(), mult in 1u64..1000,
    ) {
        let t = random_tree(&g, seed);
        let genome = backmap(&g, &t, &mut rng(seed)).unwrap();
        let arities = decision_arities(&g, &t);
        prop_assume!(!arities.is_empty());
        let i = pick.index(arities.len());
        let mut codons = genome.into_codons();
        let k = arities[i];
        let c = codons[i] as u64;
        let up = c + k * mult;
        codons[i] = if up <= u32::MAX as u64 { up as u32 } else { (c % k) as u32 };
        let out = map(&g, &Genome::new(codons).unwrap(), 0);
        prop_assert_eq!(out.tree, Some(t));
    }

    #[test]
    fn debug_string_round_trip(g in grammar(), seed in any::<u64>()) {
        let t = random_tree(&g, seed);
        let s = t.to_debug_string(&g);
        prop_assert_eq!(DerivationTree::from_debug_string(&g, &s).unwrap(), t);
    }

    #[test]
    fn balance_and_unlink_keep_bounded_language(g in grammar()) {
        let before = enumerate(&g, g.start(), 5, 20_000);
        prop_assume!(before.is_some());
        let mut variants = vec![unlink(&g).unwrap()];
        for r in g.rules() {
            if let Ok(b) = balance(&g, &r.name) {
                variants.push(b);
            }
        }
        for v in variants {
            prop_assert_eq!(&enumerate(&v, v.start(), 5, 20_000), &before);
        }
    }

    #[test]
    fn inline_keeps_language(g in grammar(), seed in any::<u64>()) {
        let a = analyze(&g).unwrap();
        for i in 0..g.rules().len() {
            let name = &g.rules()[i].name;
            if NtId(i) == g.start() || a.derives(NtId(i), NtId(i)) {
                continue;
            }
            let h = inline_nonterminal(&g, name).unwrap();
            for k in 0..10u64 {
                let t = random_tree(&g, seed.wrapping_add(k));
                prop_assert!(recognizes(&h, &tokens(&t)));
                let u = random_tree(&h, seed.wrapping_add(k));
                prop_assert!(recognizes(&g, &tokens(&u)));
            }
        }
    }

    #[test]
    fn bias_matches_enumeration(g in grammar(), cap in 3u32..6) {
        let a = analyze(&g).unwrap();
        prop_assume!(a.min_depth(g.start()) <= cap);
        let Some(oracle) = weighted_terminals(&g, g.start(), cap) else {
            return Ok(());
        };
        let report = bias_report(&g, cap).unwrap();
        let total: f64 = oracle.values().sum();
        for (t, w) in &oracle {
            let got = report.terminal_sampling.get(t).copied().unwrap_or(0.0);
            prop_assert!((got - w / total).abs() < 1e-9, "{t}: {got} vs {}", w / total);
        }
    }

    #[test]
    fn summary_shift_and_scale(
        v in prop::collection::vec(-1e3f64..1e3, 1..30), c in -1e3f64..1e3, s in 0.01f64..100.0,
    ) {
        let base = summarize(&v).unwrap();
        let shifted = summarize(&v.iter().map(|x| x + c).collect::<Vec<_>>()).unwrap();
        let scaled = summarize(&v.iter().map(|x| x * s).collect::<Vec<_>>()).unwrap();
        let tol = 1e-6 * (1.0 + base.mean.abs() + c.abs()) * (1.0 + s);
        prop_assert!((shifted.mean - base.mean - c).abs() < tol);
        prop_assert!((shifted.ci_low - base.ci_low - c).abs() < tol);
        prop_assert!((shifted.ci_high - base.ci_high - c).abs() < tol);
        prop_assert!((scaled.mean - base.mean * s).abs() < tol * 100.0);
        prop_assert!((scaled.ci_low - base.ci_low * s).abs() < tol * 100.0);
        prop_assert!((scaled.ci_high - base.ci_high * s).abs() < tol * 100.0);
        prop_assert!(base.ci_low <= base.mean && base.mean <= base.ci_high);
    }
}

/// Expected terminal counts, weighted by derivation probability under
/// uniform production choice, over all derivations of depth at most `cap`.
/// `None` when there are too many derivations to list.
fn weighted_terminals(g: &Grammar, nt: NtId, cap: u32) -> Option<BTreeMap<String, f64>> {
    let derivs = derivations(g, nt, cap, &mut 0)?;
    let mut out = BTreeMap::new();
    for (p, terms) in derivs {
        for t in terms {
            *out.entry(t).or_insert(0.0) += p;
        }
    }
    Some(out)
}

/// Every derivation of depth at most `depth` as (probability, terminals).
fn derivations(
    g: &Grammar,
    nt: NtId,
    depth: u32,
    budget: &mut usize,
) -> Option<Vec<(f64, Vec<String>)>> {
    if depth < 2 {
        return Some(Vec::new());
    }
    let prods = g.productions(nt);
    let k = prods.len() as f64;
    let mut out = Vec::new();
    for p in prods {
        let mut partial = vec![(1.0 / k, Vec::new())];
        for s in &p.symbols {
            let options = match s {
                Symbol::NonTerminal(b) => derivations(g, *b, depth - 1, budget)?,
                other => vec![(1.0, vec![g.render_symbol(other)])],
            };
            let mut next = Vec::new();
            for (pp, pt) in &partial {
                for (op, ot) in &options {
                    let mut t = pt.clone();
                    t.extend(ot.iter().cloned());
                    next.push((pp * op, t));
                }
            }
            *budget += next.len();
            if *budget > 200_000 {
                return None;
            }
            partial = next;
        }
        out.extend(partial);
    }
    Some(out)
}
