use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::derivation::{DerivationTree, Location};
use crate::grammar::{Grammar, GrammarAnalysis, NtId};
use crate::init::grow;
use crate::mapping::Genome;

/// Number of contestants for a population of `n`.
pub fn tournament_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).max(2)
}

/// Index of the fittest (lowest) of `max(2, round(fraction * n))` members
/// drawn uniformly with replacement. Ties are broken uniformly.
pub fn tournament_select<R: Rng + ?Sized>(fitness: &[f64], fraction: f64, rng: &mut R) -> usize {
    assert!(!fitness.is_empty(), "tournament over an empty population");
    let mut best = rng.gen_range(0..fitness.len());
    let mut ties = 1;
    for _ in 1..tournament_size(fitness.len(), fraction) {
        let c = rng.gen_range(0..fitness.len());
        let (fc, fb) = (fitness[c], fitness[best]);
        if fc < fb || (fb.is_nan() && !fc.is_nan()) {
            best = c;
            ties = 1;
        } else if fc == fb || (fc.is_nan() && fb.is_nan()) {
            ties += 1;
            if rng.gen_range(0..ties) == 0 {
                best = c;
            }
        }
    }
    best
}

/// Variable-length one-point crossover. A cut point is drawn per parent,
/// uniformly over its codon boundaries, and the tails are swapped. Cuts
/// that would leave an offspring empty are redrawn.
pub fn ge_crossover<R: Rng + ?Sized>(a: &Genome, b: &Genome, rng: &mut R) -> (Genome, Genome) {
    ge_crossover_within(a, a.len(), b, b.len(), rng)
}

/// One-point crossover with each cut restricted to the first `limit_a` /
/// `limit_b` codons, e.g. the codons the mapping actually consumed.
pub fn ge_crossover_within<R: Rng + ?Sized>(
    a: &Genome,
    limit_a: usize,
    b: &Genome,
    limit_b: usize,
    rng: &mut R,
) -> (Genome, Genome) {
    let (a, b) = (a.codons(), b.codons());
    let (la, lb) = (limit_a.min(a.len()), limit_b.min(b.len()));
    loop {
        let ca = rng.gen_range(0..=la);
        let cb = rng.gen_range(0..=lb);
        let c1: Vec<u32> = a[..ca].iter().chain(&b[cb..]).copied().collect();
        let c2: Vec<u32> = b[..cb].iter().chain(&a[ca..]).copied().collect();
        if let (Ok(x), Ok(y)) = (Genome::new(c1), Genome::new(c2)) {
            return (x, y);
        }
    }
}

/// Replaces one uniformly chosen codon with a fresh uniform codon.
pub fn ge_mutate<R: Rng + ?Sized>(genome: &Genome, rng: &mut R) -> Genome {
    let mut c = genome.codons().to_vec();
    let i = rng.gen_range(0..c.len());
    c[i] = rng.gen();
    Genome::new(c).expect("length unchanged")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeChoice {
    /// Uniform over non-terminal names present in both parents, then
    /// uniform over nodes of that name in each parent.
    #[default]
    ByName,
    /// Uniform over all pairs of same-named nodes.
    ByPair,
}

/// Subtree exchange between same-named non-terminal nodes. Offspring
/// deeper than `depth_limit` are replaced by their parent.
pub fn cfggp_crossover<R: Rng + ?Sized>(
    a: &DerivationTree,
    b: &DerivationTree,
    depth_limit: Option<u32>,
    choice: NodeChoice,
    rng: &mut R,
) -> (DerivationTree, DerivationTree) {
    let na = a.nodes_by_nonterminal();
    let nb = b.nodes_by_nonterminal();
    let shared: Vec<NtId> = na.keys().filter(|k| nb.contains_key(k)).copied().collect();
    if shared.is_empty() {
        return (a.clone(), b.clone());
    }
    let (la, lb) = match choice {
        NodeChoice::ByName => {
            let nt = shared[rng.gen_range(0..shared.len())];
            (
                na[&nt].choose(rng).expect("non-empty"),
                nb[&nt].choose(rng).expect("non-empty"),
            )
        }
        NodeChoice::ByPair => {
            let total: usize = shared.iter().map(|k| na[k].len() * nb[k].len()).sum();
            let mut r = rng.gen_range(0..total);
            let mut pick = None;
            for k in &shared {
                let (x, y) = (&na[k], &nb[k]);
                if r < x.len() * y.len() {
                    pick = Some((&x[r / y.len()], &y[r % y.len()]));
                    break;
                }
                r -= x.len() * y.len();
            }
            pick.expect("index within total")
        }
    };
    let sa = a.get(la).expect("location from this tree").clone();
    let sb = b.get(lb).expect("location from this tree").clone();
    let c1 = a.replace_subtree(la, sb).expect("same non-terminal");
    let c2 = b.replace_subtree(lb, sa).expect("same non-terminal");
    let fits = |t: &DerivationTree| depth_limit.is_none_or(|d| t.depth() <= d as usize);
    (
        if fits(&c1) { c1 } else { a.clone() },
        if fits(&c2) { c2 } else { b.clone() },
    )
}

/// How "the depth of the largest production" is read by the adaptive rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LargestProduction {
    /// The greatest minimum depth over the non-terminal's productions.
    #[default]
    DeepestMinimum,
    /// The minimum depth of the production with the most symbols.
    MostSymbols,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MutationSettings {
    pub max_mutation_depth: u32,
    pub adaptive: bool,
    pub largest: LargestProduction,
    pub depth_limit: Option<u32>,
}

/// Grow budget for regenerating a subtree rooted at `nt` that replaces a
/// subtree of depth `replaced_depth`. Never below `nt`'s minimum depth.
pub fn mutation_budget(
    g: &Grammar,
    a: &GrammarAnalysis,
    nt: NtId,
    replaced_depth: u32,
    s: &MutationSettings,
) -> u32 {
    let budget = if s.adaptive {
        let largest = match s.largest {
            LargestProduction::DeepestMinimum => a.max_prod_depth(nt),
            LargestProduction::MostSymbols => {
                let prods = g.productions(nt);
                let most = prods.iter().map(|p| p.symbols.len()).max().unwrap_or(0);
                (0..prods.len())
                    .filter(|&i| prods[i].symbols.len() == most)
                    .map(|i| a.min_depth_prod(nt, i))
                    .max()
                    .unwrap_or(0)
            }
        };
        largest.max(replaced_depth)
    } else {
        s.max_mutation_depth
    };
    budget.max(a.min_depth(nt))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mutation {
    /// The offspring (equal to the input when `reverted`).
    pub tree: DerivationTree,
    pub location: Location,
    pub budget: u32,
    /// The freshly grown subtree.
    pub subtree: DerivationTree,
    /// The offspring broke the depth limit and was discarded.
    pub reverted: bool,
}

/// Regrows the subtree at a uniformly chosen non-terminal node.
pub fn cfggp_mutate<R: Rng + ?Sized>(
    t: &DerivationTree,
    g: &Grammar,
    a: &GrammarAnalysis,
    s: &MutationSettings,
    rng: &mut R,
) -> DerivationTree {
    cfggp_mutate_detail(t, g, a, s, rng).tree
}

pub fn cfggp_mutate_detail<R: Rng + ?Sized>(
    t: &DerivationTree,
    g: &Grammar,
    a: &GrammarAnalysis,
    s: &MutationSettings,
    rng: &mut R,
) -> Mutation {
    let nodes = t.nonterminal_nodes();
    let (location, nt) = nodes.choose(rng).expect("tree has a root").clone();
    let replaced = t.get(&location).expect("location from this tree").depth() as u32;
    let budget = mutation_budget(g, a, nt, replaced, s);
    let subtree = grow(g, a, nt, budget, rng).expect("budget covers the minimum depth");
    let candidate = t
        .replace_subtree(&location, subtree.clone())
        .expect("same non-terminal");
    let reverted = s
        .depth_limit
        .is_some_and(|d| candidate.depth() > d as usize);
    Mutation {
        tree: if reverted { t.clone() } else { candidate },
        location,
        budget,
        subtree,
        reverted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{analyze, parse_bnf};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn tournament_sizes() {
        assert_eq!(tournament_size(500, 0.01), 5);
        assert_eq!(tournament_size(1, 0.01), 2);
        assert_eq!(tournament_size(200, 0.01), 2);
        assert_eq!(tournament_select(&[3.0], 0.01, &mut rng()), 0);
    }

    #[test]
    fn tournament_prefers_better() {
        let f: Vec<f64> = (0..100).map(f64::from).collect();
        let mut r = rng();
        let mean: f64 = (0..2000)
            .map(|_| tournament_select(&f, 0.05, &mut r) as f64)
            .sum::<f64>()
            / 2000.0;
        assert!(mean < 30.0, "{mean}");
    }

    #[test]
    fn equal_fitness_is_uniform() {
        let f = [1.0; 10];
        let mut r = rng();
        let mut counts = [0usize; 10];
        for _ in 0..10_000 {
            counts[tournament_select(&f, 0.5, &mut r)] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - 1000.0).powi(2) / 1000.0)
            .sum();
        // 9 degrees of freedom, 0.999 quantile is 27.88
        assert!(chi2 < 27.88, "{chi2}");
    }

    #[test]
    fn crossover_conserves_codons() {
        let mut r = rng();
        let a = Genome::new((0..31).collect()).unwrap();
        let b = Genome::new((100..131).collect()).unwrap();
        for _ in 0..200 {
            let (x, y) = ge_crossover(&a, &b, &mut r);
            assert_eq!(x.len() + y.len(), 62);
        }
        let (x, y) = ge_crossover(&a, &a, &mut r);
        assert_eq!(x.len() + y.len(), 62);
        let one = Genome::new(vec![5]).unwrap();
        for _ in 0..50 {
            let (x, y) = ge_crossover(&one, &one, &mut r);
            assert_eq!((x.len(), y.len()), (1, 1));
        }
    }

    #[test]
    fn effective_crossover_stays_in_prefix() {
        let mut r = rng();
        let a = Genome::new(vec![1; 10]).unwrap();
        let b = Genome::new(vec![2; 10]).unwrap();
        for _ in 0..100 {
            let (x, _) = ge_crossover_within(&a, 3, &b, 3, &mut r);
            assert!(x.codons().iter().take_while(|c| **c == 1).count() <= 3);
        }
    }

    #[test]
    fn mutation_changes_one_codon() {
        let mut r = rng();
        let g = Genome::new((0..20).collect()).unwrap();
        let m = ge_mutate(&g, &mut r);
        let diff = g
            .codons()
            .iter()
            .zip(m.codons())
            .filter(|(x, y)| x != y)
            .count();
        assert_eq!(diff, 1);
    }

    #[test]
    fn minimal_trees_swap() {
        let g = parse_bnf("<e> ::= x | y").unwrap();
        let a = DerivationTree::from_debug_string(&g, r#"e#0("x")"#).unwrap();
        let b = DerivationTree::from_debug_string(&g, r#"e#1("y")"#).unwrap();
        let (c1, c2) = cfggp_crossover(&a, &b, None, NodeChoice::ByName, &mut rng());
        assert_eq!((c1, c2), (b.clone(), a.clone()));
        let (c1, c2) = cfggp_crossover(&a, &b, None, NodeChoice::ByPair, &mut rng());
        assert_eq!((c1, c2), (b, a));
    }

    #[test]
    fn adaptive_budget_examples() {
        // productions of min depth {2, 3}; replaced depth 6 -> 6
        let g = parse_bnf("<e> ::= x | ( <f> )\n<f> ::= y").unwrap();
        let a = analyze(&g).unwrap();
        let s = MutationSettings {
            max_mutation_depth: 4,
            adaptive: true,
            largest: LargestProduction::DeepestMinimum,
            depth_limit: None,
        };
        assert_eq!(a.prod_depths(g.start()), vec![2, 3]);
        assert_eq!(mutation_budget(&g, &a, g.start(), 6, &s), 6);
        assert_eq!(mutation_budget(&g, &a, g.start(), 2, &s), 3);
        let fixed = MutationSettings {
            adaptive: false,
            ..s
        };
        assert_eq!(mutation_budget(&g, &a, g.start(), 6, &fixed), 4);
        let tiny = MutationSettings {
            max_mutation_depth: 1,
            ..fixed
        };
        assert_eq!(mutation_budget(&g, &a, g.start(), 6, &tiny), 2);
    }

    #[test]
    fn most_symbols_reading() {
        let g = parse_bnf("<e> ::= a b c d | ( <f> )\n<f> ::= y").unwrap();
        let a = analyze(&g).unwrap();
        let s = MutationSettings {
            max_mutation_depth: 4,
            adaptive: true,
            largest: LargestProduction::MostSymbols,
            depth_limit: None,
        };
        assert_eq!(mutation_budget(&g, &a, g.start(), 2, &s), 2);
        let deep = MutationSettings {
            largest: LargestProduction::DeepestMinimum,
            ..s
        };
        assert_eq!(mutation_budget(&g, &a, g.start(), 2, &deep), 3);
    }

    #[test]
    fn mutation_respects_depth_limit() {
        let g = parse_bnf("<e> ::= x | ( <e> <e> )").unwrap();
        let a = analyze(&g).unwrap();
        let s = MutationSettings {
            max_mutation_depth: 8,
            adaptive: false,
            largest: LargestProduction::DeepestMinimum,
            depth_limit: Some(5),
        };
        let mut r = rng();
        let mut t = grow(&g, &a, g.start(), 5, &mut r).unwrap();
        for _ in 0..500 {
            let m = cfggp_mutate_detail(&t, &g, &a, &s, &mut r);
            assert!(m.tree.depth() <= 5);
            assert!(m.tree.conforms(&g).is_ok());
            if m.reverted {
                assert_eq!(m.tree, t);
            }
            t = m.tree;
        }
    }
}
