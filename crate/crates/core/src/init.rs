//! Population initialisation: random genomes, sensible initialisation
//! (grammar-aware ramped half-and-half) and PTC2.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derivation::DerivationTree;
use crate::grammar::{Grammar, GrammarAnalysis, NtId, Symbol};
use crate::mapping::Genome;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitError {
    #[error("depth budget {budget} is below the minimum depth {needed} of <{nt}>")]
    DepthTooSmall {
        nt: String,
        budget: u32,
        needed: u32,
    },
    #[error("invalid initialiser configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMethod {
    Random,
    Sensible,
    Ptc2,
}

impl InitMethod {
    pub fn name(&self) -> &'static str {
        match self {
            InitMethod::Random => "random",
            InitMethod::Sensible => "sensible",
            InitMethod::Ptc2 => "ptc2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" => Some(InitMethod::Random),
            "sensible" => Some(InitMethod::Sensible),
            "ptc2" => Some(InitMethod::Ptc2),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub method: InitMethod,
    /// Genome length for random GE / random-search initialisation.
    pub random_codons: usize,
    /// Grow depth for random CFG-GP initialisation.
    pub random_tree_depth: u32,
    pub sensible_max_depth: u32,
    pub ptc2_max_expansions: usize,
    /// Resample duplicate phenotypes in sensible initialisation.
    pub resample_duplicates: bool,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            method: InitMethod::Random,
            random_codons: 31,
            random_tree_depth: 6,
            sensible_max_depth: 6,
            ptc2_max_expansions: 31,
            resample_duplicates: true,
        }
    }
}

impl InitConfig {
    pub fn with_method(method: InitMethod) -> Self {
        InitConfig {
            method,
            ..Default::default()
        }
    }

    pub fn check(&self, g: &Grammar, a: &GrammarAnalysis) -> Result<(), InitError> {
        let min = a.min_depth(g.start());
        if self.random_codons == 0 {
            return Err(InitError::Config("random_codons must be at least 1".into()));
        }
        if self.ptc2_max_expansions == 0 {
            return Err(InitError::Config(
                "ptc2_max_expansions must be at least 1".into(),
            ));
        }
        for (what, depth) in [
            ("sensible_max_depth", self.sensible_max_depth),
            ("random_tree_depth", self.random_tree_depth),
        ] {
            if depth < min {
                return Err(InitError::Config(format!(
                    "{what} {depth} is below the grammar's minimum depth {min}"
                )));
            }
        }
        Ok(())
    }
}

pub fn random_genome<R: Rng + ?Sized>(cfg: &InitConfig, rng: &mut R) -> Genome {
    let codons = (0..cfg.random_codons.max(1)).map(|_| rng.gen()).collect();
    Genome::new(codons).expect("length is at least one")
}

fn leaf<R: Rng + ?Sized>(sym: &Symbol, rng: &mut R) -> DerivationTree {
    match sym {
        Symbol::Literal(t) => DerivationTree::Literal(t.clone()),
        Symbol::CodonValue(r) => DerivationTree::Constant {
            value: r.value_at(rng.gen_range(0..r.grid_len())),
            decimals: r.decimals,
        },
        Symbol::NonTerminal(_) => unreachable!("leaf() called on a non-terminal"),
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Shape {
    Grow,
    Full,
}

fn build<R: Rng + ?Sized>(
    g: &Grammar,
    a: &GrammarAnalysis,
    nt: NtId,
    budget: u32,
    shape: Shape,
    rng: &mut R,
) -> DerivationTree {
    let depths = a.prod_depths(nt);
    let feasible: Vec<usize> = (0..depths.len()).filter(|&i| depths[i] <= budget).collect();
    let chosen = match shape {
        Shape::Grow => *feasible.choose(rng).expect("budget checked by caller"),
        Shape::Full => {
            let recursive: Vec<usize> = feasible
                .iter()
                .copied()
                .filter(|&i| a.is_recursive(nt, i))
                .collect();
            let pool = if recursive.is_empty() {
                &feasible
            } else {
                &recursive
            };
            *pool.choose(rng).expect("budget checked by caller")
        }
    };
    let children = g.productions(nt)[chosen]
        .symbols
        .iter()
        .map(|s| match s {
            Symbol::NonTerminal(c) => build(g, a, *c, budget - 1, shape, rng),
            other => leaf(other, rng),
        })
        .collect();
    DerivationTree::NonTerminal {
        nt,
        chosen,
        children,
    }
}

fn check_budget(g: &Grammar, a: &GrammarAnalysis, nt: NtId, budget: u32) -> Result<(), InitError> {
    let needed = a.min_depth(nt);
    if budget < needed {
        Err(InitError::DepthTooSmall {
            nt: g.name(nt).to_string(),
            budget,
            needed,
        })
    } else {
        Ok(())
    }
}

/// Grow: at each node pick uniformly among the productions that can still
/// terminate within the remaining depth. Depth never exceeds `max_depth`.
pub fn grow<R: Rng + ?Sized>(
    g: &Grammar,
    a: &GrammarAnalysis,
    nt: NtId,
    max_depth: u32,
    rng: &mut R,
) -> Result<DerivationTree, InitError> {
    check_budget(g, a, nt, max_depth)?;
    Ok(build(g, a, nt, max_depth, Shape::Grow, rng))
}

/// Full: like grow, but restricted to recursive productions whenever one
/// fits the remaining depth, which pushes trees toward `max_depth`.
pub fn full<R: Rng + ?Sized>(
    g: &Grammar,
    a: &GrammarAnalysis,
    nt: NtId,
    max_depth: u32,
    rng: &mut R,
) -> Result<DerivationTree, InitError> {
    check_budget(g, a, nt, max_depth)?;
    Ok(build(g, a, nt, max_depth, Shape::Full, rng))
}

/// Depth level and grow/full choice for each of `n` individuals, ramped
/// over `[min_depth, max_depth]`.
pub fn ramp_plan(n: usize, min_depth: u32, max_depth: u32) -> Vec<(u32, bool)> {
    let levels: Vec<u32> = (min_depth..=max_depth.max(min_depth)).collect();
    let base = n / levels.len();
    let extra = n % levels.len();
    let mut plan = Vec::with_capacity(n);
    for (i, &level) in levels.iter().enumerate() {
        let count = base + usize::from(i < extra);
        let grows = count.div_ceil(2);
        plan.extend((0..count).map(|k| (level, k < grows)));
    }
    plan
}

/// Sensible initialisation. Depth levels run from the grammar's minimum
/// start depth to `cfg.sensible_max_depth`; half of each level is grown,
/// half is full. Duplicate phenotypes are redrawn up to ten times.
pub fn sensible_population<R: Rng + ?Sized>(
    g: &Grammar,
    a: &GrammarAnalysis,
    n: usize,
    cfg: &InitConfig,
    rng: &mut R,
) -> Result<Vec<DerivationTree>, InitError> {
    let start = g.start();
    check_budget(g, a, start, cfg.sensible_max_depth)?;
    let mut seen: HashSet<String> = HashSet::new();
    let mut out = Vec::with_capacity(n);
    for (level, use_grow) in ramp_plan(n, a.min_depth(start), cfg.sensible_max_depth) {
        let shape = if use_grow { Shape::Grow } else { Shape::Full };
        let mut tree = build(g, a, start, level, shape, rng);
        if cfg.resample_duplicates {
            let mut attempts = 0;
            while seen.contains(&tree.phenotype()) && attempts < 10 {
                tree = build(g, a, start, level, shape, rng);
                attempts += 1;
            }
            seen.insert(tree.phenotype());
        }
        out.push(tree);
    }
    Ok(out)
}

enum Slot {
    Done(DerivationTree),
    Open(NtId),
    Node(usize),
}

struct Pending {
    nt: NtId,
    chosen: usize,
    depth: u32,
    slots: Vec<Slot>,
}

/// PTC2 with a budget of `max_expansions` random expansions; see
/// [`ptc2_with_count`].
pub fn ptc2<R: Rng + ?Sized>(
    g: &Grammar,
    a: &GrammarAnalysis,
    nt: NtId,
    max_expansions: usize,
    rng: &mut R,
) -> DerivationTree {
    ptc2_with_count(g, a, nt, max_expansions, rng).0
}

/// PTC2 returning the number of counted (random) expansions.
///
/// A frontier of open non-terminals starts at the root. Until the budget is
/// spent, a frontier position is drawn uniformly and expanded with a
/// uniformly drawn production; each such expansion counts one. Remaining
/// positions are then closed with minimum-depth productions (ties drawn
/// uniformly), which are not counted.
pub fn ptc2_with_count<R: Rng + ?Sized>(
    g: &Grammar,
    a: &GrammarAnalysis,
    nt: NtId,
    max_expansions: usize,
    rng: &mut R,
) -> (DerivationTree, usize) {
    ptc2_limited(g, a, nt, max_expansions, None, rng).expect("no depth limit")
}

/// [`ptc2_with_count`] with an optional depth limit: random expansions only
/// draw among productions that can still finish within it.
pub fn ptc2_limited<R: Rng + ?Sized>(
    g: &Grammar,
    a: &GrammarAnalysis,
    nt: NtId,
    max_expansions: usize,
    max_depth: Option<u32>,
    rng: &mut R,
) -> Result<(DerivationTree, usize), InitError> {
    if let Some(d) = max_depth {
        check_budget(g, a, nt, d)?;
    }
    let mut nodes: Vec<Pending> = Vec::new();
    // (node index, slot index) of each open non-terminal
    let mut frontier: Vec<(usize, usize)> = Vec::new();
    let mut expansions = 0;

    let expand = |nodes: &mut Vec<Pending>,
                  frontier: &mut Vec<(usize, usize)>,
                  nt: NtId,
                  chosen: usize,
                  depth: u32,
                  rng: &mut R| {
        let idx = nodes.len();
        let slots = g.productions(nt)[chosen]
            .symbols
            .iter()
            .enumerate()
            .map(|(i, s)| match s {
                Symbol::NonTerminal(c) => {
                    frontier.push((idx, i));
                    Slot::Open(*c)
                }
                other => Slot::Done(leaf(other, rng)),
            })
            .collect();
        nodes.push(Pending {
            nt,
            chosen,
            depth,
            slots,
        });
        idx
    };
    // a uniformly drawn production of `nt` whose subtree fits at `depth`
    let random_production = |nt: NtId, depth: u32, rng: &mut R| -> usize {
        let depths = a.prod_depths(nt);
        match max_depth {
            None => rng.gen_range(0..depths.len()),
            Some(limit) => {
                let room = limit + 1 - depth;
                let fits: Vec<usize> = (0..depths.len()).filter(|&i| depths[i] <= room).collect();
                *fits.choose(rng).expect("parent production fits")
            }
        }
    };

    let chosen = if max_expansions == 0 {
        minimal_production(a, nt, rng)
    } else {
        expansions += 1;
        random_production(nt, 1, rng)
    };
    expand(&mut nodes, &mut frontier, nt, chosen, 1, rng);

    while expansions < max_expansions && !frontier.is_empty() {
        let pick = rng.gen_range(0..frontier.len());
        let (parent, slot) = frontier.swap_remove(pick);
        let Slot::Open(child_nt) = nodes[parent].slots[slot] else {
            unreachable!()
        };
        let depth = nodes[parent].depth + 1;
        let chosen = random_production(child_nt, depth, rng);
        let idx = expand(&mut nodes, &mut frontier, child_nt, chosen, depth, rng);
        nodes[parent].slots[slot] = Slot::Node(idx);
        expansions += 1;
    }
    // close the frontier in a fixed order so results depend only on the rng
    frontier.sort_unstable();
    let mut closing: Vec<(usize, usize)> = frontier;
    while let Some((parent, slot)) = closing.pop() {
        let Slot::Open(child_nt) = nodes[parent].slots[slot] else {
            unreachable!()
        };
        let depth = nodes[parent].depth + 1;
        let chosen = minimal_production(a, child_nt, rng);
        let mut opened = Vec::new();
        let idx = expand(&mut nodes, &mut opened, child_nt, chosen, depth, rng);
        nodes[parent].slots[slot] = Slot::Node(idx);
        closing.extend(opened);
    }

    let tree = assemble(&mut nodes, 0);
    Ok((tree, expansions))
}

fn minimal_production<R: Rng + ?Sized>(a: &GrammarAnalysis, nt: NtId, rng: &mut R) -> usize {
    let best = a.min_depth(nt);
    let ties: Vec<usize> = a
        .prod_depths(nt)
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == best)
        .map(|(i, _)| i)
        .collect();
    *ties
        .choose(rng)
        .expect("every rule has a minimal production")
}

fn assemble(nodes: &mut Vec<Pending>, idx: usize) -> DerivationTree {
    let slots = std::mem::take(&mut nodes[idx].slots);
    let (nt, chosen) = (nodes[idx].nt, nodes[idx].chosen);
    let children = slots
        .into_iter()
        .map(|s| match s {
            Slot::Done(t) => t,
            Slot::Node(i) => assemble(nodes, i),
            Slot::Open(_) => unreachable!("frontier fully closed"),
        })
        .collect();
    DerivationTree::NonTerminal {
        nt,
        chosen,
        children,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{analyze, parse_bnf};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn binary() -> (Grammar, GrammarAnalysis) {
        let g = parse_bnf("<e> ::= x | ( <e> <e> )").unwrap();
        let a = analyze(&g).unwrap();
        (g, a)
    }

    #[test]
    fn ptc2_limited_respects_depth() {
        let g = parse_bnf("<c> ::= <l> | <c> <l>\n<l> ::= a | b | ( <c> )").unwrap();
        let a = analyze(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut deepest = 0;
        for _ in 0..500 {
            let (t, n) = ptc2_limited(&g, &a, g.start(), 60, Some(7), &mut rng).unwrap();
            assert!(t.depth() <= 7 && n <= 60);
            deepest = deepest.max(t.depth());
        }
        assert_eq!(deepest, 7);
        assert!(ptc2_limited(&g, &a, g.start(), 5, Some(2), &mut rng).is_err());
    }

    #[test]
    fn random_genome_length_and_determinism() {
        let cfg = InitConfig::default();
        let a = random_genome(&cfg, &mut ChaCha8Rng::seed_from_u64(5));
        let b = random_genome(&cfg, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a.len(), 31);
        assert_eq!(a, b);
        let one = InitConfig {
            random_codons: 1,
            ..Default::default()
        };
        assert_eq!(
            random_genome(&one, &mut ChaCha8Rng::seed_from_u64(5)).len(),
            1
        );
    }

    #[test]
    fn grow_at_depth_two_is_forced() {
        let (g, a) = binary();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let t = grow(&g, &a, g.start(), 2, &mut rng).unwrap();
            assert_eq!(t.phenotype(), "x");
            assert_eq!(t.depth(), 2);
        }
    }

    #[test]
    fn grow_rejects_too_small_budget() {
        let (g, a) = binary();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            grow(&g, &a, g.start(), 1, &mut rng),
            Err(InitError::DepthTooSmall { needed: 2, .. })
        ));
    }

    #[test]
    fn full_prefers_recursion() {
        let (g, a) = binary();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let t = full(&g, &a, g.start(), 4, &mut rng).unwrap();
            match &t {
                DerivationTree::NonTerminal { chosen, .. } => assert_eq!(*chosen, 1),
                _ => unreachable!(),
            }
            assert_eq!(t.depth(), 4);
        }
        let t = full(&g, &a, g.start(), 2, &mut rng).unwrap();
        assert_eq!(t.phenotype(), "x");
    }

    #[test]
    fn ramp_plan_arithmetic() {
        let plan = ramp_plan(500, 2, 6);
        assert_eq!(plan.len(), 500);
        for level in 2..=6 {
            let at: Vec<_> = plan.iter().filter(|(l, _)| *l == level).collect();
            assert_eq!(at.len(), 100);
            assert_eq!(at.iter().filter(|(_, grow)| *grow).count(), 50);
        }
        assert_eq!(ramp_plan(1, 2, 6), vec![(2, true)]);
        assert_eq!(ramp_plan(3, 4, 4), vec![(4, true), (4, true), (4, false)]);
    }

    #[test]
    fn sensible_population_is_bounded() {
        let (g, a) = binary();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = InitConfig::default();
        let pop = sensible_population(&g, &a, 500, &cfg, &mut rng).unwrap();
        assert_eq!(pop.len(), 500);
        for t in &pop {
            t.conforms(&g).unwrap();
            assert!(t.depth() <= 6);
        }
        let single = sensible_population(&g, &a, 1, &cfg, &mut rng).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].depth(), 2);
    }

    #[test]
    fn ptc2_budget_of_one() {
        let (g, a) = binary();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut seen = HashSet::new();
        for _ in 0..200 {
            let (t, n) = ptc2_with_count(&g, &a, g.start(), 1, &mut rng);
            assert_eq!(n, 1);
            seen.insert(t.phenotype());
        }
        let expected: HashSet<String> = ["x", "( x x )"].iter().map(|s| s.to_string()).collect();
        assert_eq!(seen, expected);
    }

    #[test]
    fn ptc2_respects_budget() {
        let (g, a) = binary();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let (t, n) = ptc2_with_count(&g, &a, g.start(), 31, &mut rng);
            assert!(n <= 31);
            t.conforms(&g).unwrap();
            // each counted expansion creates one internal node
            let internal = t.nonterminal_nodes().len();
            assert!(internal >= n);
        }
    }
}
