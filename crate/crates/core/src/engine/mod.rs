//! Search engines: grammatical evolution (GE), context-free grammar GP
//! (CFG-GP) and random search, sharing one generational loop.

mod operators;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derivation::DerivationTree;
use crate::grammar::{analyze, Grammar, GrammarAnalysis, GrammarError};
use crate::init::{
    grow, ptc2_limited, random_genome, sensible_population, InitConfig, InitError, InitMethod,
};
use crate::mapping::{backmap, map, Genome};
use crate::problems::{Problem, ProblemError, WORST_FITNESS};

pub use operators::{
    cfggp_crossover, cfggp_mutate, cfggp_mutate_detail, ge_crossover, ge_crossover_within,
    ge_mutate, mutation_budget, tournament_select, tournament_size, LargestProduction, Mutation,
    MutationSettings, NodeChoice,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ge,
    #[serde(rename = "cfggp")]
    CfgGp,
    RandomSearch,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeCrossover {
    /// Cut points anywhere in the genome.
    #[default]
    OnePoint,
    /// Cut points restricted to the codons consumed by the mapping.
    Effective,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub method: Method,
    pub population: usize,
    pub generations: usize,
    pub elitism_fraction: f64,
    pub tournament_fraction: f64,
    pub crossover_rate: f64,
    /// GE: expected codon mutations per individual. CFG-GP: probability
    /// that an individual is mutated.
    pub mutation_rate: f64,
    pub max_tree_depth: Option<u32>,
    pub max_mutation_depth: u32,
    pub adaptive_mutation_depth: bool,
    pub largest_production: LargestProduction,
    pub max_wraps: usize,
    pub ge_crossover: GeCrossover,
    pub node_choice: NodeChoice,
    pub init: InitConfig,
    pub seed: u64,
}

impl EngineConfig {
    pub fn ge() -> Self {
        EngineConfig {
            method: Method::Ge,
            population: 500,
            generations: 50,
            elitism_fraction: 0.01,
            tournament_fraction: 0.01,
            crossover_rate: 0.5,
            mutation_rate: 1.0,
            max_tree_depth: None,
            max_mutation_depth: 4,
            adaptive_mutation_depth: false,
            largest_production: LargestProduction::default(),
            max_wraps: 0,
            ge_crossover: GeCrossover::default(),
            node_choice: NodeChoice::default(),
            init: InitConfig::default(),
            seed: 0,
        }
    }

    pub fn cfggp() -> Self {
        EngineConfig {
            method: Method::CfgGp,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            max_tree_depth: Some(17),
            ..Self::ge()
        }
    }

    /// CFG-GP with the adaptive mutation depth and no depth limit.
    pub fn cfggp_adaptive() -> Self {
        EngineConfig {
            adaptive_mutation_depth: true,
            max_tree_depth: None,
            ..Self::cfggp()
        }
    }

    /// One generation of `pop * gens + gens` samples: 25,050 at the GE and
    /// CFG-GP defaults.
    pub fn random_search() -> Self {
        Self::random_search_matching(500, 50)
    }

    pub fn random_search_matching(population: usize, generations: usize) -> Self {
        EngineConfig {
            method: Method::RandomSearch,
            population: population * generations + generations,
            generations: 1,
            ..Self::ge()
        }
    }

    pub fn elite_count(&self) -> usize {
        (self.elitism_fraction * self.population as f64).ceil() as usize
    }

    pub fn mutation_settings(&self) -> MutationSettings {
        MutationSettings {
            max_mutation_depth: self.max_mutation_depth,
            adaptive: self.adaptive_mutation_depth,
            largest: self.largest_production,
            depth_limit: self.max_tree_depth,
        }
    }

    /// Rejects settings that are out of range or meaningless for the method.
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if self.population == 0 || self.generations == 0 {
            return bad("population and generations must be positive");
        }
        for (name, v) in [
            ("elitism_fraction", self.elitism_fraction),
            ("tournament_fraction", self.tournament_fraction),
            ("crossover_rate", self.crossover_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.mutation_rate >= 0.0 && self.mutation_rate.is_finite()) {
            return bad("mutation_rate must be a non-negative number");
        }
        match self.method {
            Method::CfgGp => {
                if self.mutation_rate > 1.0 {
                    return bad("CFG-GP mutation_rate is a probability");
                }
                if self.max_wraps != 0 {
                    return bad("wrapping applies to GE genomes only");
                }
            }
            Method::Ge | Method::RandomSearch => {
                if self.max_tree_depth.is_some() || self.adaptive_mutation_depth {
                    return bad("tree depth limits and mutation depth apply to CFG-GP only");
                }
            }
        }
        if self.method == Method::RandomSearch && self.generations != 1 {
            return bad("random search runs a single generation");
        }
        if self.elite_count() > self.population {
            return bad("more elites than individuals");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid engine configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Init(#[from] InitError),
    #[error("grammar does not fit the problem: {0}")]
    Problem(#[from] ProblemError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Genotype {
    Genome(Genome),
    Tree(DerivationTree),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub genotype: Genotype,
    /// The GE mapping result; unused for tree genotypes.
    mapped: Option<DerivationTree>,
    pub codons_used: usize,
    pub fitness: f64,
}

impl Individual {
    pub fn from_genome(g: Genome) -> Self {
        Individual {
            genotype: Genotype::Genome(g),
            mapped: None,
            codons_used: 0,
            fitness: WORST_FITNESS,
        }
    }

    pub fn from_tree(t: DerivationTree) -> Self {
        Individual {
            genotype: Genotype::Tree(t),
            mapped: None,
            codons_used: 0,
            fitness: WORST_FITNESS,
        }
    }

    /// The derivation tree being evaluated, absent for invalid GE genomes.
    pub fn tree(&self) -> Option<&DerivationTree> {
        match &self.genotype {
            Genotype::Tree(t) => Some(t),
            Genotype::Genome(_) => self.mapped.as_ref(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.tree().is_some()
    }

    pub fn phenotype(&self) -> Option<String> {
        self.tree().map(DerivationTree::phenotype)
    }

    fn evaluate(&mut self, g: &Grammar, max_wraps: usize, problem: &dyn Problem) {
        if let Genotype::Genome(genome) = &self.genotype {
            let out = map(g, genome, max_wraps);
            self.codons_used = out.codons_used;
            self.mapped = out.tree;
        }
        self.fitness = match self.tree() {
            Some(t) => problem.fitness(t),
            None => WORST_FITNESS,
        };
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    /// Mean over finite fitness values; infinite when there are none.
    pub mean: f64,
    pub best_so_far: f64,
    pub invalid_fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub generations: Vec<GenerationStats>,
    pub best: Individual,
    pub best_test_error: Option<f64>,
    /// Fitness evaluations performed, initial population included.
    pub evaluations: u64,
}

/// A configured engine bound to a grammar and a problem.
pub struct Engine<'a> {
    cfg: EngineConfig,
    grammar: &'a Grammar,
    analysis: GrammarAnalysis,
    problem: &'a dyn Problem,
}

impl<'a> Engine<'a> {
    pub fn new(
        cfg: EngineConfig,
        grammar: &'a Grammar,
        problem: &'a dyn Problem,
    ) -> Result<Self, EngineError> {
        cfg.validate()?;
        let analysis = analyze(grammar)?;
        cfg.init.check(grammar, &analysis)?;
        problem.check_grammar(grammar)?;
        if let Some(limit) = cfg.max_tree_depth {
            let needed = analysis.min_depth(grammar.start());
            if limit < needed {
                return Err(EngineError::Config(format!(
                    "max_tree_depth {limit} is below the grammar's minimum depth {needed}"
                )));
            }
        }
        Ok(Engine {
            cfg,
            grammar,
            analysis,
            problem,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn run(&self) -> RunOutcome {
        self.run_observed(|_, _| {})
    }

    /// Runs the search, calling `observe(generation, population)` after each
    /// generation is evaluated.
    pub fn run_observed(&self, mut observe: impl FnMut(usize, &[Individual])) -> RunOutcome {
        let cfg = &self.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut pop = self.initial_population(&mut rng);
        let mut evaluations = self.evaluate(&mut pop);
        let mut history = Vec::with_capacity(cfg.generations);
        let mut best = best_of(&pop).clone();
        for generation in 0..cfg.generations {
            if generation > 0 {
                pop = self.next_generation(&pop, &mut rng);
                evaluations += self.evaluate(&mut pop);
            }
            observe(generation, &pop);
            let gen_best = best_of(&pop);
            if gen_best.fitness < best.fitness {
                best = gen_best.clone();
            }
            let finite: Vec<f64> = pop
                .iter()
                .map(|i| i.fitness)
                .filter(|f| f.is_finite())
                .collect();
            history.push(GenerationStats {
                generation,
                best: gen_best.fitness,
                mean: if finite.is_empty() {
                    WORST_FITNESS
                } else {
                    finite.iter().sum::<f64>() / finite.len() as f64
                },
                best_so_far: best.fitness,
                invalid_fraction: pop.iter().filter(|i| !i.is_valid()).count() as f64
                    / pop.len() as f64,
            });
        }
        let best_test_error = best.tree().and_then(|t| self.problem.test_error(t));
        RunOutcome {
            generations: history,
            best,
            best_test_error,
            evaluations,
        }
    }

    fn evaluate(&self, pop: &mut [Individual]) -> u64 {
        let (g, wraps, p) = (self.grammar, self.cfg.max_wraps, self.problem);
        pop.par_iter_mut().for_each(|ind| ind.evaluate(g, wraps, p));
        pop.len() as u64
    }

    fn initial_population(&self, rng: &mut ChaCha8Rng) -> Vec<Individual> {
        let (g, a, n) = (self.grammar, &self.analysis, self.cfg.population);
        let init = &self.cfg.init;
        let trees = |rng: &mut ChaCha8Rng| -> Vec<DerivationTree> {
            match init.method {
                InitMethod::Random => (0..n)
                    .map(|_| grow(g, a, g.start(), init.random_tree_depth, rng).expect("checked"))
                    .collect(),
                InitMethod::Sensible => sensible_population(g, a, n, init, rng).expect("checked"),
                InitMethod::Ptc2 => (0..n)
                    .map(|_| {
                        ptc2_limited(
                            g,
                            a,
                            g.start(),
                            init.ptc2_max_expansions,
                            self.cfg.max_tree_depth,
                            rng,
                        )
                        .expect("checked")
                        .0
                    })
                    .collect(),
            }
        };
        match (self.cfg.method, init.method) {
            (Method::Ge | Method::RandomSearch, InitMethod::Random) => (0..n)
                .map(|_| Individual::from_genome(random_genome(init, rng)))
                .collect(),
            (Method::Ge, _) => trees(rng)
                .iter()
                .map(|t| {
                    Individual::from_genome(backmap(g, t, rng).expect("tree from this grammar"))
                })
                .collect(),
            (Method::CfgGp | Method::RandomSearch, _) => {
                trees(rng).into_iter().map(Individual::from_tree).collect()
            }
        }
    }

    fn next_generation(&self, pop: &[Individual], rng: &mut ChaCha8Rng) -> Vec<Individual> {
        let cfg = &self.cfg;
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| pop[a].fitness.total_cmp(&pop[b].fitness));
        let mut next: Vec<Individual> = order[..cfg.elite_count()]
            .iter()
            .map(|&i| pop[i].clone())
            .collect();
        let fitness: Vec<f64> = pop.iter().map(|i| i.fitness).collect();
        let settings = cfg.mutation_settings();
        while next.len() < cfg.population {
            let p1 = &pop[tournament_select(&fitness, cfg.tournament_fraction, rng)];
            let p2 = &pop[tournament_select(&fitness, cfg.tournament_fraction, rng)];
            let crossover = rng.gen_bool(cfg.crossover_rate);
            let children = match (&p1.genotype, &p2.genotype) {
                (Genotype::Genome(a), Genotype::Genome(b)) => {
                    let (c1, c2) = if !crossover {
                        (a.clone(), b.clone())
                    } else if cfg.ge_crossover == GeCrossover::Effective {
                        ge_crossover_within(a, p1.codons_used, b, p2.codons_used, rng)
                    } else {
                        ge_crossover(a, b, rng)
                    };
                    [c1, c2].map(|mut c| {
                        for _ in 0..mutation_count(cfg.mutation_rate, rng) {
                            c = ge_mutate(&c, rng);
                        }
                        Individual::from_genome(c)
                    })
                }
                (Genotype::Tree(a), Genotype::Tree(b)) => {
                    let (c1, c2) = if crossover {
                        cfggp_crossover(a, b, cfg.max_tree_depth, cfg.node_choice, rng)
                    } else {
                        (a.clone(), b.clone())
                    };
                    [c1, c2].map(|c| {
                        let c = if rng.gen_bool(cfg.mutation_rate) {
                            cfggp_mutate(&c, self.grammar, &self.analysis, &settings, rng)
                        } else {
                            c
                        };
                        Individual::from_tree(c)
                    })
                }
                _ => unreachable!("one genotype kind per population"),
            };
            for c in children {
                if next.len() < cfg.population {
                    next.push(c);
                }
            }
        }
        next
    }
}

/// Whole part of `rate`, plus one more with probability of its fraction.
fn mutation_count<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> usize {
    let whole = rate.floor();
    whole as usize + usize::from(rng.gen_bool(rate - whole))
}

fn best_of(pop: &[Individual]) -> &Individual {
    pop.iter()
        .min_by(|a, b| a.fitness.total_cmp(&b.fitness))
        .expect("non-empty population")
}

/// Convenience wrapper around [`Engine::new`] and [`Engine::run`].
pub fn run(
    cfg: EngineConfig,
    g: &Grammar,
    problem: &dyn Problem,
) -> Result<RunOutcome, EngineError> {
    Ok(Engine::new(cfg, g, problem)?.run())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::problems::{AntProblem, RegressionProblem};

    fn small(mut c: EngineConfig) -> EngineConfig {
        c.population = 40;
        c.generations = 5;
        c
    }

    #[test]
    fn defaults() {
        let ge = EngineConfig::ge();
        assert_eq!(
            (ge.population, ge.generations, ge.elite_count()),
            (500, 50, 5)
        );
        assert_eq!(EngineConfig::cfggp().max_tree_depth, Some(17));
        assert_eq!(EngineConfig::random_search().population, 25_050);
        assert_eq!(
            EngineConfig::random_search_matching(200, 30).population,
            6030
        );
    }

    #[test]
    fn inconsistent_configs_rejected() {
        let mut c = EngineConfig::ge();
        c.max_tree_depth = Some(17);
        assert!(c.validate().is_err());
        let mut c = EngineConfig::ge();
        c.adaptive_mutation_depth = true;
        assert!(c.validate().is_err());
        let mut c = EngineConfig::random_search();
        c.generations = 2;
        assert!(c.validate().is_err());
        let mut c = EngineConfig::cfggp();
        c.crossover_rate = 1.5;
        assert!(c.validate().is_err());
        let mut c = EngineConfig::cfggp();
        c.max_wraps = 2;
        assert!(c.validate().is_err());
        let g = corpus::ant_grammar(0);
        let p = AntProblem::santa_fe();
        let mut c = EngineConfig::cfggp();
        c.max_tree_depth = Some(3);
        assert!(Engine::new(c, &g, &p).is_err());
    }

    #[test]
    fn grammar_problem_mismatch() {
        let g = corpus::ant_grammar(0);
        let p = RegressionProblem::keijzer6();
        assert!(matches!(
            Engine::new(EngineConfig::ge(), &g, &p),
            Err(EngineError::Problem(_))
        ));
    }

    #[test]
    fn single_generation() {
        let g = corpus::ant_grammar(0);
        let p = AntProblem::santa_fe();
        for c in [EngineConfig::ge(), EngineConfig::cfggp()] {
            let mut c = small(c);
            c.generations = 1;
            let out = run(c, &g, &p).unwrap();
            assert_eq!(out.generations.len(), 1);
            assert_eq!(out.evaluations, 40);
        }
    }

    #[test]
    fn elitism_keeps_best() {
        let g = corpus::ant_grammar(0);
        let p = AntProblem::santa_fe();
        for method in [
            EngineConfig::ge(),
            EngineConfig::cfggp(),
            EngineConfig::cfggp_adaptive(),
        ] {
            for init in [InitMethod::Random, InitMethod::Sensible, InitMethod::Ptc2] {
                let mut c = small(method.clone());
                c.init.method = init;
                let out = run(c, &g, &p).unwrap();
                assert_eq!(out.evaluations, 200);
                for w in out.generations.windows(2) {
                    assert!(w[1].best <= w[0].best);
                    assert!(w[1].best_so_far <= w[0].best_so_far);
                }
                assert_eq!(
                    out.best.fitness,
                    out.generations.last().unwrap().best_so_far
                );
            }
        }
    }

    #[test]
    fn seed_determinism() {
        let g = corpus::regression_grammar_file("keijzer6", 0);
        let p = RegressionProblem::keijzer6();
        let a = run(small(EngineConfig::ge()), &g, &p).unwrap();
        let b = run(small(EngineConfig::ge()), &g, &p).unwrap();
        assert_eq!(a, b);
        let mut c = small(EngineConfig::ge());
        c.seed = 1;
        let d = run(c, &g, &p).unwrap();
        assert_ne!(a.generations, d.generations);
    }

    #[test]
    fn random_search_with_tree_initialiser() {
        let g = corpus::ant_grammar(0);
        let p = AntProblem::santa_fe();
        let mut c = EngineConfig::random_search_matching(10, 3);
        c.init.method = InitMethod::Ptc2;
        let out = run(c, &g, &p).unwrap();
        assert_eq!(out.evaluations, 33);
        assert_eq!(out.generations[0].invalid_fraction, 0.0);
    }
}
