use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::corpus;
use crate::engine::{EngineConfig, GeCrossover, LargestProduction, NodeChoice};
use crate::grammar::{parse_bnf, validate, Grammar};
use crate::init::InitMethod;
use crate::problems::{load_csv, AntProblem, Problem, RegressionProblem, TrailWorld};

/// Environment variable naming the output directory used when a spec does
/// not set one.
pub const OUTPUT_DIR_ENV: &str = "GGEC_OUTPUT_DIR";

/// An experiment grid read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_runs")]
    pub runs: u64,
    pub problem: ProblemSpec,
    /// Grammar files, or `builtin:<name>` for bundled grammars.
    pub grammars: Vec<String>,
    pub methods: Vec<MethodName>,
    #[serde(default = "default_inits")]
    pub initialisers: Vec<InitMethod>,
    #[serde(default)]
    pub engine: EngineOverrides,
}

fn default_runs() -> u64 {
    30
}

fn default_inits() -> Vec<InitMethod> {
    vec![InitMethod::Random]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Ge,
    #[serde(rename = "cfggp")]
    CfgGp,
    #[serde(rename = "cfggp-adaptive")]
    CfgGpAdaptive,
    RandomSearch,
}

impl MethodName {
    pub fn label(&self) -> &'static str {
        match self {
            MethodName::Ge => "ge",
            MethodName::CfgGp => "cfggp",
            MethodName::CfgGpAdaptive => "cfggp-adaptive",
            MethodName::RandomSearch => "random-search",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Keijzer6,
    Vladislavleva4 {
        #[serde(default)]
        data_seed: u64,
    },
    SantaFe {
        #[serde(default = "default_steps")]
        max_steps: usize,
        /// Alternative trail file; the bundled Santa Fe trail otherwise.
        #[serde(default)]
        trail: Option<PathBuf>,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        target: Option<String>,
        #[serde(default)]
        split_seed: u64,
        #[serde(default = "default_fraction")]
        train_fraction: f64,
    },
}

fn default_steps() -> usize {
    600
}

fn default_fraction() -> f64 {
    0.75
}

impl ProblemSpec {
    pub fn label(&self) -> String {
        match self {
            ProblemSpec::Keijzer6 => "keijzer6".into(),
            ProblemSpec::Vladislavleva4 { .. } => "vladislavleva4".into(),
            ProblemSpec::SantaFe { .. } => "santa-fe".into(),
            ProblemSpec::Csv { path, .. } => path
                .file_stem()
                .map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned()),
        }
    }

    /// Builds the problem; relative paths are resolved against `base`.
    pub fn build(&self, base: &Path) -> Result<Box<dyn Problem>, HarnessError> {
        Ok(match self {
            ProblemSpec::Keijzer6 => Box::new(RegressionProblem::keijzer6()),
            ProblemSpec::Vladislavleva4 { data_seed } => {
                Box::new(RegressionProblem::vladislavleva4(*data_seed))
            }
            ProblemSpec::SantaFe { max_steps, trail } => {
                let world = match trail {
                    None => TrailWorld::santa_fe(*max_steps),
                    Some(p) => {
                        let p = base.join(p);
                        let text = std::fs::read_to_string(&p)
                            .map_err(|e| HarnessError::user(format!("{}: {e}", p.display())))?;
                        TrailWorld::parse(&text, *max_steps)
                            .map_err(|e| HarnessError::user(format!("{}: {e}", p.display())))?
                    }
                };
                Box::new(AntProblem::new(world))
            }
            ProblemSpec::Csv {
                path,
                target,
                split_seed,
                train_fraction,
            } => {
                let p = base.join(path);
                let d = load_csv(&p, target.as_deref(), *split_seed, *train_fraction)
                    .map_err(|e| HarnessError::user(format!("{}: {e}", p.display())))?;
                if d.dropped_rows > 0 {
                    eprintln!("warning: {}: dropped {} rows", p.display(), d.dropped_rows);
                }
                Box::new(RegressionProblem::from_dataset(self.label(), &d))
            }
        })
    }
}

/// Engine settings that replace the per-method defaults when present.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineOverrides {
    pub population: Option<usize>,
    pub generations: Option<usize>,
    pub elitism_fraction: Option<f64>,
    pub tournament_fraction: Option<f64>,
    pub ge_crossover_rate: Option<f64>,
    pub cfggp_crossover_rate: Option<f64>,
    pub ge_mutation_rate: Option<f64>,
    pub cfggp_mutation_rate: Option<f64>,
    pub max_tree_depth: Option<u32>,
    pub max_mutation_depth: Option<u32>,
    pub max_wraps: Option<usize>,
    pub random_codons: Option<usize>,
    pub random_tree_depth: Option<u32>,
    pub sensible_max_depth: Option<u32>,
    pub ptc2_max_expansions: Option<usize>,
    pub largest_production: Option<LargestProduction>,
    pub ge_crossover: Option<GeCrossover>,
    pub node_choice: Option<NodeChoice>,
}

impl EngineOverrides {
    /// Engine configuration for one cell. Random search gets a single
    /// generation of `population * generations + generations` samples.
    pub fn config(&self, method: MethodName, init: InitMethod, seed: u64) -> EngineConfig {
        let pop = self.population.unwrap_or(500);
        let gens = self.generations.unwrap_or(50);
        let mut c = match method {
            MethodName::Ge => EngineConfig::ge(),
            MethodName::CfgGp => EngineConfig::cfggp(),
            MethodName::CfgGpAdaptive => EngineConfig::cfggp_adaptive(),
            MethodName::RandomSearch => EngineConfig::random_search_matching(pop, gens),
        };
        if method != MethodName::RandomSearch {
            c.population = pop;
            c.generations = gens;
        }
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut c.elitism_fraction, self.elitism_fraction);
        set(&mut c.tournament_fraction, self.tournament_fraction);
        match method {
            MethodName::Ge => {
                set(&mut c.crossover_rate, self.ge_crossover_rate);
                set(&mut c.mutation_rate, self.ge_mutation_rate);
            }
            MethodName::CfgGp | MethodName::CfgGpAdaptive => {
                set(&mut c.crossover_rate, self.cfggp_crossover_rate);
                set(&mut c.mutation_rate, self.cfggp_mutation_rate);
                if method == MethodName::CfgGp && self.max_tree_depth.is_some() {
                    c.max_tree_depth = self.max_tree_depth;
                }
                if let Some(d) = self.max_mutation_depth {
                    c.max_mutation_depth = d;
                }
                if let Some(l) = self.largest_production {
                    c.largest_production = l;
                }
                if let Some(n) = self.node_choice {
                    c.node_choice = n;
                }
            }
            MethodName::RandomSearch => {}
        }
        if matches!(method, MethodName::Ge | MethodName::RandomSearch) {
            if let Some(w) = self.max_wraps {
                c.max_wraps = w;
            }
        }
        if let Some(x) = self.ge_crossover {
            c.ge_crossover = x;
        }
        if let Some(v) = self.random_codons {
            c.init.random_codons = v;
        }
        if let Some(v) = self.random_tree_depth {
            c.init.random_tree_depth = v;
        }
        if let Some(v) = self.sensible_max_depth {
            c.init.sensible_max_depth = v;
        }
        if let Some(v) = self.ptc2_max_expansions {
            c.init.ptc2_max_expansions = v;
        }
        c.init.method = init;
        c.seed = seed;
        c
    }
}

/// A grammar resolved from a spec entry.
#[derive(Clone, Debug)]
pub struct NamedGrammar {
    pub label: String,
    pub source: String,
    pub grammar: Grammar,
}

/// Loads `entry` (a path relative to `base`, or `builtin:<name>`).
pub fn load_grammar(entry: &str, base: &Path) -> Result<NamedGrammar, HarnessError> {
    let (label, source, origin) = if let Some(name) = entry.strip_prefix("builtin:") {
        let s = corpus::source(name)
            .ok_or_else(|| HarnessError::user(format!("no bundled grammar '{name}'")))?;
        (name.to_string(), s.to_string(), entry.to_string())
    } else {
        let p = base.join(entry);
        let s = std::fs::read_to_string(&p)
            .map_err(|e| HarnessError::user(format!("{}: {e}", p.display())))?;
        let label = p
            .file_stem()
            .map_or_else(|| entry.to_string(), |s| s.to_string_lossy().into_owned());
        (label, s, p.display().to_string())
    };
    let grammar = parse_bnf(&source).map_err(|e| HarnessError::user(format!("{origin}: {e}")))?;
    let fatal: Vec<String> = validate(&grammar)
        .into_iter()
        .filter(|d| d.is_fatal())
        .map(|d| d.to_string())
        .collect();
    if !fatal.is_empty() {
        return Err(HarnessError::user(format!(
            "{origin}: {}",
            fatal.join("; ")
        )));
    }
    Ok(NamedGrammar {
        label,
        source,
        grammar,
    })
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| HarnessError::user(format!("invalid spec: {e}")))?;
        spec.check()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::user(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
            .map_err(|e| HarnessError::user(format!("{}: {}", path.display(), e.message())))
    }

    fn check(&self) -> Result<(), HarnessError> {
        if self.runs == 0 {
            return Err(HarnessError::user("runs must be at least 1"));
        }
        if self.grammars.is_empty() || self.methods.is_empty() || self.initialisers.is_empty() {
            return Err(HarnessError::user(
                "grammars, methods and initialisers must be non-empty",
            ));
        }
        Ok(())
    }

    /// The output directory: the spec's own, else `$GGEC_OUTPUT_DIR/<name>`,
    /// else `results/<name>`; relative paths are resolved against `base`.
    pub fn output_dir(&self, base: &Path) -> PathBuf {
        match &self.output_dir {
            Some(d) => base.join(d),
            None => {
                let root = std::env::var_os(OUTPUT_DIR_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("results"));
                base.join(root).join(&self.name)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: &str = r#"
name = "demo"
runs = 3
grammars = ["builtin:keijzer6-g0"]
methods = ["ge", "cfggp", "cfggp-adaptive", "random-search"]
initialisers = ["random", "ptc2"]

[problem]
name = "keijzer6"

[engine]
population = 20
generations = 4
max_mutation_depth = 5
"#;

    #[test]
    fn parses_and_builds_configs() {
        let s = ExperimentSpec::from_toml(SPEC).unwrap();
        assert_eq!(s.runs, 3);
        assert_eq!(s.base_seed, 0);
        assert_eq!(s.methods.len(), 4);
        let rs = s
            .engine
            .config(MethodName::RandomSearch, InitMethod::Random, 7);
        assert_eq!((rs.population, rs.generations, rs.seed), (84, 1, 7));
        let cg = s.engine.config(MethodName::CfgGp, InitMethod::Ptc2, 1);
        assert_eq!((cg.population, cg.max_mutation_depth), (20, 5));
        assert_eq!(cg.init.method, InitMethod::Ptc2);
        let ad = s
            .engine
            .config(MethodName::CfgGpAdaptive, InitMethod::Random, 1);
        assert!(ad.adaptive_mutation_depth);
        assert_eq!(ad.max_tree_depth, None);
        for m in s.methods {
            assert!(s.engine.config(m, InitMethod::Random, 0).validate().is_ok());
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ExperimentSpec::from_toml(&SPEC.replace("runs = 3", "runs = 0")).is_err());
        assert!(ExperimentSpec::from_toml(&SPEC.replace("\"ge\",", "\"gx\",")).is_err());
        assert!(ExperimentSpec::from_toml(&SPEC.replace("population", "popsize")).is_err());
        assert!(ExperimentSpec::from_toml("name = 1").is_err());
    }

    #[test]
    fn problem_specs() {
        let p: ProblemSpec = toml::from_str("name = \"santa-fe\"").unwrap();
        assert_eq!(
            p,
            ProblemSpec::SantaFe {
                max_steps: 600,
                trail: None
            }
        );
        let p: ProblemSpec = toml::from_str("name = \"csv\"\npath = \"data/boston.csv\"").unwrap();
        assert_eq!(p.label(), "boston");
    }

    #[test]
    fn builtin_and_missing_grammars() {
        let g = load_grammar("builtin:ant-g0", Path::new(".")).unwrap();
        assert_eq!(g.label, "ant-g0");
        assert!(load_grammar("builtin:nope", Path::new(".")).is_err());
        assert!(load_grammar("/definitely/missing.bnf", Path::new(".")).is_err());
    }
}
