//! Python bindings for `ggec`, exposed as the `pyggec` module.
//!
//! ```python
//! import pyggec
//! g = pyggec.Grammar.builtin("ant-g0")
//! print(g.analyze())
//! result = pyggec.run("santa-fe", g, method="cfggp", population=100, generations=10)
//! ```

use std::path::Path;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ggec::corpus;
use ggec::derivation::DerivationTree;
use ggec::engine::{Engine, EngineConfig};
use ggec::grammar::{analyze, parse_bnf, Grammar};
use ggec::harness::{
    analyze_report, run_experiment as harness_run, EngineOverrides, ExperimentSpec, MethodName,
    ProblemSpec, RunOptions,
};
use ggec::init::{full, grow, ptc2, InitMethod};
use ggec::mapping::{backmap, map, Genome};
use ggec::problems::Problem;
use ggec::transform::{balance, inline_nonterminal, unlink};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn method_name(name: &str) -> Result<MethodName, String> {
    Ok(match name {
        "ge" => MethodName::Ge,
        "cfggp" => MethodName::CfgGp,
        "cfggp-adaptive" => MethodName::CfgGpAdaptive,
        "random-search" => MethodName::RandomSearch,
        other => return Err(format!("unknown method '{other}'")),
    })
}

/// Engine settings for one run, on top of the method's defaults.
pub fn engine_config(
    method: &str,
    init: &str,
    population: usize,
    generations: usize,
    seed: u64,
) -> Result<EngineConfig, String> {
    let method = method_name(method)?;
    let init = InitMethod::parse(init).ok_or_else(|| format!("unknown initialiser '{init}'"))?;
    let overrides = EngineOverrides {
        population: Some(population),
        generations: Some(generations),
        ..Default::default()
    };
    let cfg = overrides.config(method, init, seed);
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// Builds one of the bundled benchmark problems by name.
pub fn problem(name: &str) -> Result<Box<dyn Problem>, String> {
    let spec = match name {
        "keijzer6" => ProblemSpec::Keijzer6,
        "vladislavleva4" => ProblemSpec::Vladislavleva4 { data_seed: 0 },
        "santa-fe" => ProblemSpec::SantaFe {
            max_steps: 600,
            trail: None,
        },
        other => return Err(format!("unknown problem '{other}'")),
    };
    spec.build(Path::new(".")).map_err(|e| e.to_string())
}

/// A BNF grammar.
#[pyclass(name = "Grammar", module = "pyggec", frozen)]
pub struct PyGrammar {
    inner: Grammar,
}

#[pymethods]
impl PyGrammar {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        let inner = parse_bnf(text).map_err(value_error)?;
        analyze(&inner).map_err(value_error)?;
        Ok(PyGrammar { inner })
    }

    /// One of the grammars shipped with the library, e.g. `"ant-g0"`.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        corpus::builtin(name)
            .map(|inner| PyGrammar { inner })
            .ok_or_else(|| value_error(format!("no bundled grammar '{name}'")))
    }

    #[staticmethod]
    fn builtin_names() -> Vec<&'static str> {
        corpus::BUILTIN.iter().map(|(n, _)| *n).collect()
    }

    fn render(&self) -> String {
        self.inner.render()
    }

    fn nonterminals(&self) -> Vec<String> {
        self.inner.rules().iter().map(|r| r.name.clone()).collect()
    }

    /// Minimum depth and recursion report, as printed by `ggec grammar analyze`.
    fn analyze(&self) -> PyResult<String> {
        analyze_report(&self.inner).map_err(|e| value_error(e.message()))
    }

    fn min_depth(&self, nonterminal: &str) -> PyResult<u32> {
        let id = self.inner.rule_id(nonterminal).map_err(value_error)?;
        Ok(analyze(&self.inner).map_err(value_error)?.min_depth(id))
    }

    fn balance(&self, nonterminal: &str) -> PyResult<Self> {
        let inner = balance(&self.inner, nonterminal).map_err(value_error)?;
        Ok(PyGrammar { inner })
    }

    fn inline(&self, nonterminal: &str) -> PyResult<Self> {
        let inner = inline_nonterminal(&self.inner, nonterminal).map_err(value_error)?;
        Ok(PyGrammar { inner })
    }

    fn unlink(&self) -> PyResult<Self> {
        let inner = unlink(&self.inner).map_err(value_error)?;
        Ok(PyGrammar { inner })
    }

    /// Maps a GE genome; `None` when it runs out of codons.
    #[pyo3(signature = (codons, max_wraps = 0))]
    fn map(&self, codons: Vec<u32>, max_wraps: usize) -> PyResult<Option<PyTree>> {
        let genome = Genome::new(codons).map_err(value_error)?;
        Ok(map(&self.inner, &genome, max_wraps)
            .tree
            .map(|tree| PyTree {
                tree,
                grammar: self.inner.clone(),
            }))
    }

    /// Draws a derivation tree with `"grow"`, `"full"` or `"ptc2"`. For
    /// PTC2, `size` is the expansion budget; otherwise it is the depth.
    #[pyo3(signature = (method = "grow", size = 6, seed = 0))]
    fn sample(&self, method: &str, size: u32, seed: u64) -> PyResult<PyTree> {
        let g = &self.inner;
        let a = analyze(g).map_err(value_error)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = match method {
            "grow" => grow(g, &a, g.start(), size, &mut rng).map_err(value_error)?,
            "full" => full(g, &a, g.start(), size, &mut rng).map_err(value_error)?,
            "ptc2" => ptc2(g, &a, g.start(), size as usize, &mut rng),
            other => return Err(value_error(format!("unknown sampler '{other}'"))),
        };
        Ok(PyTree {
            tree,
            grammar: g.clone(),
        })
    }

    fn parse_tree(&self, text: &str) -> PyResult<PyTree> {
        let tree = DerivationTree::from_debug_string(&self.inner, text).map_err(value_error)?;
        Ok(PyTree {
            tree,
            grammar: self.inner.clone(),
        })
    }

    fn __repr__(&self) -> String {
        format!("Grammar({} rules)", self.inner.rules().len())
    }
}

/// A derivation tree bound to its grammar.
#[pyclass(name = "Tree", module = "pyggec", frozen)]
pub struct PyTree {
    tree: DerivationTree,
    grammar: Grammar,
}

#[pymethods]
impl PyTree {
    fn phenotype(&self) -> String {
        self.tree.phenotype()
    }

    fn depth(&self) -> usize {
        self.tree.depth()
    }

    fn size(&self) -> usize {
        self.tree.size()
    }

    fn debug_string(&self) -> String {
        self.tree.to_debug_string(&self.grammar)
    }

    /// A genome that maps back to this tree, with degenerate codons drawn
    /// from `seed`.
    #[pyo3(signature = (seed = 0))]
    fn backmap(&self, seed: u64) -> PyResult<Vec<u32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let genome = backmap(&self.grammar, &self.tree, &mut rng).map_err(value_error)?;
        Ok(genome.into_codons())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.tree == other.tree
    }

    fn __repr__(&self) -> String {
        format!("Tree({:?})", self.tree.phenotype())
    }
}

/// Runs one search and returns a dict with the best individual and the
/// per-generation curves.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (problem_name, grammar, method = "cfggp", population = 500, generations = 50, seed = 0, init = "random"))]
fn run<'py>(
    py: Python<'py>,
    problem_name: &str,
    grammar: &PyGrammar,
    method: &str,
    population: usize,
    generations: usize,
    seed: u64,
    init: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = engine_config(method, init, population, generations, seed).map_err(value_error)?;
    let p = problem(problem_name).map_err(value_error)?;
    let g = &grammar.inner;
    let out = py.detach(|| Engine::new(cfg, g, p.as_ref()).map(|e| e.run()));
    let out = out.map_err(value_error)?;
    let d = PyDict::new(py);
    d.set_item("best_fitness", out.best.fitness)?;
    d.set_item("best_phenotype", out.best.phenotype())?;
    d.set_item("test_error", out.best_test_error)?;
    d.set_item("evaluations", out.evaluations)?;
    let col = |f: fn(&ggec::engine::GenerationStats) -> f64| -> Vec<f64> {
        out.generations.iter().map(f).collect()
    };
    d.set_item("best", col(|s| s.best))?;
    d.set_item("mean", col(|s| s.mean))?;
    d.set_item("best_so_far", col(|s| s.best_so_far))?;
    d.set_item("invalid_fraction", col(|s| s.invalid_fraction))?;
    Ok(d)
}

/// Runs an experiment spec file, like `ggec run`. Returns
/// `(computed, reused, output_dir)`.
#[pyfunction]
#[pyo3(signature = (spec_path, force = false, jobs = None))]
fn run_experiment(
    py: Python<'_>,
    spec_path: &str,
    force: bool,
    jobs: Option<usize>,
) -> PyResult<(usize, usize, String)> {
    let path = Path::new(spec_path);
    let spec = ExperimentSpec::load(path).map_err(|e| value_error(e.message()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let summary = py
        .detach(|| harness_run(&spec, base, &RunOptions { force, jobs }))
        .map_err(|e| value_error(e.message()))?;
    Ok((
        summary.computed,
        summary.skipped,
        summary.output_dir.display().to_string(),
    ))
}

#[pymodule]
fn pyggec(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrammar>()?;
    m.add_class::<PyTree>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configs_follow_method_names() {
        let c = engine_config("cfggp-adaptive", "ptc2", 20, 3, 4).unwrap();
        assert!(c.adaptive_mutation_depth);
        assert_eq!((c.population, c.generations, c.seed), (20, 3, 4));
        assert_eq!(c.init.method, InitMethod::Ptc2);
        let rs = engine_config("random-search", "random", 20, 3, 0).unwrap();
        assert_eq!((rs.population, rs.generations), (63, 1));
        assert!(engine_config("gp", "random", 20, 3, 0).is_err());
        assert!(engine_config("ge", "bogus", 20, 3, 0).is_err());
    }

    #[test]
    fn problems_by_name() {
        assert_eq!(problem("keijzer6").unwrap().name(), "keijzer6");
        assert!(problem("santa-fe").is_ok());
        assert!(problem("nope").is_err());
    }
}
