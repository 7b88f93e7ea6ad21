use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::spec::{load_grammar, ExperimentSpec, MethodName, NamedGrammar};
use super::HarnessError;
use crate::engine::{Engine, RunOutcome};
use crate::init::InitMethod;

/// One cell-run: identity, curves and the final best individual.
/// Non-finite fitness values are stored as `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub grammar: String,
    pub method: String,
    pub initialiser: String,
    pub seed: u64,
    pub best: Vec<Option<f64>>,
    pub mean: Vec<Option<f64>>,
    pub best_so_far: Vec<Option<f64>>,
    pub invalid_fraction: Vec<f64>,
    pub best_phenotype: Option<String>,
    pub best_fitness: Option<f64>,
    /// Whether the problem has a test set; `test_error` is then `null`
    /// only when the error was not finite.
    pub has_test_set: bool,
    pub test_error: Option<f64>,
    pub evaluations: u64,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl RunRecord {
    pub fn from_outcome(
        problem: &str,
        grammar: &str,
        method: &str,
        initialiser: &str,
        seed: u64,
        out: &RunOutcome,
    ) -> Self {
        let g = &out.generations;
        RunRecord {
            problem: problem.into(),
            grammar: grammar.into(),
            method: method.into(),
            initialiser: initialiser.into(),
            seed,
            best: g.iter().map(|s| finite(s.best)).collect(),
            mean: g.iter().map(|s| finite(s.mean)).collect(),
            best_so_far: g.iter().map(|s| finite(s.best_so_far)).collect(),
            invalid_fraction: g.iter().map(|s| s.invalid_fraction).collect(),
            best_phenotype: out.best.phenotype(),
            best_fitness: finite(out.best.fitness),
            has_test_set: out.best_test_error.is_some(),
            test_error: out.best_test_error.and_then(finite),
            evaluations: out.evaluations,
        }
    }

    pub fn generations(&self) -> usize {
        self.best.len()
    }
}

/// Identity of one cell-run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellRun {
    pub grammar: usize,
    pub method: MethodName,
    pub init: InitMethod,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub computed: usize,
    pub skipped: usize,
    pub records: usize,
    pub output_dir: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    config_hash: String,
    base_seed: u64,
    runs: u64,
    cells: usize,
    seed_policy: &'static str,
    package_version: &'static str,
    spec: &'a ExperimentSpec,
}

/// SHA-256 over the spec (as JSON) and every grammar source.
pub fn config_hash(spec: &ExperimentSpec, grammars: &[NamedGrammar]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(spec).expect("spec serialises"));
    for g in grammars {
        h.update(g.label.as_bytes());
        h.update([0]);
        h.update(g.source.as_bytes());
        h.update([0]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn record_path(out: &Path, grammar: &str, method: &str, init: &str, seed: u64) -> PathBuf {
    out.join("runs")
        .join(grammar)
        .join(method)
        .join(init)
        .join(format!("seed-{seed}.json"))
}

/// Options for [`run_experiment`].
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub force: bool,
    /// Worker threads; all cores when `None`.
    pub jobs: Option<usize>,
}

/// Runs every cell of `spec`, writing one JSON record per cell-run, then
/// `results.csv` and `manifest.json`. Relative paths in the spec are
/// resolved against `base`. Records already present from a spec with the
/// same hash are reused unless `force` is set.
pub fn run_experiment(
    spec: &ExperimentSpec,
    base: &Path,
    opts: &RunOptions,
) -> Result<RunSummary, HarnessError> {
    let grammars: Vec<NamedGrammar> = spec
        .grammars
        .iter()
        .map(|g| load_grammar(g, base))
        .collect::<Result<_, _>>()?;
    let problem = spec.problem.build(base)?;
    let problem_label = spec.problem.label();
    for g in &grammars {
        for &m in &spec.methods {
            for &i in &spec.initialisers {
                let cfg = spec.engine.config(m, i, spec.base_seed);
                Engine::new(cfg, &g.grammar, problem.as_ref()).map_err(|e| {
                    HarnessError::user(format!("{} / {} / {}: {e}", g.label, m.label(), i.name()))
                })?;
            }
        }
    }

    let out = spec.output_dir(base);
    fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
    let hash = config_hash(spec, &grammars);
    let manifest_path = out.join("manifest.json");
    let same_config = fs::read_to_string(&manifest_path)
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .is_some_and(|v| v["config_hash"] == hash);
    let reuse = same_config && !opts.force;

    let mut cells = Vec::new();
    for gi in 0..grammars.len() {
        for &method in &spec.methods {
            for &init in &spec.initialisers {
                for r in 0..spec.runs {
                    cells.push(CellRun {
                        grammar: gi,
                        method,
                        init,
                        seed: spec.base_seed + r,
                    });
                }
            }
        }
    }

    let manifest = Manifest {
        name: &spec.name,
        config_hash: hash.clone(),
        base_seed: spec.base_seed,
        runs: spec.runs,
        cells: cells.len(),
        seed_policy: "seed = base_seed + run index",
        package_version: env!("CARGO_PKG_VERSION"),
        spec,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&manifest_path, text).map_err(|e| HarnessError::io(&manifest_path, e))?;

    let work = |cell: &CellRun| -> Result<bool, HarnessError> {
        let g = &grammars[cell.grammar];
        let path = record_path(
            &out,
            &g.label,
            cell.method.label(),
            cell.init.name(),
            cell.seed,
        );
        if reuse && path.exists() {
            return Ok(false);
        }
        let cfg = spec.engine.config(cell.method, cell.init, cell.seed);
        let engine = Engine::new(cfg, &g.grammar, problem.as_ref())
            .map_err(|e| HarnessError::internal(e.to_string()))?;
        let outcome = engine.run();
        let rec = RunRecord::from_outcome(
            &problem_label,
            &g.label,
            cell.method.label(),
            cell.init.name(),
            cell.seed,
            &outcome,
        );
        let dir = path.parent().expect("record path has a parent");
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let text = serde_json::to_string_pretty(&rec).expect("record serialises");
        fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
        Ok(true)
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::internal(e.to_string()))?;
    let results: Vec<Result<bool, HarnessError>> =
        pool.install(|| cells.par_iter().map(work).collect());
    let mut computed = 0;
    for r in results {
        computed += usize::from(r?);
    }

    let mut records = Vec::with_capacity(cells.len());
    for cell in &cells {
        let g = &grammars[cell.grammar];
        let path = record_path(
            &out,
            &g.label,
            cell.method.label(),
            cell.init.name(),
            cell.seed,
        );
        let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        let rec: RunRecord = serde_json::from_str(&text)
            .map_err(|e| HarnessError::internal(format!("{}: {e}", path.display())))?;
        records.push(rec);
    }
    let csv_path = out.join("results.csv");
    write_results_csv(&csv_path, &records)?;

    Ok(RunSummary {
        computed,
        skipped: cells.len() - computed,
        records: records.len(),
        output_dir: out,
    })
}

/// Header of the long-format results table.
pub const CSV_HEADER: [&str; 8] = [
    "problem",
    "grammar",
    "method",
    "initialiser",
    "seed",
    "generation",
    "statistic",
    "value",
];

fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => "inf".into(),
    }
}

/// Writes records in long format: one row per (run, generation,
/// statistic). `test_error` appears once per run at the last generation.
pub fn write_results_csv(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::internal(e.to_string()))?;
    let io = |e: csv::Error| HarnessError::internal(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        let seed = r.seed.to_string();
        let mut row = |g: usize, stat: &str, v: String| {
            w.write_record([
                r.problem.as_str(),
                &r.grammar,
                &r.method,
                &r.initialiser,
                &seed,
                &g.to_string(),
                stat,
                &v,
            ])
        };
        for g in 0..r.generations() {
            row(g, "best", fmt_value(r.best[g])).map_err(io)?;
            row(g, "mean", fmt_value(r.mean[g])).map_err(io)?;
            row(g, "best_so_far", fmt_value(r.best_so_far[g])).map_err(io)?;
            row(g, "invalid_fraction", r.invalid_fraction[g].to_string()).map_err(io)?;
        }
        if r.has_test_set && r.generations() > 0 {
            row(r.generations() - 1, "test_error", fmt_value(r.test_error)).map_err(io)?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let rec = RunRecord {
            problem: "p".into(),
            grammar: "g".into(),
            method: "ge".into(),
            initialiser: "random".into(),
            seed: 3,
            best: vec![Some(2.0), Some(1.5)],
            mean: vec![None, Some(4.0)],
            best_so_far: vec![Some(2.0), Some(1.5)],
            invalid_fraction: vec![0.5, 0.25],
            best_phenotype: Some("x".into()),
            best_fitness: Some(1.5),
            has_test_set: true,
            test_error: Some(1.75),
            evaluations: 20,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_results_csv(&p, &[rec]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "problem,grammar,method,initialiser,seed,generation,statistic,value"
        );
        assert_eq!(lines[1], "p,g,ge,random,3,0,best,2");
        assert_eq!(lines[2], "p,g,ge,random,3,0,mean,inf");
        assert_eq!(lines.len(), 1 + 8 + 1);
        assert_eq!(lines[9], "p,g,ge,random,3,1,test_error,1.75");
    }
}
