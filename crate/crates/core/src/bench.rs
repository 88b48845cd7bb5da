//! Benchmark harness: runs heuristics over a corpus of trees, processor
//! counts and memory ratios, and aggregates the results.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generators::{GenError, GenSpec};
use crate::schedule::Schedule;
use crate::schedulers::{Heuristic, ScheduleError};
use crate::sequential::optimal_postorder;
use crate::simulator::{evaluate_against, EvalReport};
use crate::transforms::{lift_schedule, normalize_for_memory_limit};
use crate::tree::{TaskTree, TreeError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Tree {
        path: PathBuf,
        #[source]
        source: TreeError,
    },
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{heuristic} did not run: {source}")]
    DidNotRun {
        heuristic: Heuristic,
        #[source]
        source: ScheduleError,
    },
    #[error("{heuristic} failed: {source}")]
    Schedule {
        heuristic: Heuristic,
        #[source]
        source: ScheduleError,
    },
    #[error("{heuristic} produced an infeasible schedule: {message}")]
    Infeasible { heuristic: Heuristic, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl BenchError {
    pub fn is_did_not_run(&self) -> bool {
        matches!(self, BenchError::DidNotRun { .. })
    }
}

/// Schedules `tree` with `heuristic` and evaluates the result on `tree`.
///
/// Memory-limited heuristics run on the tree with execution files removed
/// and turned into a reduction tree; their schedule is lifted back before
/// evaluation. Memory is normalized by the optimal-postorder peak of `tree`.
pub fn run_one(tree: &TaskTree, heuristic: Heuristic, p: usize, limit: Option<u64>) -> Result<EvalReport, BenchError> {
    let reference = optimal_postorder(tree).1;
    run_one_against(tree, heuristic, p, limit, reference)
}

fn run_one_against(
    tree: &TaskTree,
    heuristic: Heuristic,
    p: usize,
    limit: Option<u64>,
    reference: u64,
) -> Result<EvalReport, BenchError> {
    let sched = schedule_original(tree, heuristic, p, limit)?;
    evaluate_against(tree, &sched, reference).map_err(|v| BenchError::Infeasible {
        heuristic,
        message: v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
    })
}

/// The schedule [`run_one`] evaluates, expressed on the nodes of `tree`.
pub fn schedule_original(tree: &TaskTree, heuristic: Heuristic, p: usize, limit: Option<u64>) -> Result<Schedule, BenchError> {
    let fail = |source: ScheduleError| {
        if source.is_memory_infeasible() {
            BenchError::DidNotRun { heuristic, source }
        } else {
            BenchError::Schedule { heuristic, source }
        }
    };
    if heuristic.is_memory_limited() {
        let (reduced, map) = normalize_for_memory_limit(tree);
        let on_reduced = heuristic.schedule(&reduced, p, limit).map_err(fail)?;
        Ok(lift_schedule(&on_reduced, &map).expect("schedule matches the transformed tree"))
    } else {
        heuristic.schedule(tree, p, None).map_err(fail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorpusEntry {
    File {
        path: PathBuf,
    },
    Generated {
        generate: GenSpec,
        /// Number of trees; the seed advances by one per tree.
        #[serde(default = "one")]
        count: usize,
    },
}

fn one() -> usize {
    1
}

fn default_ratios() -> Vec<f64> {
    vec![1.0, 1.5, 2.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub processors: Vec<usize>,
    /// Memory limit = ratio x optimal-postorder peak, for memory-limited
    /// heuristics only.
    #[serde(default = "default_ratios")]
    pub memory_ratios: Vec<f64>,
    pub heuristics: Vec<Heuristic>,
    /// Aggregate JSON report.
    pub output: PathBuf,
    /// Per-run CSV; defaults to `output` with a `.csv` extension.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    pub corpus: Vec<CorpusEntry>,
}

impl BenchConfig {
    /// Reads a TOML configuration; relative paths are taken from the
    /// configuration file's directory.
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: BenchConfig = toml::from_str(&text).map_err(|e| BenchError::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.output = base.join(&config.output);
        config.csv = config.csv.map(|c| base.join(c));
        for entry in &mut config.corpus {
            if let CorpusEntry::File { path } = entry {
                *path = base.join(&*path);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.processors.is_empty() || self.processors.contains(&0) {
            return bad("processors must be a nonempty list of positive counts");
        }
        if self.heuristics.is_empty() {
            return bad("at least one heuristic is required");
        }
        if self.corpus.is_empty() {
            return bad("the corpus is empty");
        }
        if self.heuristics.iter().any(|h| h.is_memory_limited()) {
            if self.memory_ratios.is_empty() {
                return bad("memory-limited heuristics need at least one memory ratio");
            }
            if self.memory_ratios.iter().any(|&x| !x.is_finite() || x < 1.0) {
                return bad("memory ratios must be at least 1");
            }
        }
        for entry in &self.corpus {
            if let CorpusEntry::Generated { generate, count } = entry {
                if *count == 0 {
                    return bad("corpus count must be positive");
                }
                if *count > 1 && !matches!(generate, GenSpec::RandomAssembly(_)) {
                    return bad("count above 1 is only meaningful for random families");
                }
            }
        }
        Ok(())
    }

    pub fn csv_path(&self) -> PathBuf {
        self.csv.clone().unwrap_or_else(|| self.output.with_extension("csv"))
    }

    /// Loads or generates every corpus tree, with its display name.
    pub fn load_corpus(&self) -> Result<Vec<(String, TaskTree)>, BenchError> {
        let mut trees = Vec::new();
        for entry in &self.corpus {
            match entry {
                CorpusEntry::File { path } => {
                    let text = fs::read_to_string(path).map_err(|source| BenchError::Io {
                        path: path.clone(),
                        source,
                    })?;
                    let tree = TaskTree::parse(&text).map_err(|source| BenchError::Tree {
                        path: path.clone(),
                        source,
                    })?;
                    trees.push((path.display().to_string(), tree));
                }
                CorpusEntry::Generated { generate, count } => {
                    for i in 0..*count {
                        let spec = generate.reseeded(i as u64);
                        trees.push((spec.label(), spec.build()?));
                    }
                }
            }
        }
        Ok(trees)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    DidNotRun,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub tree: String,
    pub heuristic: Heuristic,
    pub p: usize,
    pub mem_ratio: Option<f64>,
    pub mem_limit: Option<u64>,
    pub status: Status,
    pub makespan: Option<u64>,
    pub peak_memory: Option<u64>,
    pub norm_makespan: Option<f64>,
    pub norm_memory: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeuristicSummary {
    pub heuristic: Heuristic,
    pub runs: usize,
    pub completed: usize,
    pub success_rate: f64,
    /// Keyed by the memory ratio; absent for unlimited heuristics.
    pub success_rate_by_ratio: BTreeMap<String, f64>,
    pub mean_norm_memory: Option<f64>,
    pub mean_norm_makespan: Option<f64>,
    /// Fractions of scenarios (tree, p, ratio) where the heuristic reaches
    /// the best value among the heuristics run on that scenario, or comes
    /// within 5% of it.
    pub best_memory_share: f64,
    pub within_5pct_memory_share: f64,
    pub best_makespan_share: f64,
    pub within_5pct_makespan_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub processors: Vec<usize>,
    pub memory_ratios: Vec<f64>,
    pub heuristics: Vec<Heuristic>,
    pub trees: usize,
    pub rows: Vec<Row>,
    pub summary: Vec<HeuristicSummary>,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|source| BenchError::Io {
            path: PathBuf::from("<csv>"),
            source,
        })?;
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

struct Cell {
    tree: usize,
    heuristic: Heuristic,
    p: usize,
    ratio: Option<usize>,
}

/// Runs every (tree, heuristic, p, ratio) cell; cells run in parallel and
/// rows come out in configuration order.
pub fn run_bench(config: &BenchConfig) -> Result<BenchReport, BenchError> {
    config.validate()?;
    let corpus = config.load_corpus()?;
    Ok(run_on_corpus(config, &corpus))
}

/// [`run_bench`] on an already loaded corpus.
pub fn run_on_corpus(config: &BenchConfig, corpus: &[(String, TaskTree)]) -> BenchReport {
    let references: Vec<u64> = corpus.par_iter().map(|(_, t)| optimal_postorder(t).1).collect();
    let mut cells = Vec::new();
    for tree in 0..corpus.len() {
        for &heuristic in &config.heuristics {
            for &p in &config.processors {
                if heuristic.is_memory_limited() {
                    for r in 0..config.memory_ratios.len() {
                        cells.push(Cell {
                            tree,
                            heuristic,
                            p,
                            ratio: Some(r),
                        });
                    }
                } else {
                    cells.push(Cell {
                        tree,
                        heuristic,
                        p,
                        ratio: None,
                    });
                }
            }
        }
    }
    let rows: Vec<Row> = cells
        .par_iter()
        .map(|cell| {
            let (name, tree) = &corpus[cell.tree];
            let reference = references[cell.tree];
            let mem_ratio = cell.ratio.map(|r| config.memory_ratios[r]);
            let mem_limit = mem_ratio.map(|x| memory_limit(x, reference));
            let mut row = Row {
                tree: name.clone(),
                heuristic: cell.heuristic,
                p: cell.p,
                mem_ratio,
                mem_limit,
                status: Status::DidNotRun,
                makespan: None,
                peak_memory: None,
                norm_makespan: None,
                norm_memory: None,
            };
            match run_one_against(tree, cell.heuristic, cell.p, mem_limit, reference) {
                Ok(r) => {
                    row.status = Status::Ok;
                    row.makespan = Some(r.makespan);
                    row.peak_memory = Some(r.peak_memory);
                    row.norm_makespan = Some(r.normalized_makespan);
                    row.norm_memory = Some(r.normalized_memory);
                }
                Err(e) if e.is_did_not_run() => {}
                Err(e) => panic!("{name}: {e}"),
            }
            row
        })
        .collect();
    let summary = summarize(&config.heuristics, &rows);
    BenchReport {
        schema_version: SCHEMA_VERSION,
        processors: config.processors.clone(),
        memory_ratios: config.memory_ratios.clone(),
        heuristics: config.heuristics.clone(),
        trees: corpus.len(),
        rows,
        summary,
    }
}

/// `floor(ratio * reference)`.
pub fn memory_limit(ratio: f64, reference: u64) -> u64 {
    (ratio * reference as f64).floor() as u64
}

fn ratio_key(x: f64) -> String {
    format!("{x}")
}

fn summarize(heuristics: &[Heuristic], rows: &[Row]) -> Vec<HeuristicSummary> {
    // best values per scenario among completed runs
    type Scenario = (String, usize, Option<String>);
    let scenario = |r: &Row| -> Scenario { (r.tree.clone(), r.p, r.mem_ratio.map(ratio_key)) };
    let mut best: BTreeMap<Scenario, (u64, u64)> = BTreeMap::new();
    for r in rows {
        if let (Some(m), Some(c)) = (r.peak_memory, r.makespan) {
            let e = best.entry(scenario(r)).or_insert((u64::MAX, u64::MAX));
            e.0 = e.0.min(m);
            e.1 = e.1.min(c);
        }
    }
    let share = |hits: usize, total: usize| if total == 0 { 0.0 } else { hits as f64 / total as f64 };
    let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);

    heuristics
        .iter()
        .map(|&h| {
            let mine: Vec<&Row> = rows.iter().filter(|r| r.heuristic == h).collect();
            let done: Vec<&Row> = mine.iter().copied().filter(|r| r.status == Status::Ok).collect();
            let mut by_ratio: BTreeMap<String, (usize, usize)> = BTreeMap::new();
            for r in &mine {
                if let Some(x) = r.mem_ratio {
                    let e = by_ratio.entry(ratio_key(x)).or_default();
                    e.0 += 1;
                    e.1 += usize::from(r.status == Status::Ok);
                }
            }
            let count = |within: f64, pick: fn(&Row) -> Option<u64>, best_of: fn(&(u64, u64)) -> u64| {
                done.iter()
                    .filter(|r| {
                        let b = best_of(&best[&scenario(r)]) as f64;
                        pick(r).expect("completed row") as f64 <= b * within
                    })
                    .count()
            };
            let norm_mem: Vec<f64> = done.iter().filter_map(|r| r.norm_memory).collect();
            let norm_mk: Vec<f64> = done.iter().filter_map(|r| r.norm_makespan).collect();
            HeuristicSummary {
                heuristic: h,
                runs: mine.len(),
                completed: done.len(),
                success_rate: share(done.len(), mine.len()),
                success_rate_by_ratio: by_ratio.into_iter().map(|(k, (n, ok))| (k, share(ok, n))).collect(),
                mean_norm_memory: mean(&norm_mem),
                mean_norm_makespan: mean(&norm_mk),
                best_memory_share: share(count(1.0, |r| r.peak_memory, |b| b.0), mine.len()),
                within_5pct_memory_share: share(count(1.05, |r| r.peak_memory, |b| b.0), mine.len()),
                best_makespan_share: share(count(1.0, |r| r.makespan, |b| b.1), mine.len()),
                within_5pct_makespan_share: share(count(1.05, |r| r.makespan, |b| b.1), mine.len()),
            }
        })
        .collect()
}
