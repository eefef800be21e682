//! Study runner: every DAG of a suite under every input rate, pool setup,
//! network dataset and solver, with per-run records and a summary table.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::daggen::{self, derive_seed, SuiteManifest, SuiteSpec};
use crate::dataflow::{DagFile, QueryDag};
use crate::placement::{invalid_pct, latency_deviation, Problem};
use crate::profiles::BenchmarkDataset;
use crate::resources::{EnergyConfig, ResourcePool, Setup};
use crate::scenario::RuntimeScenario;
use crate::solver::baselines::{solve_cloud_only, solve_random, BaselineError, DEFAULT_TRIALS};
use crate::solver::bf::{solve_bf, BfError, BfOptions};
use crate::solver::ga::{solve_ga, GaConfig};
use crate::solver::Solution;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "CEP_PLACE_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Bf,
    Ga,
    Random,
    CloudOnly,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [SolverKind::Bf, SolverKind::Ga, SolverKind::Random, SolverKind::CloudOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Bf => "bf",
            SolverKind::Ga => "ga",
            SolverKind::Random => "random",
            SolverKind::CloudOnly => "cloud_only",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let name = s.replace('-', "_");
        SolverKind::ALL
            .into_iter()
            .find(|k| k.as_str() == name)
            .ok_or_else(|| format!("unknown solver `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Bundled dataset names or dataset file paths, one per network.
    pub datasets: Vec<String>,
    /// Suite manifest to load; when absent a suite is generated.
    pub suite_manifest: Option<PathBuf>,
    pub suite_seed: u64,
    /// Vertex counts of the generated suite.
    pub sizes: Vec<usize>,
    pub instances_per_size: usize,
    /// Drop DAGs with more vertices than this.
    pub max_vertices: Option<usize>,
    pub rates: Vec<f64>,
    pub setups: Vec<Setup>,
    pub solvers: Vec<SolverKind>,
    pub ga: GaConfig,
    pub random_trials: usize,
    /// Skip BF on DAGs with more unpinned vertices than this.
    pub bf_max_unpinned: usize,
    pub bf_budget_secs: f64,
    pub bf_prune: bool,
    pub energy: EnergyConfig,
    /// Master seed for scenarios and solver seeds.
    pub seed: u64,
    /// Record the input-rate headroom of every valid GA placement.
    pub headroom: bool,
    pub include_sink_compute: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            datasets: crate::profiles::BUNDLED.iter().map(|s| s.to_string()).collect(),
            suite_manifest: None,
            suite_seed: 42,
            sizes: vec![4, 6, 8, 10, 12, 20, 30, 40, 50],
            instances_per_size: 3,
            max_vertices: None,
            rates: vec![100.0, 1000.0],
            setups: Setup::ALL.to_vec(),
            solvers: SolverKind::ALL.to_vec(),
            ga: GaConfig::default(),
            random_trials: DEFAULT_TRIALS,
            bf_max_unpinned: 12,
            bf_budget_secs: 300.0,
            bf_prune: true,
            energy: EnergyConfig::default(),
            seed: 1,
            headroom: false,
            include_sink_compute: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // Relative manifest paths are taken from the config's directory.
        if let (Some(m), Some(dir)) = (&cfg.suite_manifest, path.parent()) {
            if m.is_relative() {
                cfg.suite_manifest = Some(dir.join(m));
            }
        }
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.datasets.is_empty() || self.rates.is_empty() || self.setups.is_empty() || self.solvers.is_empty() {
            bail!("datasets, rates, setups and solvers must be non-empty");
        }
        if self.rates.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            bail!("input rates must be positive");
        }
        self.ga.check().map_err(anyhow::Error::msg)?;
        Ok(())
    }
}

/// One suite member ready for the study.
#[derive(Debug, Clone)]
pub struct SuiteDag {
    pub id: String,
    pub dag: QueryDag,
}

/// Generates the configured suite, screening against `dataset`.
pub fn generate_suite(cfg: &ExperimentConfig, dataset: &BenchmarkDataset) -> Result<(SuiteManifest, Vec<SuiteDag>)> {
    let specs: Vec<SuiteSpec> = daggen::suite_specs(&cfg.sizes, cfg.instances_per_size, cfg.suite_seed)
        .into_iter()
        .filter(|s| cfg.max_vertices.map_or(true, |m| s.n_vertices <= m))
        .collect();
    let built: Vec<_> = specs
        .par_iter()
        .map(|s| daggen::generate_member(s, dataset, daggen::DEFAULT_MAX_ATTEMPTS))
        .collect::<Result<_, _>>()?;
    let mut entries = Vec::new();
    let mut dags = Vec::new();
    for (dag, entry) in built {
        dags.push(SuiteDag {
            id: entry.spec.id.clone(),
            dag,
        });
        entries.push(entry);
    }
    let manifest = SuiteManifest {
        master_seed: cfg.suite_seed,
        dataset: dataset.name.clone(),
        entries,
    };
    Ok((manifest, dags))
}

/// Writes the manifest and one DAG file per member into `dir`.
pub fn write_suite(dir: &Path, manifest: &SuiteManifest, dags: &[SuiteDag]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (entry, d) in manifest.entries.iter().zip(dags) {
        let text = serde_json::to_string_pretty(&d.dag.to_file())?;
        std::fs::write(dir.join(&entry.file), text)?;
    }
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

pub fn load_suite(manifest_path: &Path, dataset: &BenchmarkDataset) -> Result<Vec<SuiteDag>> {
    let text = std::fs::read_to_string(manifest_path)
        .with_context(|| format!("reading {}", manifest_path.display()))?;
    let manifest: SuiteManifest = serde_json::from_str(&text)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    manifest
        .entries
        .iter()
        .map(|e| {
            let path = dir.join(&e.file);
            let file: DagFile = serde_json::from_str(
                &std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?,
            )?;
            let dag = QueryDag::from_file(&file, |id| dataset.variant(id).cloned())
                .with_context(|| format!("loading {}", path.display()))?;
            Ok(SuiteDag {
                id: e.spec.id.clone(),
                dag,
            })
        })
        .collect()
}

/// One solver run. Wall time is the only field that varies between
/// identical runs.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub dag: String,
    pub vertices: usize,
    pub edges: usize,
    pub sources: usize,
    pub unpinned: usize,
    pub resources: usize,
    pub rate: f64,
    pub setup: Setup,
    pub network: String,
    pub solver: SolverKind,
    /// `ok`, `infeasible`, `budget_exceeded` or `error`.
    pub status: String,
    pub valid: bool,
    pub makespan_ms: Option<f64>,
    pub throughput_violations: Option<usize>,
    pub energy_violations: Option<usize>,
    pub edge_used_pct: Option<f64>,
    pub generations: Option<u64>,
    pub evaluations: Option<u64>,
    pub headroom_pct: Option<f64>,
    /// Expected work for the complexity check: evaluated placements times
    /// (|V| + |E|).
    pub work: Option<f64>,
    pub wall_secs: f64,
    #[serde(skip)]
    pub solution: Option<Solution>,
    #[serde(skip)]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn cell_key(&self) -> (String, u64, Setup, String) {
        (self.dag.clone(), self.rate.to_bits(), self.setup, self.network.clone())
    }
}

struct Cell<'a> {
    dag: &'a SuiteDag,
    rate: f64,
    setup: Setup,
    network: &'a BenchmarkDataset,
}

fn cell_seed(master: u64, dag: &str, network: &str, rate: f64, setup: Setup, what: &str) -> u64 {
    derive_seed(master, &format!("{dag}|{network}|{rate}|{setup}|{what}"))
}

fn run_cell(cell: &Cell<'_>, cfg: &ExperimentConfig) -> Vec<RunRecord> {
    let dag = &cell.dag.dag;
    let net = cell.network.name.as_str();
    // Scenario depends on the DAG and network only, so all rates and setups
    // of one DAG see the same sampled parameters.
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("{}|{net}|scenario", cell.dag.id)));
    let pool = ResourcePool::build(cell.setup, dag.len(), cfg.energy);
    let base = |solver: SolverKind| RunRecord {
        dag: cell.dag.id.clone(),
        vertices: dag.len(),
        edges: dag.edges().len(),
        sources: dag.sources().len(),
        unpinned: dag.unpinned().len(),
        resources: pool.len(),
        rate: cell.rate,
        setup: cell.setup,
        network: net.to_string(),
        solver,
        status: "ok".into(),
        valid: false,
        makespan_ms: None,
        throughput_violations: None,
        energy_violations: None,
        edge_used_pct: None,
        generations: None,
        evaluations: None,
        headroom_pct: None,
        work: None,
        wall_secs: 0.0,
        solution: None,
        error: None,
    };
    let scenario = match RuntimeScenario::materialize(dag, cell.network, cell.rate, &mut rng) {
        Ok(s) => s,
        Err(e) => {
            return cfg
                .solvers
                .iter()
                .map(|&k| RunRecord {
                    status: "error".into(),
                    error: Some(e.to_string()),
                    ..base(k)
                })
                .collect()
        }
    };
    let problem = match Problem::new(dag, &scenario, &pool, cell.network.overhead) {
        Ok(p) => p.with_sink_compute(cfg.include_sink_compute),
        Err(e) => {
            return cfg
                .solvers
                .iter()
                .map(|&k| RunRecord {
                    status: "error".into(),
                    error: Some(e.to_string()),
                    ..base(k)
                })
                .collect()
        }
    };
    let size = (dag.len() + dag.edges().len()) as f64;
    let seed_for = |what: &str| cell_seed(cfg.seed, &cell.dag.id, net, cell.rate, cell.setup, what);

    let mut out = Vec::new();
    for &solver in &cfg.solvers {
        if solver == SolverKind::Bf && problem.unpinned().len() > cfg.bf_max_unpinned {
            continue;
        }
        let mut rec = base(solver);
        let started = Instant::now();
        let result: Result<Option<Solution>, String> = match solver {
            SolverKind::Bf => {
                let opts = BfOptions {
                    prune: cfg.bf_prune,
                    budget: Some(Duration::from_secs_f64(cfg.bf_budget_secs)),
                };
                match solve_bf(&problem, opts) {
                    Ok(o) => {
                        rec.evaluations = Some(o.evaluations);
                        Ok(Some(o.best))
                    }
                    Err(BfError::Infeasible { evaluations }) => {
                        rec.evaluations = Some(evaluations);
                        rec.status = "infeasible".into();
                        Ok(None)
                    }
                    Err(BfError::BudgetExceeded { evaluations, .. }) => {
                        rec.evaluations = Some(evaluations);
                        rec.status = "budget_exceeded".into();
                        Ok(None)
                    }
                    Err(e) => Err(e.to_string()),
                }
            }
            SolverKind::Ga => {
                let ga = GaConfig {
                    seed: seed_for("ga"),
                    ..cfg.ga.clone()
                };
                match solve_ga(&problem, &ga) {
                    Ok(o) => {
                        rec.generations = Some(o.generations);
                        rec.evaluations = Some(o.evaluations);
                        rec.work = Some(o.generations as f64 * ga.population as f64 * size);
                        Ok(Some(o.best))
                    }
                    Err(e) => Err(e.to_string()),
                }
            }
            SolverKind::Random => {
                rec.evaluations = Some(cfg.random_trials as u64);
                match solve_random(&problem, cfg.random_trials, seed_for("random")) {
                    Ok(s) => Ok(Some(s)),
                    Err(BaselineError::Infeasible { .. }) => {
                        rec.status = "infeasible".into();
                        Ok(None)
                    }
                    Err(e) => Err(e.to_string()),
                }
            }
            SolverKind::CloudOnly => solve_cloud_only(&problem).map(Some).map_err(|e| e.to_string()),
        };
        rec.wall_secs = started.elapsed().as_secs_f64();
        if solver != SolverKind::Ga {
            rec.work = rec.evaluations.map(|e| e as f64 * size);
        }
        match result {
            Ok(Some(sol)) => {
                let ev = &sol.evaluation;
                rec.valid = ev.valid;
                rec.makespan_ms = Some(ev.makespan_ms());
                rec.throughput_violations =
                    Some(ev.violations.iter().filter(|v| v.kind == crate::placement::ViolationKind::Throughput).count());
                rec.energy_violations =
                    Some(ev.violations.iter().filter(|v| v.kind == crate::placement::ViolationKind::Energy).count());
                rec.edge_used_pct = Some(problem.edge_used_pct(&sol.placement));
                if cfg.headroom && solver == SolverKind::Ga && ev.valid {
                    rec.headroom_pct = problem.rate_headroom(&sol.placement).ok();
                }
                rec.solution = Some(sol);
            }
            Ok(None) => {}
            Err(e) => {
                rec.status = "error".into();
                rec.error = Some(e);
            }
        }
        out.push(rec);
    }
    out
}

/// Table-4 style comparison for one group of runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub rate: f64,
    pub setup: Setup,
    /// Mean latency deviation of GA from BF (%), over cells where both are
    /// valid and BF completed.
    pub e_bf_ga: Option<f64>,
    pub e_bf_rnd: Option<f64>,
    pub e_ga_rnd: Option<f64>,
    pub e_ga_co: Option<f64>,
    pub invalid_bf_pct: Option<f64>,
    pub invalid_ga_pct: Option<f64>,
    pub invalid_rnd_pct: Option<f64>,
    pub invalid_co_pct: Option<f64>,
    pub edge_used_bf_pct: Option<f64>,
    pub edge_used_ga_pct: Option<f64>,
    pub bf_ga_pairs: usize,
    pub cells: usize,
}

/// Pairs runs of two solvers by cell and returns the latency deviation of
/// `worse` from `better` over cells where both are valid.
pub fn deviation<'a>(runs: impl IntoIterator<Item = &'a RunRecord>, better: SolverKind, worse: SolverKind) -> (Option<f64>, usize) {
    let mut by_cell: BTreeMap<_, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for r in runs {
        if !(r.valid && r.status == "ok") {
            continue;
        }
        let slot = by_cell.entry(r.cell_key()).or_default();
        if r.solver == better {
            slot.0 = r.makespan_ms;
        } else if r.solver == worse {
            slot.1 = r.makespan_ms;
        }
    }
    let (b, w): (Vec<f64>, Vec<f64>) = by_cell
        .into_values()
        .filter_map(|(b, w)| Some((b?, w?)))
        .unzip();
    let n = b.len();
    (latency_deviation(&b, &w).ok(), n)
}

fn solver_invalid_pct<'a>(runs: impl IntoIterator<Item = &'a RunRecord>, solver: SolverKind) -> Option<f64> {
    let valid: Vec<bool> = runs
        .into_iter()
        .filter(|r| r.solver == solver && r.status != "budget_exceeded" && r.status != "error")
        .map(|r| r.valid)
        .collect();
    (!valid.is_empty()).then(|| invalid_pct(&valid))
}

fn mean_edge_used<'a>(runs: impl IntoIterator<Item = &'a RunRecord>, solver: SolverKind) -> Option<f64> {
    let v: Vec<f64> = runs
        .into_iter()
        .filter(|r| r.solver == solver && r.valid)
        .filter_map(|r| r.edge_used_pct)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn summary_row(runs: &[&RunRecord], rate: f64, setup: Setup) -> SummaryRow {
    let it = || runs.iter().copied();
    let (e_bf_ga, bf_ga_pairs) = deviation(it(), SolverKind::Bf, SolverKind::Ga);
    let cells: std::collections::BTreeSet<_> = it().map(|r| r.cell_key()).collect();
    SummaryRow {
        rate,
        setup,
        e_bf_ga,
        e_bf_rnd: deviation(it(), SolverKind::Bf, SolverKind::Random).0,
        e_ga_rnd: deviation(it(), SolverKind::Ga, SolverKind::Random).0,
        e_ga_co: deviation(it(), SolverKind::Ga, SolverKind::CloudOnly).0,
        invalid_bf_pct: solver_invalid_pct(it(), SolverKind::Bf),
        invalid_ga_pct: solver_invalid_pct(it(), SolverKind::Ga),
        invalid_rnd_pct: solver_invalid_pct(it(), SolverKind::Random),
        invalid_co_pct: solver_invalid_pct(it(), SolverKind::CloudOnly),
        edge_used_bf_pct: mean_edge_used(it(), SolverKind::Bf),
        edge_used_ga_pct: mean_edge_used(it(), SolverKind::Ga),
        bf_ga_pairs,
        cells: cells.len(),
    }
}

/// One summary row per (rate, setup).
pub fn summarize(runs: &[RunRecord], rates: &[f64], setups: &[Setup]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &rate in rates {
        for &setup in setups {
            let group: Vec<&RunRecord> = runs.iter().filter(|r| r.rate == rate && r.setup == setup).collect();
            rows.push(summary_row(&group, rate, setup));
        }
    }
    rows
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentReport {
    pub fn errors(&self) -> usize {
        self.runs.iter().filter(|r| r.status == "error").count()
    }
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{WORKERS_ENV}={v} is not a count"))?;
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

/// Runs the full cross product over `suite`. Results come back ordered by
/// DAG, network, rate and setup, whatever order workers finish in.
pub fn run_on_suite(cfg: &ExperimentConfig, suite: &[SuiteDag], datasets: &[BenchmarkDataset]) -> Result<ExperimentReport> {
    cfg.check()?;
    let mut cells = Vec::new();
    for d in suite {
        for network in datasets {
            for &rate in &cfg.rates {
                for &setup in &cfg.setups {
                    cells.push(Cell {
                        dag: d,
                        rate,
                        setup,
                        network,
                    });
                }
            }
        }
    }
    let pool = worker_pool()?;
    let nested: Vec<Vec<RunRecord>> = pool.install(|| cells.par_iter().map(|c| run_cell(c, cfg)).collect());
    let runs: Vec<RunRecord> = nested.into_iter().flatten().collect();
    let summary = summarize(&runs, &cfg.rates, &cfg.setups);
    Ok(ExperimentReport { runs, summary })
}

pub fn load_datasets(cfg: &ExperimentConfig) -> Result<Vec<BenchmarkDataset>> {
    cfg.datasets
        .iter()
        .map(|d| BenchmarkDataset::open(d).with_context(|| format!("loading dataset `{d}`")))
        .collect()
}

/// Loads or generates the suite, then runs the study. Writes `runs.csv`,
/// `summary.csv`, `suite/` and `placements/` under `out_dir` when given.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentReport> {
    let datasets = load_datasets(cfg)?;
    let suite = match &cfg.suite_manifest {
        Some(path) => load_suite(path, &datasets[0])?
            .into_iter()
            .filter(|d| cfg.max_vertices.map_or(true, |m| d.dag.len() <= m))
            .collect(),
        None => {
            let (manifest, dags) = generate_suite(cfg, &datasets[0])?;
            if let Some(dir) = out_dir {
                write_suite(&dir.join("suite"), &manifest, &dags)?;
            }
            dags
        }
    };
    let report = run_on_suite(cfg, &suite, &datasets)?;
    if let Some(dir) = out_dir {
        write_outputs(dir, &report, &suite, cfg)?;
    }
    Ok(report)
}

pub fn write_runs_csv<W: std::io::Write>(w: W, runs: &[RunRecord]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    for r in runs {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: std::io::Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}

fn write_outputs(dir: &Path, report: &ExperimentReport, suite: &[SuiteDag], cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(dir.join("placements"))?;
    write_runs_csv(std::fs::File::create(dir.join("runs.csv"))?, &report.runs)?;
    write_summary_csv(std::fs::File::create(dir.join("summary.csv"))?, &report.summary)?;
    let dags: BTreeMap<&str, &QueryDag> = suite.iter().map(|d| (d.id.as_str(), &d.dag)).collect();
    for r in &report.runs {
        let Some(sol) = &r.solution else { continue };
        let pool = ResourcePool::build(r.setup, r.vertices, cfg.energy);
        let body = serde_json::json!({
            "dag": r.dag,
            "rate": r.rate,
            "setup": r.setup,
            "network": r.network,
            "solver": r.solver,
            "evaluation": sol.evaluation.report(dags[r.dag.as_str()], &sol.placement, &pool),
        });
        let name = format!("{}_{}_{}_{}_{}.json", r.dag, r.rate, r.setup, r.network, r.solver.as_str());
        std::fs::write(dir.join("placements").join(name), serde_json::to_string_pretty(&body)?)?;
    }
    Ok(())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComplexityError {
    #[error("need at least two runs with distinct positive work and time, got {0}")]
    InsufficientData(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares fit of `log(time)` against `log(work)`.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<Regression, ComplexityError> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(w, t)| *w > 0.0 && *t > 0.0)
        .map(|(w, t)| (w.ln(), t.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return Err(ComplexityError::InsufficientData(n));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(ComplexityError::InsufficientData(n));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(Regression {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: n,
    })
}

/// Regresses wall time on expected work for one solver's completed runs.
pub fn verify_complexity(runs: &[RunRecord], solver: SolverKind) -> Result<Regression, ComplexityError> {
    let pts: Vec<(f64, f64)> = runs
        .iter()
        .filter(|r| r.solver == solver && r.status != "error" && r.status != "budget_exceeded")
        .filter_map(|r| Some((r.work?, r.wall_secs)))
        .collect();
    fit_loglog(&pts)
}

/// Reads back the columns of `runs.csv` needed by [`verify_complexity`].
pub fn read_runs_csv(path: &Path) -> Result<Vec<RunRecord>> {
    #[derive(Deserialize)]
    struct Row {
        dag: String,
        vertices: usize,
        edges: usize,
        sources: usize,
        unpinned: usize,
        resources: usize,
        rate: f64,
        setup: Setup,
        network: String,
        solver: SolverKind,
        status: String,
        valid: bool,
        makespan_ms: Option<f64>,
        throughput_violations: Option<usize>,
        energy_violations: Option<usize>,
        edge_used_pct: Option<f64>,
        generations: Option<u64>,
        evaluations: Option<u64>,
        headroom_pct: Option<f64>,
        work: Option<f64>,
        wall_secs: f64,
    }
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let r: Row = row?;
        out.push(RunRecord {
            dag: r.dag,
            vertices: r.vertices,
            edges: r.edges,
            sources: r.sources,
            unpinned: r.unpinned,
            resources: r.resources,
            rate: r.rate,
            setup: r.setup,
            network: r.network,
            solver: r.solver,
            status: r.status,
            valid: r.valid,
            makespan_ms: r.makespan_ms,
            throughput_violations: r.throughput_violations,
            energy_violations: r.energy_violations,
            edge_used_pct: r.edge_used_pct,
            generations: r.generations,
            evaluations: r.evaluations,
            headroom_pct: r.headroom_pct,
            work: r.work,
            wall_secs: r.wall_secs,
            solution: None,
            error: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            sizes: vec![4, 6],
            instances_per_size: 1,
            ga: GaConfig {
                min_generations: 100,
                ..GaConfig::default()
            },
            random_trials: 200,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn solver_names_parse() {
        for k in SolverKind::ALL {
            assert_eq!(k.as_str().parse::<SolverKind>().unwrap(), k);
        }
        assert_eq!("cloud-only".parse::<SolverKind>().unwrap(), SolverKind::CloudOnly);
        assert!("greedy".parse::<SolverKind>().is_err());
    }

    #[test]
    fn row_count_matches_cross_product() {
        let cfg = tiny_config();
        let report = run_experiment(&cfg, None).unwrap();
        // 2 DAGs x 2 rates x 3 setups x 2 networks x 4 solvers.
        assert_eq!(report.runs.len(), 2 * 2 * 3 * 2 * 4);
        assert_eq!(report.summary.len(), 6);
        assert_eq!(report.errors(), 0);
    }

    #[test]
    fn bf_cap_drops_rows() {
        let cfg = ExperimentConfig {
            bf_max_unpinned: 0,
            ..tiny_config()
        };
        let report = run_experiment(&cfg, None).unwrap();
        assert_eq!(report.runs.len(), 2 * 2 * 3 * 2 * 3);
        assert!(report.summary.iter().all(|r| r.e_bf_ga.is_none()));
    }

    #[test]
    fn outputs_are_reproducible() {
        let cfg = tiny_config();
        let strip = |runs: &[RunRecord]| {
            let mut v: Vec<RunRecord> = runs.to_vec();
            for r in v.iter_mut() {
                r.wall_secs = 0.0;
            }
            let mut buf = Vec::new();
            write_runs_csv(&mut buf, &v).unwrap();
            buf
        };
        let a = run_experiment(&cfg, None).unwrap();
        let b = run_experiment(&cfg, None).unwrap();
        assert_eq!(strip(&a.runs), strip(&b.runs));
    }

    #[test]
    fn writes_files_and_reloads_suite() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            solvers: vec![SolverKind::CloudOnly],
            ..tiny_config()
        };
        let report = run_experiment(&cfg, Some(dir.path())).unwrap();
        assert!(dir.path().join("summary.csv").exists());
        let runs = read_runs_csv(&dir.path().join("runs.csv")).unwrap();
        assert_eq!(runs.len(), report.runs.len());
        let reloaded = ExperimentConfig {
            suite_manifest: Some(dir.path().join("suite/manifest.json")),
            ..cfg
        };
        let again = run_experiment(&reloaded, None).unwrap();
        let ms = |r: &ExperimentReport| r.runs.iter().map(|x| x.makespan_ms).collect::<Vec<_>>();
        assert_eq!(ms(&again), ms(&report));
    }

    #[test]
    fn loglog_fit() {
        let pts: Vec<(f64, f64)> = (1..6).map(|i| (10f64.powi(i), 3e-7 * 10f64.powi(i))).collect();
        let fit = fit_loglog(&pts).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
        assert_eq!(fit_loglog(&pts[..1]), Err(ComplexityError::InsufficientData(1)));
    }

    #[test]
    fn config_parses_partial_json() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"rates": [100], "solvers": ["ga", "cloud_only"]}"#).unwrap();
        assert_eq!(cfg.rates, vec![100.0]);
        assert_eq!(cfg.solvers, vec![SolverKind::Ga, SolverKind::CloudOnly]);
        assert_eq!(cfg.setups.len(), 3);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
