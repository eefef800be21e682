use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cep_place::dataflow::{DagFile, QueryDag};
use cep_place::experiment::{self, ExperimentConfig, SolverKind};
use cep_place::placement::Problem;
use cep_place::solver::baselines::{solve_cloud_only, solve_random, DEFAULT_TRIALS};
use cep_place::solver::bf::{solve_bf, BfError, BfOptions};
use cep_place::solver::ga::{solve_ga, GaConfig, Selection};
use cep_place::{BenchmarkDataset, EnergyConfig, ResourcePool, RuntimeScenario, Setup};

#[derive(Parser)]
#[command(name = "cep-place", version, about = "Place CEP query DAGs onto edge devices and cloud VMs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a screened random DAG suite and its manifest.
    GenerateSuite {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "campus-lan")]
        dataset: String,
        #[arg(long)]
        max_vertices: Option<usize>,
    },
    /// Place one DAG with one solver and print the evaluation as JSON.
    Solve(SolveArgs),
    /// Run a study described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Add the input-rate headroom of each valid GA placement.
        #[arg(long)]
        headroom: bool,
    },
    /// Fit wall time against expected work from a runs.csv.
    Complexity {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, default_value = "ga")]
        solver: SolverKind,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    dag: PathBuf,
    #[arg(long, default_value = "campus-lan")]
    dataset: String,
    #[arg(long, default_value = "liberal")]
    setup: Setup,
    /// DAG input rate (events/second).
    #[arg(long, default_value_t = 1000.0)]
    rate: f64,
    #[arg(long, default_value = "ga")]
    solver: SolverKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    crossover: Option<f64>,
    #[arg(long)]
    mutation: Option<f64>,
    #[arg(long)]
    min_generations: Option<u64>,
    #[arg(long)]
    max_generations: Option<u64>,
    #[arg(long)]
    selection: Option<Selection>,
    #[arg(long)]
    per_violation_penalty: bool,
    /// Wall-clock budget for brute force.
    #[arg(long)]
    budget_secs: Option<f64>,
    /// Disable brute-force pruning and enumerate every assignment.
    #[arg(long)]
    exhaustive: bool,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    /// Write the GA best-fitness trace as CSV, one row per generation.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    headroom: bool,
    #[arg(long)]
    include_sink_compute: bool,
}

fn solve(a: SolveArgs) -> Result<()> {
    let dataset = BenchmarkDataset::open(&a.dataset)?;
    let file: DagFile = serde_json::from_str(
        &std::fs::read_to_string(&a.dag).with_context(|| format!("reading {}", a.dag.display()))?,
    )?;
    let dag = QueryDag::from_file(&file, |id| dataset.variant(id).cloned())?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let scenario = RuntimeScenario::materialize(&dag, &dataset, a.rate, &mut rng)?;
    let pool = ResourcePool::build(a.setup, dag.len(), EnergyConfig::default());
    let problem = Problem::new(&dag, &scenario, &pool, dataset.overhead)?.with_sink_compute(a.include_sink_compute);

    let mut stats = serde_json::Map::new();
    let solution = match a.solver {
        SolverKind::Ga => {
            let d = GaConfig::default();
            let cfg = GaConfig {
                population: a.population.unwrap_or(d.population),
                crossover_prob: a.crossover.unwrap_or(d.crossover_prob),
                mutation_prob: a.mutation.unwrap_or(d.mutation_prob),
                min_generations: a.min_generations.unwrap_or(d.min_generations),
                max_generations: a.max_generations.unwrap_or(d.max_generations),
                selection: a.selection.unwrap_or(d.selection),
                per_violation_penalty: a.per_violation_penalty,
                seed: a.seed,
                ..d
            };
            cfg.check().map_err(anyhow::Error::msg)?;
            let out = solve_ga(&problem, &cfg)?;
            stats.insert("generations".into(), out.generations.into());
            stats.insert("evaluations".into(), out.evaluations.into());
            stats.insert("wall_secs".into(), out.elapsed.as_secs_f64().into());
            if let Some(path) = &a.trace {
                let mut w = csv::Writer::from_path(path)?;
                w.write_record(["generation", "best_fitness"])?;
                for (g, f) in out.fitness_trace.iter().enumerate() {
                    w.write_record([g.to_string(), f.to_string()])?;
                }
                w.flush()?;
            }
            out.best
        }
        SolverKind::Bf => {
            let opts = BfOptions {
                prune: !a.exhaustive,
                budget: a.budget_secs.map(Duration::from_secs_f64),
            };
            match solve_bf(&problem, opts) {
                Ok(out) => {
                    stats.insert("evaluations".into(), out.evaluations.into());
                    stats.insert("wall_secs".into(), out.elapsed.as_secs_f64().into());
                    out.best
                }
                Err(BfError::BudgetExceeded { best: Some(best), evaluations }) => {
                    eprintln!("budget exhausted after {evaluations} evaluations; reporting best so far");
                    *best
                }
                Err(e) => return Err(e.into()),
            }
        }
        SolverKind::Random => solve_random(&problem, a.trials, a.seed)?,
        SolverKind::CloudOnly => solve_cloud_only(&problem)?,
    };
    let mut report = solution.evaluation.report(&dag, &solution.placement, &pool);
    report["solver"] = a.solver.as_str().into();
    report["edge_used_pct"] = problem.edge_used_pct(&solution.placement).into();
    if a.headroom && solution.valid() {
        report["headroom_pct"] = problem.rate_headroom(&solution.placement)?.into();
    }
    report["stats"] = stats.into();
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::GenerateSuite {
            out,
            seed,
            dataset,
            max_vertices,
        } => {
            let ds = BenchmarkDataset::open(&dataset)?;
            let cfg = ExperimentConfig {
                suite_seed: seed,
                max_vertices,
                ..ExperimentConfig::default()
            };
            let (manifest, dags) = experiment::generate_suite(&cfg, &ds)?;
            experiment::write_suite(&out, &manifest, &dags)?;
            println!("wrote {} DAGs to {}", dags.len(), out.display());
        }
        Command::Solve(args) => solve(args)?,
        Command::Run { config, out, headroom } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.headroom |= headroom;
            let report = experiment::run_experiment(&cfg, Some(&out))?;
            experiment::write_summary_csv(std::io::stdout(), &report.summary)?;
            let errors = report.errors();
            if errors > 0 {
                for r in report.runs.iter().filter(|r| r.status == "error") {
                    eprintln!("{} {} {} {}: {}", r.dag, r.network, r.setup, r.solver.as_str(), r.error.as_deref().unwrap_or(""));
                }
                eprintln!("{errors} runs failed");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Complexity { runs, solver } => {
            let records = experiment::read_runs_csv(&runs)?;
            let fit = experiment::verify_complexity(&records, solver)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
