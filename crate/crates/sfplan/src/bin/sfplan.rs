use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sfplan::config::ExperimentConfig;
use sfplan::error::{AppError, AppResult};
use sfplan::harness::{run_learning_experiment, run_planning_experiment, write_output};
use sfplan::io::{ccs_from_json, ccs_to_json, read_text, resolve_env, resolve_task, residual_csv, sf_tables_csv, weight_table_csv, write_text};
use sfplan_core::baselines::{flat_q_learning, lof_exact_options, lof_plan, lof_train_options, LofPolicy};
use sfplan_core::ccs::{sfols, ExactSolver, SamplingSolver, SfolsConfig, DEFAULT_MAX_ITERATIONS, DEFAULT_MIN_PRIORITY};
use sfplan_core::fsa::{build_product, validate, Fsa};
use sfplan_core::grid::PropositionMap;
use sfplan_core::planner::{evaluate_product_policy, extract_policy, sf_fsa_vi, EvalStats, PlanConfig, DEFAULT_HORIZON};
use sfplan_core::sf::LearnConfig;

#[derive(Parser)]
#[command(name = "sfplan", version, about = "Successor-feature policy bases and automaton-task planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Learned,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineMethod {
    Flat,
    Lof,
}

#[derive(Clone, Copy, ValueEnum)]
enum Phase {
    Learning,
    Planning,
}

#[derive(Subcommand)]
enum Command {
    /// Build a policy basis and write it as JSON.
    TrainCcs {
        /// Bundled domain (office, delivery, double_slit) or layout file.
        #[arg(long)]
        env: String,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Environment steps per learned policy.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        #[arg(long, default_value_t = DEFAULT_MIN_PRIORITY)]
        min_priority: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
        max_iterations: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also dump every SF table as CSV.
        #[arg(long)]
        sf_csv: Option<PathBuf>,
    },
    /// Plan a task over a saved basis; writes the weight table as CSV.
    Plan {
        #[arg(long)]
        env: String,
        /// Bundled task name (sequential, disjunction, composite) or file.
        #[arg(long)]
        task: String,
        #[arg(long)]
        ccs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Residual log; defaults to `<out>.residuals.csv`.
        #[arg(long)]
        residuals: Option<PathBuf>,
    },
    /// Plan and roll out a task over a saved basis.
    Evaluate {
        #[arg(long)]
        env: String,
        #[arg(long)]
        task: String,
        #[arg(long)]
        ccs: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: usize,
    },
    /// Train and evaluate a comparison method.
    Baseline {
        #[arg(long, value_enum)]
        method: BaselineMethod,
        #[arg(long)]
        env: String,
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Training steps; 0 solves the options exactly (lof only).
        #[arg(long, default_value_t = 100_000)]
        budget: usize,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: usize,
    },
    /// Run a configured experiment and write CSVs to the output directory.
    Experiment {
        #[arg(value_enum)]
        phase: Phase,
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render summary CSVs to an SVG figure.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn task_for(env_spec: &str, task: &str, props: &PropositionMap) -> AppResult<Fsa> {
    let domain = Path::new(env_spec).file_stem().map_or(env_spec.to_string(), |s| s.to_string_lossy().into_owned());
    let fsa = resolve_task(&domain, task)?;
    let diags = validate(&fsa, props);
    for d in &diags {
        eprintln!("warning: {d}");
    }
    if let Some(d) = diags.iter().find(|d| d.is_error()) {
        return Err(AppError::Config(format!("task `{task}`: {d}")));
    }
    Ok(fsa)
}

fn report(label: &str, stats: &EvalStats) {
    println!("{label}: mean {:.3} std {:.3} failures {}/{}", stats.mean, stats.std, stats.failures, stats.returns.len());
}

fn run(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::TrainCcs { env, mode, seed, budget, min_priority, max_iterations, out, sf_csv } => {
            let (_, env, _) = resolve_env(&env)?;
            let cfg = SfolsConfig { min_priority, max_iterations };
            let ccs = match mode {
                Mode::Exact => sfols(&env, &mut ExactSolver::new(&env), &cfg)?,
                Mode::Learned => {
                    if budget == 0 {
                        return Err(AppError::Config("budget must be positive".into()));
                    }
                    let mut solver = SamplingSolver::new(&env, budget, LearnConfig::default(), ChaCha8Rng::seed_from_u64(seed));
                    sfols(&env, &mut solver, &cfg)?
                }
            };
            write_text(&out, &ccs_to_json(&ccs, &env)?)?;
            if let Some(path) = sf_csv {
                write_text(&path, &sf_tables_csv(&ccs.policies)?)?;
            }
            println!("|CCS| = {} after {} solver calls", ccs.len(), ccs.log.len());
        }
        Command::Plan { env: env_spec, task, ccs, out, residuals } => {
            let (_, env, props) = resolve_env(&env_spec)?;
            let fsa = task_for(&env_spec, &task, &props)?;
            let ccs = ccs_from_json(&read_text(&ccs)?, &env)?;
            let plan = sf_fsa_vi(&ccs.policies, &fsa, &props, &env, &PlanConfig::default())?;
            if !plan.converged {
                eprintln!("warning: planning stopped after {} iterations without converging", plan.iterations);
            }
            write_text(&out, &weight_table_csv(&plan, &fsa, &props)?)?;
            let log = residuals.unwrap_or_else(|| out.with_extension("residuals.csv"));
            write_text(&log, &residual_csv(&plan.residuals, &plan.op_counts)?)?;
            println!("{} iterations, {} operations", plan.iterations, plan.op_count);
        }
        Command::Evaluate { env: env_spec, task, ccs, seed, episodes, horizon } => {
            let (_, env, props) = resolve_env(&env_spec)?;
            let fsa = task_for(&env_spec, &task, &props)?;
            let ccs = ccs_from_json(&read_text(&ccs)?, &env)?;
            let plan = sf_fsa_vi(&ccs.policies, &fsa, &props, &env, &PlanConfig::default())?;
            let mut mu = extract_policy(&plan, &ccs.policies);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            report("sf-fsa-vi", &evaluate_product_policy(&mut mu, &fsa, &props, &env, episodes.max(1), horizon, &mut rng)?);
        }
        Command::Baseline { method, env: env_spec, task, seed, budget, episodes, horizon } => {
            let (_, env, props) = resolve_env(&env_spec)?;
            let fsa = task_for(&env_spec, &task, &props)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let config = LearnConfig::default();
            let stats = match method {
                BaselineMethod::Flat => {
                    if budget == 0 {
                        return Err(AppError::Config("flat Q-learning needs a positive budget".into()));
                    }
                    let product = build_product(&fsa, &env, &props)?;
                    let (_, mut policy) = flat_q_learning(&product, &fsa, &env, budget, &config, &mut rng)?;
                    evaluate_product_policy(&mut policy, &fsa, &props, &env, episodes.max(1), horizon, &mut rng)?
                }
                BaselineMethod::Lof => {
                    let options = if budget == 0 {
                        lof_exact_options(&env, &props)?
                    } else {
                        lof_train_options(&env, &props, budget, &config, &mut rng)?
                    };
                    let plan = lof_plan(&options, &fsa, &props, &env, &PlanConfig::default())?;
                    let mut mu = LofPolicy::new(&options, &plan, &env);
                    evaluate_product_policy(&mut mu, &fsa, &props, &env, episodes.max(1), horizon, &mut rng)?
                }
            };
            report(if matches!(method, BaselineMethod::Flat) { "flat" } else { "lof" }, &stats);
        }
        Command::Experiment { phase, config, out } => {
            let mut cfg = ExperimentConfig::parse(&read_text(&config)?)?;
            if let Some(dir) = out {
                cfg.out = dir;
            }
            let output = match phase {
                Phase::Learning => run_learning_experiment(&cfg)?,
                Phase::Planning => run_planning_experiment(&cfg)?,
            };
            write_output(&output, &cfg.out)?;
            for line in &output.log {
                println!("{line}");
            }
            println!("{} records written to {}", output.records.len(), cfg.out.display());
        }
        Command::Plot { inputs, out } => {
            let texts = inputs.iter().map(|p| read_text(p)).collect::<AppResult<Vec<_>>>()?;
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            write_text(&out, &sfplan::plot::render_plots(&refs)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
