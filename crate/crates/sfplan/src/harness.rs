//! Learning and planning experiments over seeds, tasks and methods.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sfplan_core::baselines::{lof_exact_options, FlatQLearner, LofLearner, LofPolicy, OptionSet};
use sfplan_core::ccs::{sfols, Ccs, ExactSolver, SamplingSolver, SfolsConfig};
use sfplan_core::fsa::{build_product, validate, Fsa};
use sfplan_core::grid::PropositionMap;
use sfplan_core::planner::{evaluate_product_policy, extract_policy, sf_fsa_vi, GpiProductPolicy, PlanConfig, ProductPolicy};
use sfplan_core::sf::{LearnConfig, PolicyHandle};
use sfplan_core::EnvModel;

use crate::config::{BasisMode, ExperimentConfig, Method};
use crate::error::{AppError, AppResult};
use crate::io::{resolve_env, resolve_task, write_text};

/// Version of the record layout below.
pub const SCHEMA: u32 = 1;

/// One point of a curve. `x` is environment steps (learning) or planning
/// iterations (planning); `metric` is the mean evaluated return; `ops` is
/// the cumulative planner inner-evaluation count behind the point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: u32,
    pub domain: String,
    pub phase: String,
    pub method: String,
    pub task: String,
    pub seed: u64,
    pub x: u64,
    pub metric: f64,
    pub ops: u64,
}

/// Mean and population standard deviation over tasks and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub schema: u32,
    pub domain: String,
    pub phase: String,
    pub method: String,
    pub x: u64,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Everything an experiment produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    /// Human-readable notes such as CCS sizes.
    pub log: Vec<String>,
    /// `(method, seed, seconds)`.
    pub timing: Vec<(String, u64, f64)>,
}

/// Resolved inputs shared by all seeds.
struct Setup {
    domain: String,
    env: EnvModel,
    props: PropositionMap,
    tasks: Vec<(String, Fsa)>,
}

fn domain_name(spec: &str) -> String {
    Path::new(spec).file_stem().map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned())
}

fn setup(cfg: &ExperimentConfig) -> AppResult<Setup> {
    cfg.check()?;
    let (_, env, props) = resolve_env(&cfg.env)?;
    let domain = domain_name(&cfg.env);
    let mut tasks = Vec::new();
    for t in &cfg.tasks {
        let fsa = resolve_task(&domain, t)?;
        if let Some(d) = validate(&fsa, &props).into_iter().find(|d| d.is_error()) {
            return Err(AppError::Config(format!("task `{t}`: {d}")));
        }
        tasks.push((domain_name(t), fsa));
    }
    Ok(Setup { domain, env, props, tasks })
}

/// SplitMix64 over the parts, for independent per-purpose streams.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

fn rng(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}

const STREAM_CCS: u64 = 1;
const STREAM_OPTIONS: u64 = 2;
const STREAM_FLAT: u64 = 3;
const STREAM_EVAL: u64 = 4;

fn evaluate<P: ProductPolicy + ?Sized>(mu: &mut P, s: &Setup, fsa: &Fsa, cfg: &ExperimentConfig, seed_parts: &[u64]) -> AppResult<f64> {
    let mut r = rng(seed_parts);
    Ok(evaluate_product_policy(mu, fsa, &s.props, &s.env, cfg.episodes, cfg.horizon, &mut r)?.mean)
}

fn learn_config(cfg: &ExperimentConfig) -> LearnConfig {
    LearnConfig {
        max_episode_len: cfg.horizon,
        ..LearnConfig::default()
    }
}

fn sfols_config(cfg: &ExperimentConfig) -> SfolsConfig {
    SfolsConfig {
        min_priority: cfg.min_priority,
        max_iterations: cfg.max_iterations,
    }
}

fn learned_ccs(s: &Setup, cfg: &ExperimentConfig, seed: u64) -> AppResult<Ccs> {
    let mut solver = SamplingSolver::new(&s.env, cfg.budget, learn_config(cfg), rng(&[seed, STREAM_CCS]));
    Ok(sfols(&s.env, &mut solver, &sfols_config(cfg))?)
}

fn total_steps(s: &Setup, cfg: &ExperimentConfig) -> usize {
    cfg.steps.unwrap_or(cfg.budget * s.env.dim())
}

/// Curve points `cadence, 2·cadence, …`, ending exactly at `total`.
fn checkpoints(total: usize, cadence: usize) -> Vec<usize> {
    let mut xs: Vec<usize> = (1..=total / cadence).map(|k| k * cadence).collect();
    if total % cadence != 0 || xs.is_empty() {
        xs.push(total);
    }
    xs
}

struct Point {
    task: String,
    x: u64,
    metric: f64,
    ops: u64,
}

fn sf_learning_curve(s: &Setup, cfg: &ExperimentConfig, seed: u64, log: &mut Vec<String>) -> AppResult<Vec<Point>> {
    let ccs = learned_ccs(s, cfg, seed)?;
    log.push(format!("seed {seed}: |CCS| = {} after {} solver calls", ccs.len(), ccs.log.len()));
    let total = ccs.log.len() * cfg.budget;
    let mut out = Vec::new();
    let mut cache: BTreeMap<(usize, usize), (Vec<PolicyHandle>, Option<sfplan_core::planner::PlanResult>)> = BTreeMap::new();
    for (ti, (name, fsa)) in s.tasks.iter().enumerate() {
        for x in checkpoints(total, cfg.cadence) {
            // Solver call k's policy is available once its budget is spent.
            let calls = x / cfg.budget;
            let entry = match cache.entry((ti, calls)) {
                std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::btree_map::Entry::Vacant(e) => {
                    let policies = ccs.prefix(calls);
                    let plan = if policies.is_empty() {
                        None
                    } else {
                        Some(sf_fsa_vi(&policies, fsa, &s.props, &s.env, &PlanConfig::default())?)
                    };
                    e.insert((policies, plan))
                }
            };
            let (metric, ops) = match &entry.1 {
                None => (-(cfg.horizon as f64), 0),
                Some(plan) => {
                    let mut mu = extract_policy(plan, &entry.0);
                    (evaluate(&mut mu, s, fsa, cfg, &[seed, STREAM_EVAL, ti as u64, x as u64])?, plan.op_count)
                }
            };
            out.push(Point { task: name.clone(), x: x as u64, metric, ops });
        }
    }
    Ok(out)
}

fn lof_learning_curve(s: &Setup, cfg: &ExperimentConfig, seed: u64) -> AppResult<Vec<Point>> {
    let total = total_steps(s, cfg);
    let mut learner = LofLearner::new(&s.env, &s.props, total, learn_config(cfg));
    let mut r = rng(&[seed, STREAM_OPTIONS]);
    let mut out = Vec::new();
    let mut done = 0;
    for x in checkpoints(total, cfg.cadence) {
        learner.train(x - done, &mut r)?;
        done = x;
        let options = learner.options()?;
        for (ti, (name, fsa)) in s.tasks.iter().enumerate() {
            let plan = sfplan_core::baselines::lof_plan(&options, fsa, &s.props, &s.env, &PlanConfig::default())?;
            let mut mu = LofPolicy::new(&options, &plan, &s.env);
            let metric = evaluate(&mut mu, s, fsa, cfg, &[seed, STREAM_EVAL, ti as u64, x as u64])?;
            out.push(Point { task: name.clone(), x: x as u64, metric, ops: plan.op_count });
        }
    }
    Ok(out)
}

fn flat_learning_curve(s: &Setup, cfg: &ExperimentConfig, seed: u64) -> AppResult<Vec<Point>> {
    let total = total_steps(s, cfg);
    let mut out = Vec::new();
    for (ti, (name, fsa)) in s.tasks.iter().enumerate() {
        let product = build_product(fsa, &s.env, &s.props)?;
        let mut learner = FlatQLearner::new(&product, fsa, &s.env, total, learn_config(cfg));
        let mut r = rng(&[seed, STREAM_FLAT, ti as u64]);
        let mut done = 0;
        for x in checkpoints(total, cfg.cadence) {
            learner.train(x - done, &mut r)?;
            done = x;
            let mut mu = learner.policy();
            let metric = evaluate(&mut mu, s, fsa, cfg, &[seed, STREAM_EVAL, ti as u64, x as u64])?;
            out.push(Point { task: name.clone(), x: x as u64, metric, ops: 0 });
        }
    }
    Ok(out)
}

fn basis(s: &Setup, cfg: &ExperimentConfig, seed: u64) -> AppResult<Ccs> {
    match cfg.basis {
        BasisMode::Exact => Ok(sfols(&s.env, &mut ExactSolver::new(&s.env), &sfols_config(cfg))?),
        BasisMode::Learned => learned_ccs(s, cfg, seed),
    }
}

fn options(s: &Setup, cfg: &ExperimentConfig, seed: u64) -> AppResult<OptionSet> {
    match cfg.basis {
        BasisMode::Exact => Ok(lof_exact_options(&s.env, &s.props)?),
        BasisMode::Learned => {
            let total = total_steps(s, cfg);
            let mut learner = LofLearner::new(&s.env, &s.props, total, learn_config(cfg));
            learner.train(total, &mut rng(&[seed, STREAM_OPTIONS]))?;
            Ok(learner.options()?)
        }
    }
}

fn history_config() -> PlanConfig {
    PlanConfig {
        keep_history: true,
        ..PlanConfig::default()
    }
}

fn sf_planning_curve(s: &Setup, cfg: &ExperimentConfig, seed: u64, log: &mut Vec<String>) -> AppResult<Vec<Point>> {
    let ccs = basis(s, cfg, seed)?;
    log.push(format!("seed {seed}: |CCS| = {} after {} solver calls", ccs.len(), ccs.log.len()));
    let mut out = Vec::new();
    for (ti, (name, fsa)) in s.tasks.iter().enumerate() {
        let plan = sf_fsa_vi(&ccs.policies, fsa, &s.props, &s.env, &history_config())?;
        let mut ops = 0;
        for (k, weights) in plan.history.iter().enumerate() {
            ops += plan.op_counts[k];
            let mut mu = GpiProductPolicy { policies: &ccs.policies, weights: weights.clone() };
            let metric = evaluate(&mut mu, s, fsa, cfg, &[seed, STREAM_EVAL, ti as u64, k as u64])?;
            out.push(Point { task: name.clone(), x: k as u64 + 1, metric, ops });
        }
    }
    Ok(out)
}

fn lof_planning_curve(s: &Setup, cfg: &ExperimentConfig, seed: u64) -> AppResult<Vec<Point>> {
    let options = options(s, cfg, seed)?;
    let mut out = Vec::new();
    for (ti, (name, fsa)) in s.tasks.iter().enumerate() {
        let plan = sfplan_core::baselines::lof_plan(&options, fsa, &s.props, &s.env, &history_config())?;
        let mut ops = 0;
        for (k, meta) in plan.history.iter().enumerate() {
            ops += plan.op_counts[k];
            let mut mu = LofPolicy::from_meta(&options, meta.clone(), &s.env);
            let metric = evaluate(&mut mu, s, fsa, cfg, &[seed, STREAM_EVAL, ti as u64, k as u64])?;
            out.push(Point { task: name.clone(), x: k as u64 + 1, metric, ops });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Learning,
    Planning,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::Learning => "learning",
            Phase::Planning => "planning",
        }
    }
}

struct SeedOutput {
    records: Vec<RunRecord>,
    log: Vec<String>,
    timing: Vec<(String, u64, f64)>,
}

fn run_seed(s: &Setup, cfg: &ExperimentConfig, phase: Phase, seed: u64) -> AppResult<SeedOutput> {
    let mut out = SeedOutput { records: Vec::new(), log: Vec::new(), timing: Vec::new() };
    for &method in &cfg.methods {
        let start = Instant::now();
        let points = match (phase, method) {
            (Phase::Learning, Method::SfFsaVi) => sf_learning_curve(s, cfg, seed, &mut out.log)?,
            (Phase::Learning, Method::Lof) => lof_learning_curve(s, cfg, seed)?,
            (Phase::Learning, Method::Flat) => flat_learning_curve(s, cfg, seed)?,
            (Phase::Planning, Method::SfFsaVi) => sf_planning_curve(s, cfg, seed, &mut out.log)?,
            (Phase::Planning, Method::Lof) => lof_planning_curve(s, cfg, seed)?,
            (Phase::Planning, Method::Flat) => {
                return Err(AppError::Config("the planning experiment compares sf-fsa-vi and lof only".into()))
            }
        };
        out.timing.push((method.name().into(), seed, start.elapsed().as_secs_f64()));
        out.records.extend(points.into_iter().map(|p| RunRecord {
            schema: SCHEMA,
            domain: s.domain.clone(),
            phase: phase.name().into(),
            method: method.name().into(),
            task: p.task,
            seed,
            x: p.x,
            metric: p.metric,
            ops: p.ops,
        }));
    }
    Ok(out)
}

fn run(cfg: &ExperimentConfig, phase: Phase) -> AppResult<ExperimentOutput> {
    let s = setup(cfg)?;
    let per_seed: Vec<AppResult<SeedOutput>> = cfg.seeds.par_iter().map(|&seed| run_seed(&s, cfg, phase, seed)).collect();
    let mut records = Vec::new();
    let mut log = Vec::new();
    let mut timing = Vec::new();
    for r in per_seed {
        let r = r?;
        records.extend(r.records);
        log.extend(r.log);
        timing.extend(r.timing);
    }
    records.sort_by(|a, b| (&a.method, &a.task, a.seed, a.x).cmp(&(&b.method, &b.task, b.seed, b.x)));
    let summary = summarize(&records);
    Ok(ExperimentOutput { records, summary, log, timing })
}

/// Learning curves: every `cadence` steps, plan on what has been learned
/// so far and evaluate.
pub fn run_learning_experiment(cfg: &ExperimentConfig) -> AppResult<ExperimentOutput> {
    run(cfg, Phase::Learning)
}

/// Planning curves: evaluate the policy after every planning iteration.
pub fn run_planning_experiment(cfg: &ExperimentConfig) -> AppResult<ExperimentOutput> {
    run(cfg, Phase::Planning)
}

/// Mean and standard deviation per `(domain, phase, method, x)` over
/// tasks and seeds.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(&str, &str, &str, u64), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry((&r.domain, &r.phase, &r.method, r.x)).or_default().push(r.metric);
    }
    groups
        .into_iter()
        .map(|((domain, phase, method, x), v)| {
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let var = v.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n as f64;
            SummaryRow {
                schema: SCHEMA,
                domain: domain.into(),
                phase: phase.into(),
                method: method.into(),
                x,
                mean,
                std: var.sqrt(),
                n,
            }
        })
        .collect()
}

pub fn records_csv(records: &[RunRecord]) -> AppResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(["schema", "domain", "phase", "method", "task", "seed", "x", "metric", "ops"])?;
    }
    crate::io::finish(w)
}

pub fn summary_csv(rows: &[SummaryRow]) -> AppResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["schema", "domain", "phase", "method", "x", "mean", "std", "n"])?;
    }
    crate::io::finish(w)
}

/// Writes `runs.csv`, `summary.csv`, `experiment.log` and the wall-time
/// sidecar `timing.csv` under `dir`. Only the sidecar varies between
/// identical runs.
pub fn write_output(out: &ExperimentOutput, dir: &Path) -> AppResult<()> {
    write_text(&dir.join("runs.csv"), &records_csv(&out.records)?)?;
    write_text(&dir.join("summary.csv"), &summary_csv(&out.summary)?)?;
    write_text(&dir.join("experiment.log"), &(out.log.join("\n") + "\n"))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "seed", "seconds"])?;
    for (m, s, t) in &out.timing {
        w.serialize((m, s, t))?;
    }
    write_text(&dir.join("timing.csv"), &crate::io::finish(w)?)
}
