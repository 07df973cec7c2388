//! `key = value` experiment configuration.

use std::path::PathBuf;

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    SfFsaVi,
    Lof,
    Flat,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::SfFsaVi => "sf-fsa-vi",
            Method::Lof => "lof",
            Method::Flat => "flat",
        }
    }

    pub fn parse(s: &str) -> AppResult<Self> {
        match s {
            "sf-fsa-vi" => Ok(Method::SfFsaVi),
            "lof" => Ok(Method::Lof),
            "flat" => Ok(Method::Flat),
            other => Err(AppError::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// How the planning experiment obtains its policy basis and options.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisMode {
    Exact,
    Learned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Bundled domain name or layout path.
    pub env: String,
    /// Bundled task names or automaton paths.
    pub tasks: Vec<String>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Environment steps per SF policy.
    pub budget: usize,
    /// Total steps for the option and flat learners; defaults to
    /// `budget · |E|`.
    pub steps: Option<usize>,
    pub episodes: usize,
    pub horizon: usize,
    /// Steps between re-planning points on learning curves.
    pub cadence: usize,
    pub out: PathBuf,
    pub min_priority: f64,
    pub max_iterations: usize,
    pub basis: BasisMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: "office".into(),
            tasks: vec!["sequential".into(), "disjunction".into(), "composite".into()],
            methods: vec![Method::SfFsaVi, Method::Lof],
            seeds: vec![0, 1, 2, 3, 4],
            budget: 10_000,
            steps: None,
            episodes: 10,
            horizon: sfplan_core::planner::DEFAULT_HORIZON,
            cadence: 1000,
            out: PathBuf::from("results"),
            min_priority: sfplan_core::ccs::DEFAULT_MIN_PRIORITY,
            max_iterations: sfplan_core::ccs::DEFAULT_MAX_ITERATIONS,
            basis: BasisMode::Exact,
        }
    }
}

fn list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> AppResult<T> {
    value.parse().map_err(|_| AppError::Config(format!("`{key}` is not a valid number: {value}")))
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unset keys keep
    /// their defaults.
    pub fn parse(text: &str) -> AppResult<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| AppError::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "env" => cfg.env = value.into(),
                "tasks" => cfg.tasks = list(value),
                "methods" => cfg.methods = list(value).iter().map(|m| Method::parse(m)).collect::<AppResult<_>>()?,
                "seeds" => cfg.seeds = list(value).iter().map(|s| number("seeds", s)).collect::<AppResult<_>>()?,
                "budget" => cfg.budget = number(key, value)?,
                "steps" => cfg.steps = Some(number(key, value)?),
                "episodes" => cfg.episodes = number(key, value)?,
                "horizon" => cfg.horizon = number(key, value)?,
                "cadence" => cfg.cadence = number(key, value)?,
                "out" => cfg.out = PathBuf::from(value),
                "min_priority" => cfg.min_priority = number(key, value)?,
                "max_iterations" => cfg.max_iterations = number(key, value)?,
                "basis" => {
                    cfg.basis = match value {
                        "exact" => BasisMode::Exact,
                        "learned" => BasisMode::Learned,
                        other => return Err(AppError::Config(format!("unknown basis `{other}`"))),
                    }
                }
                other => return Err(AppError::Config(format!("line {}: unknown key `{other}`", i + 1))),
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// Range checks that need no file access.
    pub fn check(&self) -> AppResult<()> {
        let bad = |m: &str| Err(AppError::Config(m.into()));
        if self.seeds.is_empty() {
            return bad("no seeds");
        }
        if self.tasks.is_empty() {
            return bad("no tasks");
        }
        if self.methods.is_empty() {
            return bad("no methods");
        }
        if self.budget == 0 || self.steps == Some(0) {
            return bad("budget must be positive");
        }
        if self.episodes == 0 || self.horizon == 0 || self.cadence == 0 {
            return bad("episodes, horizon and cadence must be positive");
        }
        if !(self.min_priority >= 0.0) {
            return bad("min_priority must be non-negative");
        }
        Ok(())
    }
}
