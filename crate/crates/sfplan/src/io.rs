//! Loading environments and tasks by name or path, and the CCS, SF-table,
//! weight-table and residual file formats.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sfplan_core::ccs::{Ccs, SolveRecord};
use sfplan_core::fsa::Fsa;
use sfplan_core::grid::{GridLayout, PropositionMap};
use sfplan_core::planner::PlanResult;
use sfplan_core::sf::{PolicyHandle, SfTable};
use sfplan_core::{EnvModel, WeightVector};

use crate::error::{AppError, AppResult};
use crate::fixtures;
use crate::layout::load_layout;
use crate::task::parse_fsa;

pub fn read_text(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> AppResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

/// A bundled domain name or a path to a layout file.
pub fn resolve_layout(spec: &str) -> AppResult<GridLayout> {
    if let Some(g) = fixtures::layout(spec) {
        return Ok(g);
    }
    let text = read_text(Path::new(spec))?;
    load_layout(&text).map_err(|source| AppError::Layout { path: spec.into(), source })
}

pub fn resolve_env(spec: &str) -> AppResult<(GridLayout, EnvModel, PropositionMap)> {
    let layout = resolve_layout(spec)?;
    let (env, props) = layout.build()?;
    Ok((layout, env, props))
}

/// A bundled task (`sequential`, `disjunction`, `composite`) of `domain`,
/// or a path to an automaton file.
pub fn resolve_task(domain: &str, spec: &str) -> AppResult<Fsa> {
    if let Some(f) = fixtures::task(domain, spec) {
        return Ok(f);
    }
    let text = read_text(Path::new(spec))?;
    parse_fsa(&text).map_err(|source| AppError::Task { path: spec.into(), source })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct PolicyRecord {
    id: usize,
    weights: Vec<f64>,
    mean_sf: Vec<f64>,
    /// Row-major `[state][action][component]`.
    table: Vec<f64>,
}

/// JSON has no infinities; they are written as the strings `inf`/`-inf`.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            Repr::Num(*x).serialize(s)
        } else {
            Repr::Text(if *x > 0.0 { "inf" } else if *x < 0.0 { "-inf" } else { "nan" }.into()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct Visit {
    weight: Vec<f64>,
    #[serde(with = "extended_float")]
    value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct LogRecord {
    weight: Vec<f64>,
    #[serde(with = "extended_float")]
    priority: f64,
    added: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct CcsFile {
    num_states: usize,
    num_actions: usize,
    dim: usize,
    policies: Vec<PolicyRecord>,
    visited: Vec<Visit>,
    log: Vec<LogRecord>,
}

/// JSON dump of a CCS including full SF tables.
pub fn ccs_to_json(ccs: &Ccs, env: &EnvModel) -> AppResult<String> {
    let file = CcsFile {
        num_states: env.num_states(),
        num_actions: env.num_actions(),
        dim: env.dim(),
        policies: ccs
            .policies
            .iter()
            .map(|p| PolicyRecord {
                id: p.id,
                weights: p.weights.0.clone(),
                mean_sf: p.mean_sf.0.clone(),
                table: p.table.raw().to_vec(),
            })
            .collect(),
        visited: ccs.visited.iter().map(|(w, v)| Visit { weight: w.0.clone(), value: *v }).collect(),
        log: ccs
            .log
            .iter()
            .map(|r| LogRecord {
                weight: r.weight.0.clone(),
                priority: r.priority,
                added: r.added,
            })
            .collect(),
    };
    Ok(serde_json::to_string(&file)?)
}

/// Reads a CCS dump for `env`; shapes must agree.
pub fn ccs_from_json(text: &str, env: &EnvModel) -> AppResult<Ccs> {
    let file: CcsFile = serde_json::from_str(text)?;
    if (file.num_states, file.num_actions, file.dim) != (env.num_states(), env.num_actions(), env.dim()) {
        return Err(AppError::Format(format!(
            "CCS was built for {}x{}x{} tables, environment needs {}x{}x{}",
            file.num_states,
            file.num_actions,
            file.dim,
            env.num_states(),
            env.num_actions(),
            env.dim()
        )));
    }
    let policies = file
        .policies
        .into_iter()
        .map(|p| {
            let table = SfTable::from_raw(file.num_states, file.num_actions, file.dim, p.table)?;
            Ok(PolicyHandle::new(p.id, WeightVector(p.weights), table, env))
        })
        .collect::<AppResult<Vec<_>>>()?;
    Ok(Ccs {
        policies,
        visited: file.visited.into_iter().map(|v| (WeightVector(v.weight), v.value)).collect(),
        log: file
            .log
            .into_iter()
            .map(|r| SolveRecord {
                weight: WeightVector(r.weight),
                priority: r.priority,
                added: r.added,
            })
            .collect(),
    })
}

/// `policy,state,action,component,value` rows for every table entry.
pub fn sf_tables_csv(policies: &[PolicyHandle]) -> AppResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["policy", "state", "action", "component", "value"])?;
    for p in policies {
        let t = &p.table;
        for s in 0..t.num_states() {
            for a in 0..t.num_actions() {
                for (j, v) in t.get(sfplan_core::StateId(s), sfplan_core::ActionId(a)).iter().enumerate() {
                    w.serialize((p.id, s, a, j, v))?;
                }
            }
        }
    }
    finish(w)
}

/// `u,exit,proposition,value` rows of a plan's weight table.
pub fn weight_table_csv(plan: &PlanResult, fsa: &Fsa, props: &PropositionMap) -> AppResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["u", "exit", "proposition", "value"])?;
    for u in fsa.nonterminal() {
        for (j, v) in plan.weight(u).iter().enumerate() {
            w.serialize((fsa.name(u), j, props.label(j), v))?;
        }
    }
    finish(w)
}

/// `iteration,residual,ops` rows.
pub fn residual_csv(residuals: &[f64], ops: &[u64]) -> AppResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "residual", "ops"])?;
    for (k, (r, o)) in residuals.iter().zip(ops).enumerate() {
        w.serialize((k + 1, r, o))?;
    }
    finish(w)
}

pub(crate) fn finish(w: csv::Writer<Vec<u8>>) -> AppResult<String> {
    let bytes = w.into_inner().map_err(|e| AppError::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| AppError::Format(e.to_string()))
}
