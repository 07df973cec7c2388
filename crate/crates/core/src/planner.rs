//! Value iteration over per-automaton-state exit weights, and execution of
//! the resulting product policies.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{contract, Result};
use crate::fsa::{Fsa, FsaState};
use crate::grid::PropositionMap;
use crate::mdp::{ActionId, EnvModel, StateId, WeightVector};
use crate::sf::{gpi_action, gpi_value, PolicyHandle};
use crate::util::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct PlanConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Update weights in place within a sweep instead of from the previous
    /// iterate.
    pub gauss_seidel: bool,
    /// Keep the weight table after every sweep.
    pub keep_history: bool,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 1000,
            gauss_seidel: false,
            keep_history: false,
        }
    }
}

/// Output of [`sf_fsa_vi`]. `weights[u]` is the exit-value vector of
/// non-terminal automaton state `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub weights: Vec<WeightVector>,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub op_count: u64,
    pub op_counts: Vec<u64>,
    pub converged: bool,
    pub history: Vec<Vec<WeightVector>>,
}

impl PlanResult {
    pub fn weight(&self, u: FsaState) -> &WeightVector {
        &self.weights[u.0]
    }

    /// `V_{w(u)}(s)` under GPI over `policies`.
    pub fn value(&self, policies: &[PolicyHandle], u: FsaState, s: StateId) -> f64 {
        gpi_value(policies, &self.weights[u.0], s)
    }
}

/// Plans an automaton task over a policy basis. Each sweep sets
/// `w_j(u) = 1` if the exit's proposition takes `u` to a terminal state and
/// `max_{a, π} w(τ(u, O(ε_j))) · ψ^π(ε_j, a)` otherwise, starting from
/// `w = 0`, until the max-norm change is at most `tol`.
pub fn sf_fsa_vi(
    policies: &[PolicyHandle],
    fsa: &Fsa,
    props: &PropositionMap,
    env: &EnvModel,
    cfg: &PlanConfig,
) -> Result<PlanResult> {
    if policies.is_empty() {
        return Err(contract("planning needs a non-empty policy set"));
    }
    let d = env.dim();
    if props.labels().len() != d || policies.iter().any(|p| p.table.dim() != d) {
        return Err(contract("policy set, propositions and environment disagree on the exit count"));
    }
    let nu = fsa.num_nonterminal();
    let exits = env.exits();
    // Successor automaton state for each (u, j).
    let succ: Vec<Vec<FsaState>> = fsa
        .nonterminal()
        .map(|u| (0..d).map(|j| fsa.tau_exit(u, props, j)).collect())
        .collect();

    let mut w = vec![WeightVector(vec![0.0; d]); nu];
    let mut result = PlanResult {
        weights: Vec::new(),
        iterations: 0,
        residuals: Vec::new(),
        op_count: 0,
        op_counts: Vec::new(),
        converged: false,
        history: Vec::new(),
    };
    let per_sweep = (nu * d * policies.len()) as u64;
    while result.iterations < cfg.max_iter {
        let prev = w.clone();
        let mut delta: f64 = 0.0;
        for u in 0..nu {
            for j in 0..d {
                let next = succ[u][j];
                let value = if fsa.is_terminal(next) {
                    1.0
                } else {
                    let source = if cfg.gauss_seidel { &w[next.0] } else { &prev[next.0] };
                    let mut best = f64::NEG_INFINITY;
                    for p in policies {
                        for a in 0..env.num_actions() {
                            best = best.max(dot(source, p.table.get(exits[j], ActionId(a))));
                        }
                    }
                    best
                };
                delta = delta.max((value - prev[u][j]).abs());
                w[u].0[j] = value;
            }
        }
        result.iterations += 1;
        result.op_count += per_sweep;
        result.op_counts.push(per_sweep);
        if !delta.is_finite() {
            return Err(crate::Error::Numerical("planner produced a non-finite weight".into()));
        }
        result.residuals.push(delta);
        if cfg.keep_history {
            result.history.push(w.clone());
        }
        if delta <= cfg.tol {
            result.converged = true;
            break;
        }
    }
    result.weights = w;
    Ok(result)
}

/// A policy over automaton-environment state pairs.
pub trait ProductPolicy {
    /// Called at the start of every episode.
    fn reset(&mut self) {}
    fn act(&mut self, u: FsaState, s: StateId) -> ActionId;
    /// Called after a transition into an exit; `u` is the automaton state
    /// after the transition.
    fn on_exit(&mut self, _u: FsaState, _s: StateId) {}
}

/// `μ(u, s) = argmax_a max_π w(u)·ψ^π(s, a)`.
#[derive(Debug, Clone)]
pub struct GpiProductPolicy<'a> {
    pub policies: &'a [PolicyHandle],
    pub weights: Vec<WeightVector>,
}

impl ProductPolicy for GpiProductPolicy<'_> {
    fn act(&mut self, u: FsaState, s: StateId) -> ActionId {
        gpi_action(self.policies, &self.weights[u.0], s)
    }
}

pub fn extract_policy<'a>(plan: &PlanResult, policies: &'a [PolicyHandle]) -> GpiProductPolicy<'a> {
    GpiProductPolicy {
        policies,
        weights: plan.weights.clone(),
    }
}

/// Summary of evaluation rollouts scored `−1` per step.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Episodes cut off at the horizon.
    pub failures: usize,
    pub returns: Vec<f64>,
}

impl EvalStats {
    pub fn from_returns(returns: Vec<f64>, failures: usize) -> Self {
        let n = returns.len().max(1) as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: libm::sqrt(var),
            failures,
            returns,
        }
    }
}

/// Default evaluation horizon.
pub const DEFAULT_HORIZON: usize = 200;

/// Rolls out `mu` from the environment's start cell and the automaton's
/// initial state. Each step costs 1; an episode ends when the automaton
/// reaches a terminal state, or scores `−horizon` and counts as a failure.
pub fn evaluate_product_policy<P: ProductPolicy + ?Sized, R: Rng + ?Sized>(
    mu: &mut P,
    fsa: &Fsa,
    props: &PropositionMap,
    env: &EnvModel,
    episodes: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<EvalStats> {
    if episodes == 0 {
        return Err(contract("evaluation needs at least one episode"));
    }
    let start = env.start().ok_or_else(|| contract("environment has no start state"))?;
    let mut returns = Vec::with_capacity(episodes);
    let mut failures = 0;
    for _ in 0..episodes {
        mu.reset();
        let (mut u, mut s) = (fsa.initial(), start);
        let mut steps = 0;
        let mut done = false;
        while steps < horizon {
            let a = mu.act(u, s);
            let (next, _) = env.sample_transition(s, a, rng)?;
            steps += 1;
            if env.is_terminal_transition(s, next) {
                let slot = env.exit_slot(next).expect("terminal successor is an exit");
                u = fsa.tau_exit(u, props, slot);
                if fsa.is_terminal(u) {
                    done = true;
                    break;
                }
                mu.on_exit(u, next);
            }
            s = next;
        }
        if !done {
            failures += 1;
        }
        returns.push(-(steps as f64));
    }
    Ok(EvalStats::from_returns(returns, failures))
}
