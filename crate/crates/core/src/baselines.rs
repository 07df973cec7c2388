//! Comparison methods: tabular Q-learning on the product MDP, and a
//! logical-options planner with one option per exit.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{contract, Error, Result};
use crate::fsa::{Fsa, FsaState, ProductMdp};
use crate::grid::PropositionMap;
use crate::mdp::{ActionId, EnvModel, StateId};
use crate::planner::ProductPolicy;
use crate::sf::{greedy_from_q, LearnConfig};
use crate::util::sample_index;

fn argmax(row: &[f64]) -> usize {
    greedy_from_q(row, row.len())[0].0
}

fn row_max(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Incremental Q-learning on a product MDP. Episodes start in the
/// automaton's initial state at a cell drawn from the environment's
/// initial distribution.
#[derive(Debug, Clone)]
pub struct FlatQLearner<'a> {
    pub product: &'a ProductMdp,
    pub q: Vec<f64>,
    pub config: LearnConfig,
    /// Total step budget the exploration schedule decays over.
    pub budget: usize,
    pub steps: usize,
    initial_u: FsaState,
    initial: &'a [f64],
    state: Option<usize>,
    episode_len: usize,
}

impl<'a> FlatQLearner<'a> {
    pub fn new(product: &'a ProductMdp, fsa: &Fsa, env: &'a EnvModel, budget: usize, config: LearnConfig) -> Self {
        Self {
            product,
            q: vec![0.0; product.num_states() * product.num_actions()],
            config,
            budget,
            steps: 0,
            initial_u: fsa.initial(),
            initial: env.initial_dist(),
            state: None,
            episode_len: 0,
        }
    }

    fn row(&self, x: usize) -> &[f64] {
        let m = self.product.num_actions();
        &self.q[x * m..(x + 1) * m]
    }

    /// Runs `steps` more environment steps.
    pub fn train<R: Rng + ?Sized>(&mut self, steps: usize, rng: &mut R) -> Result<()> {
        let m = self.product.num_actions();
        for _ in 0..steps {
            let x = match self.state {
                Some(x) => x,
                None => {
                    let s = sample_index(self.initial.iter().copied(), rng);
                    self.product.index(self.initial_u, StateId(s))
                }
            };
            let eps = self.config.epsilon(self.steps, self.budget);
            let a = if rng.random::<f64>() < eps { rng.random_range(0..m) } else { argmax(self.row(x)) };
            let outs = self.product.outcomes(x, ActionId(a));
            let o = outs[sample_index(outs.iter().map(|o| o.prob), rng)];
            let target = o.reward + if o.terminal { 0.0 } else { o.discount * row_max(self.row(o.next)) };
            let k = x * m + a;
            self.q[k] += self.config.alpha * (target - self.q[k]);
            if !self.q[k].is_finite() {
                return Err(Error::Numerical("Q-learning produced a non-finite value".into()));
            }
            self.steps += 1;
            self.episode_len += 1;
            if o.terminal || self.episode_len >= self.config.max_episode_len {
                self.state = None;
                self.episode_len = 0;
            } else {
                self.state = Some(o.next);
            }
        }
        Ok(())
    }

    pub fn policy(&self) -> FlatPolicy {
        FlatPolicy {
            actions: greedy_from_q(&self.q, self.product.num_actions()),
            num_env_states: self.product.num_env_states(),
        }
    }
}

/// Greedy product policy from a flat table.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatPolicy {
    pub actions: Vec<ActionId>,
    pub num_env_states: usize,
}

impl ProductPolicy for FlatPolicy {
    fn act(&mut self, u: FsaState, s: StateId) -> ActionId {
        self.actions[u.0 * self.num_env_states + s.0]
    }
}

/// Q-learning on the product for `budget` steps; returns the table and
/// its greedy policy.
pub fn flat_q_learning<R: Rng + ?Sized>(
    product: &ProductMdp,
    fsa: &Fsa,
    env: &EnvModel,
    budget: usize,
    config: &LearnConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, FlatPolicy)> {
    let mut learner = FlatQLearner::new(product, fsa, env, budget, config.clone());
    learner.train(budget, rng)?;
    let policy = learner.policy();
    Ok((learner.q, policy))
}

/// An option that runs until the first terminal transition and is
/// rewarded for entering an exit labeled with its proposition.
#[derive(Debug, Clone, PartialEq)]
pub struct LofOption {
    /// The exit this option was created for.
    pub exit: usize,
    pub proposition: String,
    pub policy: Vec<ActionId>,
    /// `R_o(s)`: expected discounted step penalty until completion.
    pub reward: Vec<f64>,
    /// `T_o(s, j) = E[γ^k · 1{completes at exit j}]`, `k` the duration.
    pub completion: Vec<Vec<f64>>,
}

/// One option per exit.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionSet {
    pub options: Vec<LofOption>,
}

impl OptionSet {
    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }
}

/// Scalar reward the option for `prop` receives on transition `t` from `s`.
fn option_reward(env: &EnvModel, props: &PropositionMap, prop: &str, s: StateId, next: StateId, feature: usize) -> f64 {
    if env.is_terminal_transition(s, next) {
        let slot = env.exit_slot(next).expect("terminal successor is an exit");
        if props.label(slot) == prop {
            1.0
        } else {
            0.0
        }
    } else {
        env.step_penalty(feature)
    }
}

/// Optimal option Q-values by value iteration.
fn option_q_values(env: &EnvModel, props: &PropositionMap, prop: &str) -> Result<Vec<f64>> {
    let (n, m, gamma) = (env.num_states(), env.num_actions(), env.gamma());
    let mut v = vec![0.0; n];
    let mut q = vec![0.0; n * m];
    for _ in 0..100_000 {
        let mut delta: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for s in 0..n {
            for a in 0..m {
                q[s * m + a] = env
                    .transitions(StateId(s), ActionId(a))
                    .iter()
                    .map(|t| {
                        let r = option_reward(env, props, prop, StateId(s), t.next, t.feature);
                        let cont = if env.is_terminal_transition(StateId(s), t.next) { 0.0 } else { gamma * v[t.next.0] };
                        t.prob * (r + cont)
                    })
                    .sum();
            }
            let best = row_max(&q[s * m..(s + 1) * m]);
            delta = delta.max((best - v[s]).abs());
            scale = scale.max(best.abs());
            v[s] = best;
        }
        if delta <= 1e-12 * scale {
            return Ok(q);
        }
    }
    Err(Error::Numerical("option value iteration did not converge".into()))
}

/// Reward and completion models of a fixed option policy.
fn option_models(env: &EnvModel, policy: &[ActionId]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let (n, d, gamma) = (env.num_states(), env.dim(), env.gamma());
    let mut reward = vec![0.0; n];
    let mut completion = vec![vec![0.0; d]; n];
    for _ in 0..100_000 {
        let mut delta: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for s in 0..n {
            let mut r = 0.0;
            let mut c = vec![0.0; d];
            for t in env.transitions(StateId(s), policy[s]) {
                if env.is_terminal_transition(StateId(s), t.next) {
                    let slot = env.exit_slot(t.next).expect("terminal successor is an exit");
                    c[slot] += t.prob * gamma;
                } else {
                    r += t.prob * (env.step_penalty(t.feature) + gamma * reward[t.next.0]);
                    for (cj, nj) in c.iter_mut().zip(&completion[t.next.0]) {
                        *cj += t.prob * gamma * nj;
                    }
                }
            }
            delta = delta.max((r - reward[s]).abs());
            for (cj, old) in c.iter().zip(&completion[s]) {
                delta = delta.max((cj - old).abs());
            }
            scale = scale.max(r.abs());
            reward[s] = r;
            completion[s] = c;
        }
        if !delta.is_finite() {
            return Err(Error::Numerical("option model evaluation diverged".into()));
        }
        if delta <= 1e-12 * scale {
            return Ok((reward, completion));
        }
    }
    Err(Error::Numerical("option model evaluation did not converge".into()))
}

fn build_option(env: &EnvModel, props: &PropositionMap, exit: usize, policy: Vec<ActionId>) -> Result<LofOption> {
    let (reward, completion) = option_models(env, &policy)?;
    Ok(LofOption {
        exit,
        proposition: props.label(exit).into(),
        policy,
        reward,
        completion,
    })
}

/// Options with optimal policies, solved by value iteration.
pub fn lof_exact_options(env: &EnvModel, props: &PropositionMap) -> Result<OptionSet> {
    if props.labels().len() != env.dim() {
        return Err(contract("proposition map does not cover every exit"));
    }
    let options = (0..env.dim())
        .map(|j| {
            let q = option_q_values(env, props, props.label(j))?;
            build_option(env, props, j, greedy_from_q(&q, env.num_actions()))
        })
        .collect::<Result<_>>()?;
    Ok(OptionSet { options })
}

/// Intra-option Q-learning of all options from one behavior stream. Each
/// episode follows one randomly chosen option ε-greedily, and every
/// transition updates every option's table.
#[derive(Debug, Clone)]
pub struct LofLearner<'a> {
    pub env: &'a EnvModel,
    pub props: &'a PropositionMap,
    pub q: Vec<Vec<f64>>,
    pub config: LearnConfig,
    pub budget: usize,
    pub steps: usize,
    state: Option<(StateId, usize)>,
    episode_len: usize,
    buffer: VecDeque<(StateId, ActionId, StateId, usize)>,
}

impl<'a> LofLearner<'a> {
    pub fn new(env: &'a EnvModel, props: &'a PropositionMap, budget: usize, config: LearnConfig) -> Self {
        let size = env.num_states() * env.num_actions();
        Self {
            env,
            props,
            q: vec![vec![0.0; size]; env.dim()],
            config,
            budget,
            steps: 0,
            state: None,
            episode_len: 0,
            buffer: VecDeque::new(),
        }
    }

    fn update(&mut self, s: StateId, a: ActionId, next: StateId, feature: usize) -> Result<()> {
        let (m, gamma, alpha) = (self.env.num_actions(), self.env.gamma(), self.config.alpha);
        let terminal = self.env.is_terminal_transition(s, next);
        for j in 0..self.q.len() {
            let r = option_reward(self.env, self.props, self.props.label(j), s, next, feature);
            let q = &mut self.q[j];
            let cont = if terminal { 0.0 } else { gamma * row_max(&q[next.0 * m..(next.0 + 1) * m]) };
            let k = s.0 * m + a.0;
            q[k] += alpha * (r + cont - q[k]);
            if !q[k].is_finite() {
                return Err(Error::Numerical("option learning produced a non-finite value".into()));
            }
        }
        Ok(())
    }

    pub fn train<R: Rng + ?Sized>(&mut self, steps: usize, rng: &mut R) -> Result<()> {
        let m = self.env.num_actions();
        if self.q.is_empty() {
            return Err(contract("environment has no exits"));
        }
        for _ in 0..steps {
            let (s, o) = match self.state {
                Some(x) => x,
                None => (self.env.sample_initial(rng), rng.random_range(0..self.q.len())),
            };
            let eps = self.config.epsilon(self.steps, self.budget);
            let a = if rng.random::<f64>() < eps {
                ActionId(rng.random_range(0..m))
            } else {
                ActionId(argmax(&self.q[o][s.0 * m..(s.0 + 1) * m]))
            };
            let ts = self.env.transitions(s, a);
            let t = ts[sample_index(ts.iter().map(|t| t.prob), rng)];
            self.update(s, a, t.next, t.feature)?;
            if self.config.replay_capacity > 0 {
                if self.buffer.len() == self.config.replay_capacity {
                    self.buffer.pop_front();
                }
                self.buffer.push_back((s, a, t.next, t.feature));
                for _ in 0..self.config.replay_batch {
                    let (rs, ra, rn, rf) = self.buffer[rng.random_range(0..self.buffer.len())];
                    self.update(rs, ra, rn, rf)?;
                }
            }
            self.steps += 1;
            self.episode_len += 1;
            if self.env.is_terminal_transition(s, t.next) || self.episode_len >= self.config.max_episode_len {
                self.state = None;
                self.episode_len = 0;
            } else {
                self.state = Some((t.next, o));
            }
        }
        Ok(())
    }

    /// Options from the current greedy policies, with models computed by
    /// evaluating those policies on the environment model.
    pub fn options(&self) -> Result<OptionSet> {
        let m = self.env.num_actions();
        let options = (0..self.q.len())
            .map(|j| build_option(self.env, self.props, j, greedy_from_q(&self.q[j], m)))
            .collect::<Result<_>>()?;
        Ok(OptionSet { options })
    }
}

/// Trains all options for `budget` steps and returns their models.
pub fn lof_train_options<R: Rng + ?Sized>(
    env: &EnvModel,
    props: &PropositionMap,
    budget: usize,
    config: &LearnConfig,
    rng: &mut R,
) -> Result<OptionSet> {
    if budget == 0 {
        return Err(contract("learning budget must be positive"));
    }
    let mut learner = LofLearner::new(env, props, budget, config.clone());
    learner.train(budget, rng)?;
    learner.options()
}

/// Meta-level plan: an option choice for every `(u, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LofPlan {
    /// `meta[u · |S| + s]` is the chosen option.
    pub meta: Vec<usize>,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub op_count: u64,
    pub op_counts: Vec<u64>,
    pub converged: bool,
    pub history: Vec<Vec<usize>>,
}

/// Value iteration over `(u, s)` with option backups
/// `max_o R_o(s) + Σ_j T_o(s, j) · V(τ(u, O(ε_j)), ε_j)`, where terminal
/// automaton states are worth 1.
pub fn lof_plan(
    options: &OptionSet,
    fsa: &Fsa,
    props: &PropositionMap,
    env: &EnvModel,
    cfg: &crate::planner::PlanConfig,
) -> Result<LofPlan> {
    if options.is_empty() {
        return Err(contract("planning needs at least one option"));
    }
    let (nu, n, d) = (fsa.num_nonterminal(), env.num_states(), env.dim());
    let succ: Vec<Vec<FsaState>> = fsa
        .nonterminal()
        .map(|u| (0..d).map(|j| fsa.tau_exit(u, props, j)).collect())
        .collect();
    let exits = env.exits();
    let mut v = vec![0.0; nu * n];
    let mut meta = vec![0usize; nu * n];
    let mut plan = LofPlan {
        meta: Vec::new(),
        values: Vec::new(),
        iterations: 0,
        residuals: Vec::new(),
        op_count: 0,
        op_counts: Vec::new(),
        converged: false,
        history: Vec::new(),
    };
    let per_sweep = (nu * n * options.len()) as u64;
    while plan.iterations < cfg.max_iter {
        let prev = v.clone();
        let mut delta: f64 = 0.0;
        for u in 0..nu {
            for s in 0..n {
                let source = if cfg.gauss_seidel { &v } else { &prev };
                let exit_value = |j: usize| {
                    let next = succ[u][j];
                    if fsa.is_terminal(next) {
                        1.0
                    } else {
                        source[next.0 * n + exits[j].0]
                    }
                };
                let mut best = (f64::NEG_INFINITY, 0);
                for (k, o) in options.options.iter().enumerate() {
                    let q = o.reward[s] + (0..d).map(|j| o.completion[s][j] * exit_value(j)).sum::<f64>();
                    if q > best.0 + crate::sf::TIE_TOL * best.0.abs().max(1.0) || best.0 == f64::NEG_INFINITY {
                        best = (q, k);
                    }
                }
                let x = u * n + s;
                delta = delta.max((best.0 - prev[x]).abs());
                v[x] = best.0;
                meta[x] = best.1;
            }
        }
        plan.iterations += 1;
        plan.op_count += per_sweep;
        plan.op_counts.push(per_sweep);
        if !delta.is_finite() {
            return Err(Error::Numerical("option planner produced a non-finite value".into()));
        }
        plan.residuals.push(delta);
        if cfg.keep_history {
            plan.history.push(meta.clone());
        }
        if delta <= cfg.tol {
            plan.converged = true;
            break;
        }
    }
    plan.meta = meta;
    plan.values = v;
    Ok(plan)
}

/// Call-and-return execution: the chosen option runs until an exit is
/// entered, then the meta-policy picks again.
#[derive(Debug, Clone)]
pub struct LofPolicy<'a> {
    pub options: &'a OptionSet,
    pub meta: Vec<usize>,
    pub num_env_states: usize,
    current: Option<usize>,
}

impl<'a> LofPolicy<'a> {
    pub fn new(options: &'a OptionSet, plan: &LofPlan, env: &EnvModel) -> Self {
        Self::from_meta(options, plan.meta.clone(), env)
    }

    pub fn from_meta(options: &'a OptionSet, meta: Vec<usize>, env: &EnvModel) -> Self {
        Self {
            options,
            meta,
            num_env_states: env.num_states(),
            current: None,
        }
    }

    /// The option currently executing, if any.
    pub fn current(&self) -> Option<usize> {
        self.current
    }
}

impl ProductPolicy for LofPolicy<'_> {
    fn reset(&mut self) {
        self.current = None;
    }

    fn act(&mut self, u: FsaState, s: StateId) -> ActionId {
        let o = *self.current.get_or_insert(self.meta[u.0 * self.num_env_states + s.0]);
        self.options.options[o].policy[s.0]
    }

    fn on_exit(&mut self, _u: FsaState, _s: StateId) {
        self.current = None;
    }
}
