//! Successor-feature tables: exact evaluation, tabular learning, and
//! generalized policy improvement over a set of policies.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{contract, Error, Result};
use crate::mdp::{ActionId, EnvModel, FeatureVector, StateId, WeightVector};
use crate::util::{dot, max_abs_diff};

/// Relative slack under which two action values count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// `ψ(s, a)` for every state-action pair, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct SfTable {
    num_states: usize,
    num_actions: usize,
    dim: usize,
    data: Vec<f64>,
}

impl SfTable {
    pub fn zeros(num_states: usize, num_actions: usize, dim: usize) -> Self {
        Self {
            num_states,
            num_actions,
            dim,
            data: vec![0.0; num_states * num_actions * dim],
        }
    }

    /// Rebuilds a table from row-major `(state, action, component)` data.
    pub fn from_raw(num_states: usize, num_actions: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != num_states * num_actions * dim {
            return Err(contract("successor-feature data has the wrong length"));
        }
        Ok(Self {
            num_states,
            num_actions,
            dim,
            data,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, s: StateId, a: ActionId) -> &[f64] {
        let k = (s.0 * self.num_actions + a.0) * self.dim;
        &self.data[k..k + self.dim]
    }

    pub fn get_mut(&mut self, s: StateId, a: ActionId) -> &mut [f64] {
        let k = (s.0 * self.num_actions + a.0) * self.dim;
        &mut self.data[k..k + self.dim]
    }

    pub fn q(&self, w: &[f64], s: StateId, a: ActionId) -> f64 {
        dot(w, self.get(s, a))
    }

    /// Greedy action under `w`, lowest index among ties.
    pub fn greedy(&self, w: &[f64], s: StateId) -> ActionId {
        let mut best = ActionId(0);
        let mut best_q = self.q(w, s, best);
        for a in 1..self.num_actions {
            let q = self.q(w, s, ActionId(a));
            if q > best_q + TIE_TOL * best_q.abs().max(1.0) {
                best = ActionId(a);
                best_q = q;
            }
        }
        best
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// A basis policy: the weight it was trained for, its successor features
/// and its expected successor features at the initial distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyHandle {
    pub id: usize,
    pub weights: WeightVector,
    pub table: SfTable,
    /// `ψ̄ = E_{s0}[ψ(s0, π(s0))]`.
    pub mean_sf: FeatureVector,
}

impl PolicyHandle {
    pub fn new(id: usize, weights: WeightVector, table: SfTable, env: &EnvModel) -> Self {
        let mean_sf = expected_sf(env, &table, &weights);
        Self {
            id,
            weights,
            table,
            mean_sf,
        }
    }

    pub fn action(&self, s: StateId) -> ActionId {
        self.table.greedy(&self.weights, s)
    }

    /// Scalar value `w · ψ̄` of this policy on a (possibly different) task.
    pub fn value(&self, w: &[f64]) -> f64 {
        dot(w, &self.mean_sf)
    }
}

/// `E_{s0}[ψ(s0, π_w(s0))]` over the reference distribution, with `π_w`
/// greedy on `table` under `w`.
pub fn expected_sf(env: &EnvModel, table: &SfTable, w: &[f64]) -> FeatureVector {
    let mut out = vec![0.0; table.dim()];
    for (s, &p) in env.reference_dist().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let a = table.greedy(w, StateId(s));
        for (o, x) in out.iter_mut().zip(table.get(StateId(s), a)) {
            *o += p * x;
        }
    }
    FeatureVector(out)
}

/// Optimal scalar action values for reward `w · φ` by value iteration,
/// iterated until the max-norm change drops below `tol · max(1, ‖V‖∞)`.
pub fn scalar_q_values(env: &EnvModel, w: &[f64], tol: f64) -> Result<Vec<f64>> {
    let (n, m) = (env.num_states(), env.num_actions());
    let gamma = env.gamma();
    let rewards: Vec<f64> = env.features().iter().map(|f| dot(w, f)).collect();
    let mut v = vec![0.0; n];
    let mut q = vec![0.0; n * m];
    for _ in 0..100_000 {
        let mut delta: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..m {
                let mut acc = 0.0;
                for t in env.transitions(StateId(s), ActionId(a)) {
                    let cont = if env.is_terminal_transition(StateId(s), t.next) { 0.0 } else { gamma * v[t.next.0] };
                    acc += t.prob * (rewards[t.feature] + cont);
                }
                q[s * m + a] = acc;
                best = best.max(acc);
            }
            delta = delta.max((best - v[s]).abs());
            scale = scale.max(best.abs());
            v[s] = best;
        }
        if !delta.is_finite() {
            return Err(Error::Numerical("value iteration diverged".into()));
        }
        if delta <= tol * scale {
            return Ok(q);
        }
    }
    Err(Error::Numerical("value iteration did not converge".into()))
}

/// Greedy actions over a flat `(state, action)` table, lowest index on ties.
pub fn greedy_from_q(q: &[f64], num_actions: usize) -> Vec<ActionId> {
    q.chunks(num_actions)
        .map(|row| {
            let mut best = 0;
            for a in 1..row.len() {
                if row[a] > row[best] + TIE_TOL * row[best].abs().max(1.0) {
                    best = a;
                }
            }
            ActionId(best)
        })
        .collect()
}

/// Successor features of a fixed deterministic policy, iterating
/// `ψ(s,a) ← Σ_{s'} P(s'|s,a) [φ + γ·1{non-terminal}·ψ(s', π(s'))]`.
/// Stops once the max-norm change is at most `tol · max(1, ‖ψ‖∞)`.
/// Returns the table and the max-norm change of each sweep.
pub fn evaluate_sf(env: &EnvModel, policy: &[ActionId], tol: f64) -> Result<(SfTable, Vec<f64>)> {
    let (n, m, d) = (env.num_states(), env.num_actions(), env.dim());
    if policy.len() != n {
        return Err(contract("policy does not cover every state"));
    }
    let gamma = env.gamma();
    let mut table = SfTable::zeros(n, m, d);
    let mut residuals = Vec::new();
    let mut next = table.data.clone();
    for _ in 0..100_000 {
        for s in 0..n {
            for a in 0..m {
                let base = (s * m + a) * d;
                let row = &mut next[base..base + d];
                row.iter_mut().for_each(|x| *x = 0.0);
                for t in env.transitions(StateId(s), ActionId(a)) {
                    let phi = env.feature(t.feature);
                    let terminal = env.is_terminal_transition(StateId(s), t.next);
                    let succ = table.get(t.next, policy[t.next.0]);
                    for j in 0..d {
                        let cont = if terminal { 0.0 } else { gamma * succ[j] };
                        row[j] += t.prob * (phi[j] + cont);
                    }
                }
            }
        }
        let delta = max_abs_diff(&table.data, &next);
        core::mem::swap(&mut table.data, &mut next);
        if !delta.is_finite() {
            return Err(Error::Numerical("successor-feature evaluation diverged".into()));
        }
        residuals.push(delta);
        let scale = table.data.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if delta <= tol * scale {
            return Ok((table, residuals));
        }
    }
    Err(Error::Numerical("successor-feature evaluation did not converge".into()))
}

/// Exact solver: optimal greedy policy for `w` by scalar value iteration,
/// then its successor features by policy evaluation to tolerance `tol`.
pub fn solve_sf_exact(env: &EnvModel, w: &WeightVector, tol: f64) -> Result<PolicyHandle> {
    if w.len() != env.dim() {
        return Err(contract(format!("weight dimension {} != {}", w.len(), env.dim())));
    }
    if tol <= 0.0 {
        return Err(contract("tolerance must be positive"));
    }
    let q = scalar_q_values(env, w, tol.min(1e-12))?;
    let policy = greedy_from_q(&q, env.num_actions());
    let (table, _) = evaluate_sf(env, &policy, tol)?;
    // Re-derive the greedy policy from the table so that `action` agrees
    // with the policy that was evaluated.
    let mut handle = PolicyHandle::new(0, w.clone(), table, env);
    let consistent = (0..env.num_states()).all(|s| handle.action(StateId(s)) == policy[s]);
    if !consistent {
        handle.mean_sf = mean_sf_of(env, &handle.table, &policy);
    }
    Ok(handle)
}

fn mean_sf_of(env: &EnvModel, table: &SfTable, policy: &[ActionId]) -> FeatureVector {
    let mut out = vec![0.0; table.dim()];
    for (s, &p) in env.reference_dist().iter().enumerate() {
        for (o, x) in out.iter_mut().zip(table.get(StateId(s), policy[s])) {
            *o += p * x;
        }
    }
    FeatureVector(out)
}

/// Hyperparameters of tabular successor-feature Q-learning.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub alpha: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Replay buffer capacity; zero disables replay.
    pub replay_capacity: usize,
    pub replay_batch: usize,
    /// Episodes are cut after this many steps and restarted.
    pub max_episode_len: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            replay_capacity: 10_000,
            replay_batch: 32,
            max_episode_len: 200,
        }
    }
}

impl LearnConfig {
    /// Linearly decayed exploration rate at `step` of `budget`.
    pub fn epsilon(&self, step: usize, budget: usize) -> f64 {
        let frac = if budget <= 1 { 1.0 } else { step as f64 / (budget - 1) as f64 };
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac.min(1.0)
    }
}

/// One observed transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience {
    pub s: StateId,
    pub a: ActionId,
    pub next: StateId,
    /// Feature palette index of `φ(s, a, s')`.
    pub feature: usize,
    pub terminal: bool,
}

/// Tabular SF Q-learning update rule for a fixed task weight.
#[derive(Debug, Clone)]
pub struct SfLearner {
    pub table: SfTable,
    pub weights: WeightVector,
    pub alpha: f64,
    pub gamma: f64,
}

impl SfLearner {
    pub fn new(env: &EnvModel, weights: WeightVector, alpha: f64) -> Self {
        Self {
            table: SfTable::zeros(env.num_states(), env.num_actions(), env.dim()),
            weights,
            alpha,
            gamma: env.gamma(),
        }
    }

    /// `ψ(s,a) += α (φ + γ ψ(s', a*) − ψ(s,a))`, `a* = argmax_b w·ψ(s', b)`,
    /// with a zero bootstrap past terminal transitions.
    pub fn update(&mut self, env: &EnvModel, e: &Experience) -> Result<()> {
        let d = self.table.dim();
        let mut target = [0.0f64; 16];
        let mut heap;
        let target: &mut [f64] = if d <= 16 {
            &mut target[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let phi = env.feature(e.feature);
        target.copy_from_slice(phi);
        if !e.terminal {
            let a_star = self.table.greedy(&self.weights, e.next);
            for (t, x) in target.iter_mut().zip(self.table.get(e.next, a_star)) {
                *t += self.gamma * x;
            }
        }
        let alpha = self.alpha;
        let row = self.table.get_mut(e.s, e.a);
        for (r, t) in row.iter_mut().zip(target.iter()) {
            *r += alpha * (t - *r);
            if !r.is_finite() {
                return Err(Error::Numerical("successor-feature update produced a non-finite value".into()));
            }
        }
        Ok(())
    }
}

/// Scalar Q-learning on rewards `w · φ`, the reference stream for the
/// linearity identity `Q_w = w · ψ`.
#[derive(Debug, Clone)]
pub struct ScalarLearner {
    pub q: Vec<f64>,
    pub rewards: Vec<f64>,
    pub num_actions: usize,
    pub alpha: f64,
    pub gamma: f64,
}

impl ScalarLearner {
    pub fn new(env: &EnvModel, w: &[f64], alpha: f64) -> Self {
        Self {
            q: vec![0.0; env.num_states() * env.num_actions()],
            rewards: env.features().iter().map(|f| dot(w, f)).collect(),
            num_actions: env.num_actions(),
            alpha,
            gamma: env.gamma(),
        }
    }

    pub fn update(&mut self, e: &Experience) {
        let m = self.num_actions;
        let mut target = self.rewards[e.feature];
        if !e.terminal {
            let row = &self.q[e.next.0 * m..(e.next.0 + 1) * m];
            let a_star = greedy_from_q(row, m)[0];
            target += self.gamma * row[a_star.0];
        }
        let k = e.s.0 * m + e.a.0;
        self.q[k] += self.alpha * (target - self.q[k]);
    }
}

fn push_replay(buffer: &mut VecDeque<Experience>, capacity: usize, e: Experience) {
    if capacity == 0 {
        return;
    }
    if buffer.len() == capacity {
        buffer.pop_front();
    }
    buffer.push_back(e);
}

/// Learns a policy and its successor features for `w` with `budget`
/// environment steps of ε-greedy SF Q-learning plus experience replay.
pub fn learn_sf_policy<R: Rng + ?Sized>(
    env: &EnvModel,
    w: &WeightVector,
    budget: usize,
    cfg: &LearnConfig,
    rng: &mut R,
) -> Result<PolicyHandle> {
    if budget == 0 {
        return Err(contract("learning budget must be positive"));
    }
    if w.len() != env.dim() || w.iter().any(|x| !x.is_finite()) {
        return Err(contract("weights must be finite and match the feature dimension"));
    }
    let mut learner = SfLearner::new(env, w.clone(), cfg.alpha);
    let mut buffer = VecDeque::with_capacity(cfg.replay_capacity.min(budget));
    let mut s = env.sample_initial(rng);
    let mut episode_len = 0;
    for step in 0..budget {
        let eps = cfg.epsilon(step, budget);
        let a = if rng.random::<f64>() < eps {
            ActionId(rng.random_range(0..env.num_actions()))
        } else {
            learner.table.greedy(w, s)
        };
        let ts = env.transitions(s, a);
        let t = ts[crate::util::sample_index(ts.iter().map(|t| t.prob), rng)];
        let e = Experience {
            s,
            a,
            next: t.next,
            feature: t.feature,
            terminal: env.is_terminal_transition(s, t.next),
        };
        learner.update(env, &e)?;
        push_replay(&mut buffer, cfg.replay_capacity, e);
        if !buffer.is_empty() {
            for _ in 0..cfg.replay_batch {
                let k = rng.random_range(0..buffer.len());
                let sample = buffer[k];
                learner.update(env, &sample)?;
            }
        }
        episode_len += 1;
        if e.terminal || episode_len >= cfg.max_episode_len {
            s = env.sample_initial(rng);
            episode_len = 0;
        } else {
            s = t.next;
        }
    }
    Ok(PolicyHandle::new(0, w.clone(), learner.table, env))
}

/// GPI action: `argmax_a max_π w·ψ^π(s, a)`, ties to the lowest
/// `(policy id, action id)`.
pub fn gpi_action(policies: &[PolicyHandle], w: &[f64], s: StateId) -> ActionId {
    gpi_best(policies, w, s).1
}

/// GPI value `max_{a, π} w·ψ^π(s, a)`.
pub fn gpi_value(policies: &[PolicyHandle], w: &[f64], s: StateId) -> f64 {
    gpi_best(policies, w, s).0
}

fn gpi_best(policies: &[PolicyHandle], w: &[f64], s: StateId) -> (f64, ActionId) {
    debug_assert!(!policies.is_empty(), "GPI over an empty policy set");
    let mut order: Vec<&PolicyHandle> = policies.iter().collect();
    order.sort_by_key(|p| p.id);
    let mut best = (f64::NEG_INFINITY, ActionId(0));
    for p in order {
        for a in 0..p.table.num_actions() {
            let q = p.table.q(w, s, ActionId(a));
            if q > best.0 + TIE_TOL * best.0.abs().max(1.0) || best.0 == f64::NEG_INFINITY {
                best = (q, ActionId(a));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// 0 -> 1 -> 2 (exit) corridor, action 0 = right, action 1 = stay.
    fn corridor() -> EnvModel {
        let mut b = EnvModel::builder(3, 2, alloc::vec![StateId(2)]).gamma(0.95);
        for s in 0..3usize {
            let r = StateId((s + 1).min(2));
            let phi = if s < 2 && r == StateId(2) { FeatureVector::one_hot(1, 0) } else { FeatureVector::zeros(1) };
            b.transition(StateId(s), ActionId(0), r, 1.0, phi);
            b.transition(StateId(s), ActionId(1), StateId(s), 1.0, FeatureVector::zeros(1));
        }
        b.build().unwrap()
    }

    #[test]
    fn exact_corridor_values() {
        let env = corridor();
        let p = solve_sf_exact(&env, &WeightVector(alloc::vec![1.0]), 1e-12).unwrap();
        assert_eq!(p.table.get(StateId(1), ActionId(0)), &[1.0]);
        assert!((p.table.get(StateId(0), ActionId(0))[0] - 0.95).abs() < 1e-12);
        assert_eq!(p.action(StateId(0)), ActionId(0));
    }

    #[test]
    fn self_loop_is_geometric_series() {
        // One state looping on itself with φ = -0.5, exit unreachable except by action 1.
        let mut b = EnvModel::builder(2, 2, alloc::vec![StateId(1)]).gamma(0.9);
        b.transition(StateId(0), ActionId(0), StateId(0), 1.0, FeatureVector(alloc::vec![-0.5]));
        b.transition(StateId(0), ActionId(1), StateId(1), 1.0, FeatureVector::one_hot(1, 0));
        b.transition(StateId(1), ActionId(0), StateId(1), 1.0, FeatureVector::zeros(1));
        b.transition(StateId(1), ActionId(1), StateId(1), 1.0, FeatureVector::zeros(1));
        let env = b.build().unwrap();
        let policy = [ActionId(0), ActionId(0)];
        let (table, residuals) = evaluate_sf(&env, &policy, 1e-13).unwrap();
        assert!((table.get(StateId(0), ActionId(0))[0] - (-0.5 / (1.0 - 0.9))).abs() < 1e-9);
        for pair in residuals.windows(2) {
            assert!(pair[1] <= 0.9 * pair[0] + 1e-15);
        }
    }

    #[test]
    fn learning_on_one_step_chain_matches_terminal_feature() {
        let env = corridor();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = learn_sf_policy(&env, &WeightVector(alloc::vec![1.0]), 4000, &LearnConfig::default(), &mut rng).unwrap();
        assert!((p.table.get(StateId(1), ActionId(0))[0] - 1.0).abs() < 1e-6);
        assert!((p.table.get(StateId(0), ActionId(0))[0] - 0.95).abs() < 1e-3);
    }

    #[test]
    fn learning_rejects_zero_budget() {
        let env = corridor();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(learn_sf_policy(&env, &WeightVector(alloc::vec![1.0]), 0, &LearnConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn divergent_step_size_is_a_numerical_error() {
        let env = corridor();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = LearnConfig {
            alpha: 1e308,
            ..LearnConfig::default()
        };
        let err = learn_sf_policy(&env, &WeightVector(alloc::vec![1.0]), 500, &cfg, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn gpi_prefers_dominating_policy() {
        let env = corridor();
        let mut t1 = SfTable::zeros(3, 2, 1);
        let mut t2 = SfTable::zeros(3, 2, 1);
        t1.get_mut(StateId(0), ActionId(0))[0] = 0.2;
        t1.get_mut(StateId(0), ActionId(1))[0] = 0.3;
        t2.get_mut(StateId(0), ActionId(0))[0] = 0.9;
        let w = WeightVector(alloc::vec![1.0]);
        let p1 = PolicyHandle::new(0, w.clone(), t1, &env);
        let p2 = PolicyHandle::new(1, w.clone(), t2, &env);
        assert_eq!(gpi_action(core::slice::from_ref(&p1), &w, StateId(0)), ActionId(1));
        assert_eq!(gpi_action(&[p1.clone(), p2.clone()], &w, StateId(0)), ActionId(0));
        assert!((gpi_value(&[p1, p2], &w, StateId(0)) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn gpi_ties_go_to_lowest_policy_then_action() {
        let env = corridor();
        let w = WeightVector(alloc::vec![1.0]);
        let mut t = SfTable::zeros(3, 2, 1);
        t.get_mut(StateId(0), ActionId(1))[0] = 0.5;
        let mut u = SfTable::zeros(3, 2, 1);
        u.get_mut(StateId(0), ActionId(0))[0] = 0.5;
        let p0 = PolicyHandle::new(0, w.clone(), t, &env);
        let p1 = PolicyHandle::new(1, w.clone(), u, &env);
        assert_eq!(gpi_action(&[p1, p0], &w, StateId(0)), ActionId(1));
    }
}
