#![allow(dead_code)]

use sfplan_core::fsa::ProductMdp;
use sfplan_core::{ActionId, EnvModel, StateId};

/// In-place value iteration on scalar rewards `w · φ`; returns `Q[s][a]`.
pub fn scalar_q(env: &EnvModel, w: &[f64]) -> Vec<Vec<f64>> {
    let (n, m) = (env.num_states(), env.num_actions());
    let mut v = vec![0.0; n];
    let mut q = vec![vec![0.0; m]; n];
    loop {
        let mut delta: f64 = 0.0;
        for s in 0..n {
            for a in 0..m {
                let mut acc = 0.0;
                for t in env.transitions(StateId(s), ActionId(a)) {
                    let r: f64 = w.iter().zip(env.feature(t.feature).iter()).map(|(x, y)| x * y).sum();
                    let boot = if !env.is_exit(StateId(s)) && env.is_exit(t.next) { 0.0 } else { v[t.next.0] };
                    acc += t.prob * (r + env.gamma() * boot);
                }
                q[s][a] = acc;
            }
            let best = q[s].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - v[s]).abs());
            v[s] = best;
        }
        let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if delta < 1e-13 * scale {
            return q;
        }
    }
}

pub fn scalar_v(env: &EnvModel, w: &[f64]) -> Vec<f64> {
    scalar_q(env, w)
        .into_iter()
        .map(|row| row.into_iter().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// In-place value iteration over a product MDP's outcome lists.
pub fn product_v(p: &ProductMdp) -> Vec<f64> {
    let n = p.num_states();
    let mut v = vec![0.0; n];
    loop {
        let mut delta: f64 = 0.0;
        for x in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..p.num_actions() {
                let mut q = 0.0;
                for o in p.outcomes(x, ActionId(a)) {
                    q += o.prob * (o.reward + if o.terminal { 0.0 } else { o.discount * v[o.next] });
                }
                best = best.max(q);
            }
            delta = delta.max((best - v[x]).abs());
            v[x] = best;
        }
        let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if delta < 1e-13 * scale {
            return v;
        }
    }
}

/// Breadth-first distances on a deterministic model from `source`,
/// ignoring transitions that carry a negative feature component.
pub fn bfs(env: &EnvModel, source: StateId) -> Vec<Option<usize>> {
    let mut dist = vec![None; env.num_states()];
    dist[source.0] = Some(0);
    let mut queue = std::collections::VecDeque::from([source]);
    while let Some(s) = queue.pop_front() {
        if s != source && env.is_exit(s) {
            continue;
        }
        for a in 0..env.num_actions() {
            for t in env.transitions(s, ActionId(a)) {
                if env.feature(t.feature).iter().any(|&x| x < 0.0) {
                    continue;
                }
                if dist[t.next.0].is_none() {
                    dist[t.next.0] = Some(dist[s.0].unwrap() + 1);
                    queue.push_back(t.next);
                }
            }
        }
    }
    dist
}

/// Uniform sample from the simplex by normalised exponentials.
pub fn simplex_sample<R: rand::Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..d).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// Fewest steps from `(initial, start)` to an accepting automaton state on
/// a deterministic model, avoiding negatively featured transitions.
pub fn product_bfs(env: &EnvModel, fsa: &sfplan_core::fsa::Fsa, props: &sfplan_core::grid::PropositionMap) -> Option<usize> {
    use sfplan_core::fsa::FsaState;
    let n = env.num_states();
    let start = env.start()?;
    let mut seen = vec![false; fsa.num_states() * n];
    let mut queue = std::collections::VecDeque::from([(fsa.initial(), start, 0usize)]);
    seen[fsa.initial().0 * n + start.0] = true;
    while let Some((u, s, d)) = queue.pop_front() {
        for a in 0..env.num_actions() {
            for t in env.transitions(s, ActionId(a)) {
                if env.feature(t.feature).iter().any(|&x| x < 0.0) {
                    continue;
                }
                let mut v: FsaState = u;
                if env.is_terminal_transition(s, t.next) {
                    v = fsa.tau_exit(u, props, env.exit_slot(t.next).unwrap());
                    if fsa.is_terminal(v) {
                        return Some(d + 1);
                    }
                }
                let k = v.0 * n + t.next.0;
                if !seen[k] {
                    seen[k] = true;
                    queue.push_back((v, t.next, d + 1));
                }
            }
        }
    }
    None
}
