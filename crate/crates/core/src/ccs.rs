//! Convex coverage set construction by optimistic linear support over
//! successor features.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{contract, Error, Result};
use crate::linalg;
use crate::lp;
use crate::mdp::{EnvModel, FeatureVector, WeightVector};
use crate::sf::{learn_sf_policy, solve_sf_exact, LearnConfig, PolicyHandle};
use crate::util::{dot, max_abs_diff};

/// Default iteration cap of [`sfols`].
pub const DEFAULT_MAX_ITERATIONS: usize = 200;
/// Default priority at or below which a queued weight is not worth solving.
pub const DEFAULT_MIN_PRIORITY: f64 = 1e-6;
/// Simplex membership and corner deduplication tolerance.
pub const WEIGHT_TOL: f64 = 1e-9;

/// LP optima within this of the set-max value count as no improvement.
const LP_ROUNDING: f64 = 1e-12;

/// Produces a policy for a given weight vector.
pub trait PolicySolver {
    fn solve(&mut self, w: &WeightVector) -> Result<PolicyHandle>;
    /// Max-norm distance under which two expected SF vectors are the same.
    fn novelty_tol(&self) -> f64;
}

/// Optimal policies by value iteration plus exact SF evaluation.
#[derive(Debug, Clone)]
pub struct ExactSolver<'a> {
    pub env: &'a EnvModel,
    pub tol: f64,
}

impl<'a> ExactSolver<'a> {
    pub fn new(env: &'a EnvModel) -> Self {
        Self { env, tol: 1e-12 }
    }
}

impl PolicySolver for ExactSolver<'_> {
    fn solve(&mut self, w: &WeightVector) -> Result<PolicyHandle> {
        solve_sf_exact(self.env, w, self.tol)
    }

    fn novelty_tol(&self) -> f64 {
        1e-9
    }
}

/// Policies learned by SF Q-learning with a fixed step budget each.
pub struct SamplingSolver<'a, R: Rng> {
    pub env: &'a EnvModel,
    pub budget: usize,
    pub config: LearnConfig,
    pub rng: R,
    /// Environment steps consumed so far.
    pub steps: usize,
}

impl<'a, R: Rng> SamplingSolver<'a, R> {
    pub fn new(env: &'a EnvModel, budget: usize, config: LearnConfig, rng: R) -> Self {
        Self {
            env,
            budget,
            config,
            rng,
            steps: 0,
        }
    }
}

impl<R: Rng> PolicySolver for SamplingSolver<'_, R> {
    fn solve(&mut self, w: &WeightVector) -> Result<PolicyHandle> {
        let p = learn_sf_policy(self.env, w, self.budget, &self.config, &mut self.rng)?;
        self.steps += self.budget;
        Ok(p)
    }

    fn novelty_tol(&self) -> f64 {
        1e-3
    }
}

/// One solver call made by [`sfols`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveRecord {
    pub weight: WeightVector,
    pub priority: f64,
    /// Index of the policy this call added, if its SFs were new.
    pub added: Option<usize>,
}

/// A convex coverage set: policies with their expected SF vectors and
/// the weights visited while building it.
#[derive(Debug, Clone, PartialEq)]
pub struct Ccs {
    pub policies: Vec<PolicyHandle>,
    /// Visited weights with the set-max value attained there.
    pub visited: Vec<(WeightVector, f64)>,
    pub log: Vec<SolveRecord>,
}

impl Ccs {
    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn psis(&self) -> Vec<FeatureVector> {
        self.policies.iter().map(|p| p.mean_sf.clone()).collect()
    }

    /// The set restricted to policies added by the first `calls` solver calls.
    pub fn prefix(&self, calls: usize) -> Vec<PolicyHandle> {
        self.log
            .iter()
            .take(calls)
            .filter_map(|r| r.added)
            .map(|i| self.policies[i].clone())
            .collect()
    }
}

/// `max_ψ w·ψ` over `psis`; `-∞` for an empty set.
pub fn smp_value(psis: &[FeatureVector], w: &[f64]) -> f64 {
    psis.iter().map(|p| dot(w, p)).fold(f64::NEG_INFINITY, f64::max)
}

/// Optimistic improvement at `w`: the LP bound `max w·ψ` subject to
/// `w'·ψ ≤ v'` for each visited `(w', v')` and `ψ ∈ [lo, hi]^d`, minus the
/// current set-max value, floored at zero (and rounded to zero within
/// LP round-off).
pub fn estimate_improvement(
    w: &WeightVector,
    psis: &[FeatureVector],
    visited: &[(WeightVector, f64)],
    bounds: (f64, f64),
) -> Result<f64> {
    if visited.is_empty() {
        return Err(contract("improvement estimate needs at least one visited weight"));
    }
    let d = w.len();
    let a: Vec<Vec<f64>> = visited.iter().map(|(v, _)| v.0.clone()).collect();
    let b: Vec<f64> = visited.iter().map(|(_, val)| *val).collect();
    let sol = lp::maximize_boxed(w, &a, &b, &vec![bounds.0; d], &vec![bounds.1; d])
        .map_err(|e| Error::Numerical(format!("improvement LP failed: {e}")))?;
    let delta = sol.objective - smp_value(psis, w);
    Ok(if delta <= LP_ROUNDING { 0.0 } else { delta })
}

fn combinations(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        if idx[i] == i + n - k {
            return;
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

enum Boundary<'a> {
    Hyperplane(&'a FeatureVector),
    Face(usize),
}

/// New corner weights created by adding `psi_new` to `psis`, searched
/// among the hyperplanes and simplex faces relevant to the weights made
/// obsolete by it (`deleted`, which includes the popped weight).
pub fn corner_weights(
    psi_new: &FeatureVector,
    w_popped: &WeightVector,
    psis: &[FeatureVector],
    deleted: &[WeightVector],
) -> Vec<WeightVector> {
    let d = psi_new.len();
    let mut relevant: Vec<&FeatureVector> = Vec::new();
    for w in deleted {
        let best = smp_value(psis, w);
        for p in psis {
            if dot(w, p) >= best - WEIGHT_TOL && !relevant.iter().any(|q| core::ptr::eq(*q, p)) {
                relevant.push(p);
            }
        }
    }
    let mut constraints: Vec<Boundary> = relevant.into_iter().map(Boundary::Hyperplane).collect();
    for k in 0..d {
        if deleted.iter().any(|w| w[k].abs() <= WEIGHT_TOL) {
            constraints.push(Boundary::Face(k));
        }
    }

    let mut corners: Vec<WeightVector> = Vec::new();
    combinations(constraints.len(), d - 1, |subset| {
        let mut a = Vec::with_capacity(d);
        for &c in subset {
            a.push(match constraints[c] {
                Boundary::Hyperplane(p) => psi_new.iter().zip(p.iter()).map(|(x, y)| x - y).collect(),
                Boundary::Face(k) => {
                    let mut row = vec![0.0; d];
                    row[k] = 1.0;
                    row
                }
            });
        }
        a.push(vec![1.0; d]);
        let mut b = vec![0.0; d];
        b[d - 1] = 1.0;
        let Some(mut x) = linalg::solve(a, b, 1e-12) else {
            return;
        };
        if x.iter().any(|&v| v < -WEIGHT_TOL) {
            return;
        }
        x.iter_mut().for_each(|v| *v = v.max(0.0));
        let total: f64 = x.iter().sum();
        x.iter_mut().for_each(|v| *v /= total);
        let w = WeightVector(x);
        if dot(&w, psi_new) < smp_value(psis, &w) - WEIGHT_TOL {
            return;
        }
        if max_abs_diff(&w, w_popped) <= WEIGHT_TOL || corners.iter().any(|c| max_abs_diff(c, &w) <= WEIGHT_TOL) {
            return;
        }
        corners.push(w);
    });
    corners
}

/// Options for [`sfols`].
#[derive(Debug, Clone, PartialEq)]
pub struct SfolsConfig {
    pub min_priority: f64,
    pub max_iterations: usize,
}

impl Default for SfolsConfig {
    fn default() -> Self {
        Self {
            min_priority: DEFAULT_MIN_PRIORITY,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// Builds a convex coverage set by optimistic linear support: solve the
/// highest-priority queued weight, keep the policy if its expected SFs are
/// new and improve on the set there, and queue the corner weights it
/// creates with LP-estimated improvements as priorities.
pub fn sfols<S: PolicySolver + ?Sized>(env: &EnvModel, solver: &mut S, cfg: &SfolsConfig) -> Result<Ccs> {
    if !(cfg.min_priority >= 0.0) {
        return Err(contract("minimum priority must be non-negative"));
    }
    let d = env.dim();
    if d == 0 {
        return Err(contract("environment has no exit states"));
    }
    let bounds = env.psi_bounds();
    let novelty = solver.novelty_tol();
    let mut queue: Vec<(WeightVector, f64)> = (0..d).map(|k| (WeightVector::extremum(d, k), f64::INFINITY)).collect();
    let mut ccs = Ccs {
        policies: Vec::new(),
        visited: Vec::new(),
        log: Vec::new(),
    };
    let mut psis: Vec<FeatureVector> = Vec::new();

    while !queue.is_empty() {
        let top = (0..queue.len())
            .fold(0, |best, i| if queue[i].1 > queue[best].1 { i } else { best });
        if queue[top].1 <= cfg.min_priority {
            break;
        }
        if ccs.log.len() >= cfg.max_iterations {
            return Err(Error::CapExceeded(cfg.max_iterations));
        }
        let (w, priority) = queue.remove(top);
        let mut handle = solver.solve(&w)?;
        let value = handle.value(&w);
        let before = smp_value(&psis, &w);
        let is_new = psis.iter().all(|p| max_abs_diff(p, &handle.mean_sf) > novelty) && value > before + novelty;
        ccs.visited.push((w.clone(), value.max(before)));

        let mut added = None;
        if is_new {
            let mut deleted = vec![w.clone()];
            queue.retain(|(q, _)| {
                if dot(q, &handle.mean_sf) > smp_value(&psis, q) {
                    deleted.push(q.clone());
                    false
                } else {
                    true
                }
            });
            let corners = corner_weights(&handle.mean_sf, &w, &psis, &deleted);
            handle.id = ccs.policies.len();
            psis.push(handle.mean_sf.clone());
            added = Some(handle.id);
            ccs.policies.push(handle);
            for c in corners {
                let seen = ccs.visited.iter().any(|(v, _)| max_abs_diff(v, &c) <= WEIGHT_TOL)
                    || queue.iter().any(|(q, _)| max_abs_diff(q, &c) <= WEIGHT_TOL);
                if seen {
                    continue;
                }
                let p = estimate_improvement(&c, &psis, &ccs.visited, bounds)?;
                if p > cfg.min_priority {
                    queue.push((c, p));
                }
            }
        }
        ccs.log.push(SolveRecord {
            weight: w,
            priority,
            added,
        });
    }
    Ok(ccs)
}
