//! The family-of-MDPs abstraction: shared dynamics, rewards linear in a
//! per-transition feature vector whose components are indexed by exit states.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use rand::Rng;

use crate::error::{contract, Result};
use crate::util::{dot, sample_index};

/// Index of a low-level state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

/// Index into an environment's action set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub usize);

/// Transition features, one component per exit state.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

/// Reward weights over exit states.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(pub Vec<f64>);

impl FeatureVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn one_hot(dim: usize, index: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[index] = 1.0;
        Self(v)
    }

    pub fn splat(dim: usize, value: f64) -> Self {
        Self(vec![value; dim])
    }

    pub fn is_one_hot_at(&self, index: usize) -> bool {
        self.0
            .iter()
            .enumerate()
            .all(|(j, &x)| if j == index { x == 1.0 } else { x == 0.0 })
    }
}

impl WeightVector {
    /// The `index`-th corner of the standard simplex.
    pub fn extremum(dim: usize, index: usize) -> Self {
        Self(FeatureVector::one_hot(dim, index).0)
    }

    pub fn uniform(dim: usize) -> Self {
        Self(vec![1.0 / dim as f64; dim])
    }

    pub fn is_in_simplex(&self, tol: f64) -> bool {
        let sum: f64 = self.0.iter().sum();
        self.0.iter().all(|&x| x >= -tol) && (sum - 1.0).abs() <= tol
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }
}

impl Deref for FeatureVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for WeightVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<Vec<f64>> for WeightVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Scalar reward `w · φ`.
pub fn reward(w: &WeightVector, phi: &FeatureVector) -> Result<f64> {
    if w.len() != phi.len() {
        return Err(contract(format!(
            "weight dimension {} does not match feature dimension {}",
            w.len(),
            phi.len()
        )));
    }
    Ok(dot(w, phi))
}

/// One possible successor of a state-action pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next: StateId,
    pub prob: f64,
    /// Index into [`EnvModel::features`].
    pub feature: usize,
}

/// A tabular member of a family of MDPs that share everything but the
/// reward weights.
///
/// A transition `(s, a, s')` is terminal iff `s` is not an exit state and
/// `s'` is. Exit states are ordinary states when an episode starts in them,
/// so every state, exits included, has outgoing transitions.
#[derive(Debug, Clone)]
pub struct EnvModel {
    num_states: usize,
    num_actions: usize,
    exits: Vec<StateId>,
    exit_slot: Vec<Option<usize>>,
    initial: Vec<f64>,
    reference: Vec<f64>,
    start: Option<StateId>,
    offsets: Vec<usize>,
    transitions: Vec<Transition>,
    features: Vec<FeatureVector>,
    gamma: f64,
}

impl EnvModel {
    pub fn builder(num_states: usize, num_actions: usize, exits: Vec<StateId>) -> EnvBuilder {
        EnvBuilder {
            num_states,
            num_actions,
            exits,
            initial: None,
            reference: None,
            start: None,
            gamma: 0.95,
            outcomes: vec![Vec::new(); num_states * num_actions],
            features: Vec::new(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Feature dimension, equal to the number of exit states.
    pub fn dim(&self) -> usize {
        self.exits.len()
    }

    pub fn exits(&self) -> &[StateId] {
        &self.exits
    }

    /// Position of `s` in the exit list, if it is an exit.
    pub fn exit_slot(&self, s: StateId) -> Option<usize> {
        self.exit_slot.get(s.0).copied().flatten()
    }

    pub fn is_exit(&self, s: StateId) -> bool {
        self.exit_slot(s).is_some()
    }

    /// Whether arriving in `s_next` can end an episode.
    pub fn is_terminal(&self, s_next: StateId) -> bool {
        self.is_exit(s_next)
    }

    pub fn is_terminal_transition(&self, s: StateId, s_next: StateId) -> bool {
        !self.is_exit(s) && self.is_exit(s_next)
    }

    /// Restart distribution of learning episodes.
    pub fn initial_dist(&self) -> &[f64] {
        &self.initial
    }

    /// Distribution over which expected successor features `ψ̄` are taken
    /// when policies are compared. Defaults to the initial distribution.
    pub fn reference_dist(&self) -> &[f64] {
        &self.reference
    }

    /// Designated start cell used for evaluation rollouts.
    pub fn start(&self) -> Option<StateId> {
        self.start
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(contract(format!("discount {gamma} outside [0, 1)")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn transitions(&self, s: StateId, a: ActionId) -> &[Transition] {
        let k = s.0 * self.num_actions + a.0;
        &self.transitions[self.offsets[k]..self.offsets[k + 1]]
    }

    /// The distinct feature vectors used by this environment.
    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    pub fn feature(&self, id: usize) -> &FeatureVector {
        &self.features[id]
    }

    /// `φ(s, a, s')`, if `s'` is a possible successor.
    pub fn feature_of(&self, s: StateId, a: ActionId, s_next: StateId) -> Option<&FeatureVector> {
        self.transitions(s, a)
            .iter()
            .find(|t| t.next == s_next)
            .map(|t| &self.features[t.feature])
    }

    pub fn is_deterministic(&self) -> bool {
        (0..self.num_states * self.num_actions).all(|k| self.offsets[k + 1] - self.offsets[k] == 1)
    }

    /// Largest absolute feature component.
    pub fn phi_max(&self) -> f64 {
        self.features
            .iter()
            .flat_map(|f| f.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Componentwise bounds every successor-feature vector satisfies.
    pub fn psi_bounds(&self) -> (f64, f64) {
        (-self.phi_max() / (1.0 - self.gamma), 1.0)
    }

    /// Scalarisation of a non-terminal feature under uniform weights
    /// scaled to unit mass per component: the mean component. Baselines
    /// that work with scalar rewards use it as a per-step penalty.
    pub fn step_penalty(&self, feature: usize) -> f64 {
        let f = &self.features[feature];
        if f.is_empty() {
            0.0
        } else {
            f.iter().sum::<f64>() / f.len() as f64
        }
    }

    fn check_state(&self, s: StateId) -> Result<()> {
        if s.0 >= self.num_states {
            return Err(contract(format!("state {} out of range", s.0)));
        }
        Ok(())
    }

    pub fn check_action(&self, a: ActionId) -> Result<()> {
        if a.0 >= self.num_actions {
            return Err(contract(format!("action {} out of range", a.0)));
        }
        Ok(())
    }

    /// Draws `s' ~ P(·|s, a)` and returns it with `φ(s, a, s')`.
    pub fn sample_transition<R: Rng + ?Sized>(
        &self,
        s: StateId,
        a: ActionId,
        rng: &mut R,
    ) -> Result<(StateId, &FeatureVector)> {
        self.check_state(s)?;
        self.check_action(a)?;
        let ts = self.transitions(s, a);
        let t = if ts.len() == 1 {
            ts[0]
        } else {
            ts[sample_index(ts.iter().map(|t| t.prob), rng)]
        };
        Ok((t.next, &self.features[t.feature]))
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> StateId {
        StateId(sample_index(self.initial.iter().copied(), rng))
    }
}

/// Incremental constructor for [`EnvModel`]; `build` validates the model.
#[derive(Debug, Clone)]
pub struct EnvBuilder {
    num_states: usize,
    num_actions: usize,
    exits: Vec<StateId>,
    initial: Option<Vec<f64>>,
    reference: Option<Vec<f64>>,
    start: Option<StateId>,
    gamma: f64,
    outcomes: Vec<Vec<(StateId, f64, usize)>>,
    features: Vec<FeatureVector>,
}

impl EnvBuilder {
    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn initial(mut self, dist: Vec<f64>) -> Self {
        self.initial = Some(dist);
        self
    }

    pub fn reference(mut self, dist: Vec<f64>) -> Self {
        self.reference = Some(dist);
        self
    }

    pub fn start(mut self, s: StateId) -> Self {
        self.start = Some(s);
        self
    }

    fn intern(&mut self, phi: FeatureVector) -> usize {
        if let Some(i) = self.features.iter().position(|f| *f == phi) {
            return i;
        }
        self.features.push(phi);
        self.features.len() - 1
    }

    /// Adds probability mass `prob` for `s -a-> next` with feature `phi`.
    /// Repeated successors are merged.
    pub fn transition(&mut self, s: StateId, a: ActionId, next: StateId, prob: f64, phi: FeatureVector) -> &mut Self {
        let id = self.intern(phi);
        let slot = &mut self.outcomes[s.0 * self.num_actions + a.0];
        match slot.iter_mut().find(|(n, _, f)| *n == next && *f == id) {
            Some(entry) => entry.1 += prob,
            None => slot.push((next, prob, id)),
        }
        self
    }

    pub fn build(self) -> Result<EnvModel> {
        let EnvBuilder {
            num_states,
            num_actions,
            exits,
            initial,
            reference,
            start,
            gamma,
            outcomes,
            features,
        } = self;
        if num_actions == 0 || num_states == 0 {
            return Err(contract("environment needs at least one state and one action"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(contract(format!("discount {gamma} outside [0, 1)")));
        }
        let dim = exits.len();
        let mut exit_slot = vec![None; num_states];
        for (i, e) in exits.iter().enumerate() {
            if e.0 >= num_states {
                return Err(contract(format!("exit state {} out of range", e.0)));
            }
            if exit_slot[e.0].replace(i).is_some() {
                return Err(contract(format!("exit state {} listed twice", e.0)));
            }
        }
        for f in &features {
            if f.len() != dim {
                return Err(contract(format!("feature of dimension {} in a {}-exit environment", f.len(), dim)));
            }
        }
        let initial = initial.unwrap_or_else(|| vec![1.0 / num_states as f64; num_states]);
        if initial.len() != num_states {
            return Err(contract("initial distribution has the wrong length"));
        }
        if (initial.iter().sum::<f64>() - 1.0).abs() > 1e-9 || initial.iter().any(|&p| p < 0.0) {
            return Err(contract("initial distribution is not a probability distribution"));
        }
        let reference = reference.unwrap_or_else(|| initial.clone());
        if reference.len() != num_states {
            return Err(contract("reference distribution has the wrong length"));
        }
        if (reference.iter().sum::<f64>() - 1.0).abs() > 1e-9 || reference.iter().any(|&p| p < 0.0) {
            return Err(contract("reference distribution is not a probability distribution"));
        }
        for e in &exits {
            if initial[e.0] <= 0.0 {
                return Err(contract(format!("exit state {} has zero initial probability", e.0)));
            }
        }
        if let Some(s) = start {
            if s.0 >= num_states {
                return Err(contract("start state out of range"));
            }
        }
        let mut offsets = Vec::with_capacity(outcomes.len() + 1);
        let mut transitions = Vec::new();
        offsets.push(0);
        for (k, slot) in outcomes.into_iter().enumerate() {
            let (s, a) = (k / num_actions, k % num_actions);
            if slot.is_empty() {
                return Err(contract(format!("no transitions defined for state {s}, action {a}")));
            }
            let total: f64 = slot.iter().map(|(_, p, _)| p).sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(contract(format!("transition probabilities of ({s}, {a}) sum to {total}")));
            }
            for (next, prob, feature) in slot {
                if next.0 >= num_states {
                    return Err(contract(format!("successor {} out of range", next.0)));
                }
                let phi = &features[feature];
                if exit_slot[s].is_none() {
                    if let Some(i) = exit_slot[next.0] {
                        if !phi.is_one_hot_at(i) {
                            return Err(contract(format!(
                                "terminal transition ({s}, {a}, {}) must carry the one-hot feature of exit {i}",
                                next.0
                            )));
                        }
                        transitions.push(Transition { next, prob, feature });
                        continue;
                    }
                }
                // Non-terminal: w·φ < 1 for every simplex weight iff every component is < 1.
                if phi.iter().any(|&x| x >= 1.0) {
                    return Err(contract(format!("non-terminal transition ({s}, {a}, {}) has a feature component >= 1", next.0)));
                }
                transitions.push(Transition { next, prob, feature });
            }
            offsets.push(transitions.len());
        }
        Ok(EnvModel {
            num_states,
            num_actions,
            exits,
            exit_slot,
            initial,
            reference,
            start,
            offsets,
            transitions,
            features,
            gamma,
        })
    }
}
