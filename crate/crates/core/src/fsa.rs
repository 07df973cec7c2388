//! Finite state automata over exit propositions and the product MDP they
//! induce with an environment.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, Result};
use crate::grid::PropositionMap;
use crate::mdp::{ActionId, EnvModel, StateId};

/// Index of an automaton state. Non-terminal states come first, so
/// `FsaState(i)` with `i < num_nonterminal()` is in `U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FsaState(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: FsaState,
    pub proposition: String,
    pub to: FsaState,
}

/// Structural errors. `edge` fields index the edge list given to
/// [`Fsa::new`] so that a parser can report the offending line.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FsaError {
    #[error("no initial state declared")]
    MissingInitial,
    #[error("no states declared")]
    NoStates,
    #[error("state `{0}` declared twice")]
    DuplicateState(String),
    #[error("state `{0}` is both terminal and non-terminal")]
    TerminalOverlap(String),
    #[error("initial state `{0}` is terminal")]
    TerminalIsInitial(String),
    #[error("unknown state `{name}`")]
    UnknownState { name: String, edge: Option<usize> },
    #[error("unknown proposition `{name}`")]
    UnknownProposition { name: String, edge: usize },
    #[error("state `{state}` has two transitions on `{proposition}`")]
    Nondeterministic { state: String, proposition: String, edge: usize },
    #[error("terminal state `{0}` has outgoing transitions")]
    TerminalHasEdges(String),
    #[error("no terminal state is reachable from the initial state")]
    UnreachableTerminal,
}

/// A deterministic automaton with 0/1 terminal reward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fsa {
    names: Vec<String>,
    num_nonterminal: usize,
    initial: FsaState,
    edges: Vec<Edge>,
    propositions: Option<Vec<String>>,
    next: BTreeMap<(usize, String), FsaState>,
}

impl Fsa {
    /// Validates and builds an automaton. `propositions`, when given, is
    /// the declared alphabet every edge label must belong to. Edges are
    /// `(from, proposition, to)` by state name.
    pub fn new(
        states: &[&str],
        terminals: &[&str],
        initial: Option<&str>,
        propositions: Option<Vec<String>>,
        edges: &[(&str, &str, &str)],
    ) -> core::result::Result<Fsa, FsaError> {
        if states.is_empty() && terminals.is_empty() {
            return Err(FsaError::NoStates);
        }
        let initial = initial.ok_or(FsaError::MissingInitial)?;
        let mut seen = BTreeSet::new();
        for s in states.iter().chain(terminals) {
            if !seen.insert(*s) {
                return Err(if states.contains(s) && terminals.contains(s) {
                    FsaError::TerminalOverlap((*s).to_string())
                } else {
                    FsaError::DuplicateState((*s).to_string())
                });
            }
        }
        let names: Vec<String> = states.iter().chain(terminals).map(|s| (*s).to_string()).collect();
        let index = |name: &str, edge: Option<usize>| {
            names
                .iter()
                .position(|n| n == name)
                .map(FsaState)
                .ok_or_else(|| FsaError::UnknownState {
                    name: name.to_string(),
                    edge,
                })
        };
        let initial = index(initial, None)?;
        if initial.0 >= states.len() {
            return Err(FsaError::TerminalIsInitial(names[initial.0].clone()));
        }
        let mut next = BTreeMap::new();
        let mut out = Vec::with_capacity(edges.len());
        for (k, &(from, prop, to)) in edges.iter().enumerate() {
            let f = index(from, Some(k))?;
            let t = index(to, Some(k))?;
            if let Some(alphabet) = &propositions {
                if !alphabet.iter().any(|p| p == prop) {
                    return Err(FsaError::UnknownProposition {
                        name: prop.to_string(),
                        edge: k,
                    });
                }
            }
            if f.0 >= states.len() {
                return Err(FsaError::TerminalHasEdges(from.to_string()));
            }
            if next.insert((f.0, prop.to_string()), t).is_some() {
                return Err(FsaError::Nondeterministic {
                    state: from.to_string(),
                    proposition: prop.to_string(),
                    edge: k,
                });
            }
            out.push(Edge {
                from: f,
                proposition: prop.to_string(),
                to: t,
            });
        }
        let fsa = Fsa {
            names,
            num_nonterminal: states.len(),
            initial,
            edges: out,
            propositions,
            next,
        };
        if !fsa.reachable_from(fsa.initial).iter().any(|u| fsa.is_terminal(*u)) {
            return Err(FsaError::UnreachableTerminal);
        }
        Ok(fsa)
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    /// `|U|`, the non-terminal states.
    pub fn num_nonterminal(&self) -> usize {
        self.num_nonterminal
    }

    pub fn nonterminal(&self) -> impl Iterator<Item = FsaState> {
        (0..self.num_nonterminal).map(FsaState)
    }

    pub fn terminals(&self) -> impl Iterator<Item = FsaState> + '_ {
        (self.num_nonterminal..self.names.len()).map(FsaState)
    }

    pub fn initial(&self) -> FsaState {
        self.initial
    }

    pub fn is_terminal(&self, u: FsaState) -> bool {
        u.0 >= self.num_nonterminal
    }

    pub fn name(&self, u: FsaState) -> &str {
        &self.names[u.0]
    }

    pub fn state(&self, name: &str) -> Option<FsaState> {
        self.names.iter().position(|n| n == name).map(FsaState)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn declared_propositions(&self) -> Option<&[String]> {
        self.propositions.as_deref()
    }

    /// Distinct edge labels in first-use order.
    pub fn propositions(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.edges {
            if !out.contains(&e.proposition.as_str()) {
                out.push(&e.proposition);
            }
        }
        out
    }

    /// Successor after observing `valuation`; unlabeled moves stay put.
    pub fn tau(&self, u: FsaState, valuation: Option<&str>) -> FsaState {
        match valuation {
            Some(p) => self.next.get(&(u.0, p.to_string())).copied().unwrap_or(u),
            None => u,
        }
    }

    /// The automaton state after reaching `exit` from `u`, where `exit`
    /// is an index into the environment's exit list.
    pub fn tau_exit(&self, u: FsaState, props: &PropositionMap, exit: usize) -> FsaState {
        self.tau(u, Some(props.label(exit)))
    }

    fn reachable_from(&self, start: FsaState) -> BTreeSet<FsaState> {
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for e in self.edges.iter().filter(|e| e.from == u) {
                if seen.insert(e.to) {
                    queue.push_back(e.to);
                }
            }
        }
        seen
    }
}

/// Findings of [`validate`]; only unsatisfiable propositions are errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    UnsatisfiableProposition(String),
    UnreachableState(String),
    DeadEnd(String),
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        matches!(self, Diagnostic::UnsatisfiableProposition(_))
    }
}

impl core::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Diagnostic::UnsatisfiableProposition(p) => write!(f, "error: unsatisfiable proposition {p}"),
            Diagnostic::UnreachableState(u) => write!(f, "warning: unreachable state {u}"),
            Diagnostic::DeadEnd(u) => write!(f, "warning: no terminal reachable from state {u}"),
        }
    }
}

/// Checks the automaton against an environment's propositions.
pub fn validate(fsa: &Fsa, props: &PropositionMap) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for p in fsa.propositions() {
        if props.slots_of(p).is_empty() {
            out.push(Diagnostic::UnsatisfiableProposition(p.to_string()));
        }
    }
    let reachable = fsa.reachable_from(fsa.initial);
    for u in (0..fsa.num_states()).map(FsaState) {
        if !reachable.contains(&u) {
            out.push(Diagnostic::UnreachableState(fsa.name(u).to_string()));
        } else if !fsa.is_terminal(u) && !fsa.reachable_from(u).iter().any(|v| fsa.is_terminal(*v)) {
            out.push(Diagnostic::DeadEnd(fsa.name(u).to_string()));
        }
    }
    out
}

/// One outcome of a product transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductOutcome {
    /// Product index `u · |S| + s` of the successor; meaningless when
    /// `terminal`.
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
    /// Factor applied to the successor's value: `γ` for ordinary steps and
    /// 1 when an exit hands control to the next automaton state.
    pub discount: f64,
    pub terminal: bool,
}

/// The product of an automaton with an environment over `U × S`.
///
/// Entering an exit from a non-exit state advances the automaton by the
/// exit's proposition. Reaching a terminal automaton state pays 1 and ends
/// the episode; otherwise the episode continues from the exit cell with
/// reward 0 and no discount. All other steps pay the environment's scalar
/// step penalty and are discounted by `γ`.
#[derive(Debug, Clone)]
pub struct ProductMdp {
    num_u: usize,
    num_s: usize,
    num_actions: usize,
    offsets: Vec<usize>,
    outcomes: Vec<ProductOutcome>,
}

impl ProductMdp {
    pub fn num_states(&self) -> usize {
        self.num_u * self.num_s
    }

    pub fn num_fsa_states(&self) -> usize {
        self.num_u
    }

    pub fn num_env_states(&self) -> usize {
        self.num_s
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn index(&self, u: FsaState, s: StateId) -> usize {
        u.0 * self.num_s + s.0
    }

    pub fn split(&self, x: usize) -> (FsaState, StateId) {
        (FsaState(x / self.num_s), StateId(x % self.num_s))
    }

    pub fn outcomes(&self, x: usize, a: ActionId) -> &[ProductOutcome] {
        let k = x * self.num_actions + a.0;
        &self.outcomes[self.offsets[k]..self.offsets[k + 1]]
    }

    /// Optimal product values by value iteration, to max-norm change `tol`.
    pub fn value_iteration(&self, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let n = self.num_states();
        let mut v = vec![0.0; n];
        for _ in 0..max_iter {
            let mut delta: f64 = 0.0;
            let mut next = vec![0.0; n];
            for x in 0..n {
                let mut best = f64::NEG_INFINITY;
                for a in 0..self.num_actions {
                    let q: f64 = self
                        .outcomes(x, ActionId(a))
                        .iter()
                        .map(|o| o.prob * (o.reward + if o.terminal { 0.0 } else { o.discount * v[o.next] }))
                        .sum();
                    best = best.max(q);
                }
                delta = delta.max((best - v[x]).abs());
                next[x] = best;
            }
            v = next;
            if !delta.is_finite() {
                return Err(crate::Error::Numerical("product value iteration diverged".into()));
            }
            if delta <= tol {
                return Ok(v);
            }
        }
        Err(crate::Error::Numerical("product value iteration did not converge".into()))
    }
}

/// Builds the product MDP of `fsa` with `env`, labeling exits by `props`.
pub fn build_product(fsa: &Fsa, env: &EnvModel, props: &PropositionMap) -> Result<ProductMdp> {
    if props.labels().len() != env.dim() {
        return Err(contract("proposition map does not cover every exit"));
    }
    let (num_u, num_s, m) = (fsa.num_nonterminal(), env.num_states(), env.num_actions());
    let mut offsets = Vec::with_capacity(num_u * num_s * m + 1);
    let mut outcomes = Vec::new();
    offsets.push(0);
    for u in fsa.nonterminal() {
        for s in 0..num_s {
            for a in 0..m {
                for t in env.transitions(StateId(s), ActionId(a)) {
                    let o = if env.is_terminal_transition(StateId(s), t.next) {
                        let slot = env.exit_slot(t.next).expect("terminal successor is an exit");
                        let u2 = fsa.tau_exit(u, props, slot);
                        if fsa.is_terminal(u2) {
                            ProductOutcome {
                                next: 0,
                                prob: t.prob,
                                reward: 1.0,
                                discount: 0.0,
                                terminal: true,
                            }
                        } else {
                            ProductOutcome {
                                next: u2.0 * num_s + t.next.0,
                                prob: t.prob,
                                reward: 0.0,
                                discount: 1.0,
                                terminal: false,
                            }
                        }
                    } else {
                        ProductOutcome {
                            next: u.0 * num_s + t.next.0,
                            prob: t.prob,
                            reward: env.step_penalty(t.feature),
                            discount: env.gamma(),
                            terminal: false,
                        }
                    };
                    outcomes.push(o);
                }
                offsets.push(outcomes.len());
            }
        }
    }
    Ok(ProductMdp {
        num_u,
        num_s,
        num_actions: m,
        offsets,
        outcomes,
    })
}
