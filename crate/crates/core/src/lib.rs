//! Tabular successor-feature machinery for composing a learned policy basis
//! into optimal solutions of automaton-specified tasks.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation over in-memory models: environments, successor-feature
//! learning and evaluation, convex-coverage-set construction, automaton
//! products, the exit-state planner and the two comparison baselines.
//! File formats, IO and the command line live in the `sfplan` crate.

#![no_std]

extern crate alloc;

pub mod baselines;
pub mod ccs;
pub mod error;
pub mod fsa;
pub mod grid;
mod linalg;
pub mod lp;
pub mod mdp;
pub mod planner;
pub mod sf;
mod util;

pub use error::{Error, Result};
pub use mdp::{reward, ActionId, EnvModel, FeatureVector, StateId, WeightVector};
