//! Bundled layouts and task automata.

use sfplan_core::fsa::Fsa;
use sfplan_core::grid::GridLayout;

use crate::layout::load_layout;
use crate::task::parse_fsa;

pub const OFFICE: &str = include_str!("../fixtures/office.grid");
pub const DELIVERY: &str = include_str!("../fixtures/delivery.grid");
pub const DOUBLE_SLIT: &str = include_str!("../fixtures/double_slit.grid");

/// `(domain, task, text)` for every bundled automaton.
pub const TASKS: [(&str, &str, &str); 7] = [
    ("office", "sequential", include_str!("../fixtures/office_sequential.fsa")),
    ("office", "disjunction", include_str!("../fixtures/office_disjunction.fsa")),
    ("office", "composite", include_str!("../fixtures/office_composite.fsa")),
    ("delivery", "sequential", include_str!("../fixtures/delivery_sequential.fsa")),
    ("delivery", "disjunction", include_str!("../fixtures/delivery_disjunction.fsa")),
    ("delivery", "composite", include_str!("../fixtures/delivery_composite.fsa")),
    ("double_slit", "disjunction", include_str!("../fixtures/double_slit_disjunction.fsa")),
];

pub const DOMAINS: [&str; 3] = ["office", "delivery", "double_slit"];

pub fn layout_text(domain: &str) -> Option<&'static str> {
    match domain {
        "office" => Some(OFFICE),
        "delivery" => Some(DELIVERY),
        "double_slit" => Some(DOUBLE_SLIT),
        _ => None,
    }
}

/// Bundled layout by domain name.
pub fn layout(domain: &str) -> Option<GridLayout> {
    layout_text(domain).map(|t| load_layout(t).expect("bundled layout parses"))
}

pub fn task_text(domain: &str, task: &str) -> Option<&'static str> {
    TASKS.iter().find(|(d, t, _)| *d == domain && *t == task).map(|x| x.2)
}

/// Bundled automaton by domain and task name.
pub fn task(domain: &str, task: &str) -> Option<Fsa> {
    task_text(domain, task).map(|t| parse_fsa(t).expect("bundled task parses"))
}

/// Task names bundled for a domain.
pub fn tasks_of(domain: &str) -> Vec<&'static str> {
    TASKS.iter().filter(|(d, _, _)| *d == domain).map(|x| x.1).collect()
}
