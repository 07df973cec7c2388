//! Automaton text format.
//!
//! ```text
//! # comment
//! states: u0 u1
//! initial: u0
//! terminal: t
//! propositions: coffee o
//! u0 --coffee--> u1
//! u1 --o--> t
//! ```
//!
//! `states:` lists the non-terminal states, `terminal:` the accepting
//! ones. `propositions:` is optional; when present every edge label must
//! belong to it.

use std::fmt::Write as _;

use sfplan_core::fsa::{Fsa, FsaError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FsaParseErrorKind {
    #[error("directive `{0}` given twice")]
    DuplicateDirective(String),
    #[error("`initial:` takes exactly one state")]
    BadInitial,
    #[error("malformed edge, expected `from --proposition--> to`")]
    BadEdge,
    #[error("unrecognised line")]
    Unrecognised,
    #[error(transparent)]
    Structure(#[from] FsaError),
}

/// Parse failure with a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {col}: {kind}")]
pub struct FsaParseError {
    pub line: usize,
    pub col: usize,
    pub kind: FsaParseErrorKind,
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_')
}

fn parse_edge(line: &str) -> Option<(&str, &str, &str)> {
    let (from, rest) = line.split_once("--")?;
    let (prop, to) = rest.split_once("-->")?;
    let (from, prop, to) = (from.trim(), prop.trim(), to.trim());
    (is_name(from) && is_name(prop) && is_name(to)).then_some((from, prop, to))
}

/// Parses and validates an automaton.
pub fn parse_fsa<'a>(text: &'a str) -> Result<Fsa, FsaParseError> {
    let mut states: Option<(usize, Vec<&str>)> = None;
    let mut terminals: Option<(usize, Vec<&str>)> = None;
    let mut initial: Option<(usize, &str)> = None;
    let mut props: Option<(usize, Vec<String>)> = None;
    let mut edges: Vec<(usize, (&str, &str, &str))> = Vec::new();
    let mut last_line = 1;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        last_line = line_no;
        let col = raw.len() - raw.trim_start().len() + 1;
        let fail = |kind| FsaParseError { line: line_no, col, kind };
        let list = |rest: &'a str| -> Result<Vec<&'a str>, FsaParseError> {
            let names: Vec<&str> = rest.split_whitespace().collect();
            if names.iter().all(|n| is_name(n)) {
                Ok(names)
            } else {
                Err(FsaParseError { line: line_no, col, kind: FsaParseErrorKind::Unrecognised })
            }
        };
        if let Some((key, rest)) = line.split_once(':') {
            let dup = FsaParseErrorKind::DuplicateDirective(key.trim().into());
            match key.trim() {
                "states" => {
                    if states.replace((line_no, list(rest)?)).is_some() {
                        return Err(fail(dup));
                    }
                }
                "terminal" => {
                    if terminals.replace((line_no, list(rest)?)).is_some() {
                        return Err(fail(dup));
                    }
                }
                "propositions" => {
                    let names = list(rest)?.into_iter().map(String::from).collect();
                    if props.replace((line_no, names)).is_some() {
                        return Err(fail(dup));
                    }
                }
                "initial" => {
                    let names = list(rest)?;
                    if names.len() != 1 {
                        return Err(fail(FsaParseErrorKind::BadInitial));
                    }
                    if initial.replace((line_no, names[0])).is_some() {
                        return Err(fail(dup));
                    }
                }
                _ => return Err(fail(FsaParseErrorKind::Unrecognised)),
            }
        } else if line.contains("--") {
            edges.push((line_no, parse_edge(line).ok_or_else(|| fail(FsaParseErrorKind::BadEdge))?));
        } else {
            return Err(fail(FsaParseErrorKind::Unrecognised));
        }
    }
    let edge_list: Vec<(&str, &str, &str)> = edges.iter().map(|e| e.1).collect();
    let state_names = states.as_ref().map(|s| s.1.clone()).unwrap_or_default();
    let terminal_names = terminals.as_ref().map(|s| s.1.clone()).unwrap_or_default();
    Fsa::new(&state_names, &terminal_names, initial.map(|i| i.1), props.as_ref().map(|p| p.1.clone()), &edge_list).map_err(|e| {
        let line = match &e {
            FsaError::UnknownState { edge: Some(k), .. }
            | FsaError::UnknownProposition { edge: k, .. }
            | FsaError::Nondeterministic { edge: k, .. } => edges[*k].0,
            FsaError::UnknownState { edge: None, .. } | FsaError::TerminalIsInitial(_) | FsaError::MissingInitial => {
                initial.map_or(last_line, |i| i.0)
            }
            FsaError::TerminalHasEdges(name) => edges.iter().find(|e| e.1 .0 == name).map_or(last_line, |e| e.0),
            FsaError::TerminalOverlap(_) => terminals.as_ref().map_or(last_line, |t| t.0),
            FsaError::DuplicateState(_) | FsaError::NoStates => states.as_ref().map_or(last_line, |s| s.0),
            FsaError::UnreachableTerminal => last_line,
        };
        FsaParseError { line, col: 1, kind: e.into() }
    })
}

/// Writes an automaton in the text format; [`parse_fsa`] inverts it.
pub fn serialize_fsa(fsa: &Fsa) -> String {
    let names = |it: &mut dyn Iterator<Item = sfplan_core::fsa::FsaState>| it.map(|u| fsa.name(u).to_string()).collect::<Vec<_>>().join(" ");
    let mut out = String::new();
    let _ = writeln!(out, "states: {}", names(&mut fsa.nonterminal()));
    let _ = writeln!(out, "initial: {}", fsa.name(fsa.initial()));
    let _ = writeln!(out, "terminal: {}", names(&mut fsa.terminals()));
    if let Some(p) = fsa.declared_propositions() {
        let _ = writeln!(out, "propositions: {}", p.join(" "));
    }
    for e in fsa.edges() {
        let _ = writeln!(out, "{} --{}--> {}", fsa.name(e.from), e.proposition, fsa.name(e.to));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SEQ: &str = "# two steps\nstates: u0 u1\ninitial: u0\nterminal: t\nu0 --a--> u1\nu1 --b--> t # done\n";

    #[test]
    fn parses_with_comments() {
        let fsa = parse_fsa(SEQ).unwrap();
        assert_eq!(fsa.num_nonterminal(), 2);
        assert_eq!(fsa.edges().len(), 2);
        assert_eq!(fsa.propositions(), vec!["a", "b"]);
    }

    #[test]
    fn round_trips() {
        let fsa = parse_fsa(SEQ).unwrap();
        assert_eq!(parse_fsa(&serialize_fsa(&fsa)).unwrap(), fsa);
    }

    #[test]
    fn reports_edge_lines() {
        let e = parse_fsa("states: u0\ninitial: u0\nterminal: t\nu0 --a--> t\nu0 --a--> u0\n").unwrap_err();
        assert_eq!(e.line, 5);
        assert!(matches!(e.kind, FsaParseErrorKind::Structure(FsaError::Nondeterministic { .. })));
        let e = parse_fsa("states: u0\ninitial: u0\nterminal: t\nu0 --a-> t\n").unwrap_err();
        assert_eq!((e.line, e.kind), (4, FsaParseErrorKind::BadEdge));
        let e = parse_fsa("states: u0\nterminal: t\nu0 --a--> t\n").unwrap_err();
        assert_eq!(e.kind, FsaParseErrorKind::Structure(FsaError::MissingInitial));
        let e = parse_fsa("states: u0\ninitial: u0\nterminal: t\npropositions: a\nu0 --b--> t\n").unwrap_err();
        assert_eq!(e.line, 5);
    }
}
