#![allow(dead_code)]

use rand::Rng;

/// Mutates a valid automaton text into one that must fail to parse or
/// validate. `kind` selects the mutation.
pub fn invalid_fsa<R: Rng>(valid: &str, kind: usize, rng: &mut R) -> String {
    let lines: Vec<&str> = valid.lines().collect();
    let edges: Vec<usize> = (0..lines.len()).filter(|&i| lines[i].contains("-->")).collect();
    let pick = edges[rng.random_range(0..edges.len())];
    let mut out: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
    match kind % 10 {
        0 => {
            let (head, _) = lines[pick].rsplit_once("-->").unwrap();
            out[pick] = format!("{head}--> zz{}", rng.random_range(0..1000));
        }
        1 => {
            // Same source and label, different target.
            let (head, to) = lines[pick].rsplit_once("-->").unwrap();
            let other = if to.trim() == "t" { "u0" } else { "t" };
            out.insert(pick + 1, format!("{head}--> {other}"));
        }
        2 => out.retain(|l| !l.starts_with("initial:")),
        3 => {
            let alphabet: Vec<char> = "abcxyz019 _.,;!?()[]{}<>=+*/\\|'\"".chars().collect();
            let len = rng.random_range(1..20);
            let mut junk: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
            if junk.trim().is_empty() {
                junk.push('x');
            }
            let at = rng.random_range(0..=out.len());
            out.insert(at, junk);
        }
        4 => out.push("t --o--> u0".into()),
        5 => out.push(format!("u0 --undeclared{}--> t", rng.random_range(0..1000))),
        6 => {
            let directive = out.iter().find(|l| l.contains(':') && !l.starts_with('#')).unwrap().clone();
            let at = rng.random_range(0..=out.len());
            out.insert(at, directive);
        }
        7 => out[pick] = lines[pick].replacen("-->", "->", 1),
        8 => {
            for l in out.iter_mut().filter(|l| l.starts_with("initial:")) {
                *l = "initial: t".into();
            }
        }
        _ => out.retain(|l| !l.trim_end().ends_with("--> t")),
    }
    out.join("\n") + "\n"
}

/// Mutates a valid layout text into one that must fail to load.
pub fn invalid_layout<R: Rng>(valid: &str, kind: usize, rng: &mut R) -> String {
    let mut out: Vec<String> = valid.lines().map(String::from).collect();
    let rows: Vec<usize> = (0..out.len())
        .filter(|&i| !out[i].contains('=') && !out[i].starts_with(';') && !out[i].starts_with("exit ") && !out[i].starts_with("wall "))
        .collect();
    let r = rows[rng.random_range(0..rows.len())];
    match kind % 6 {
        0 => {
            let bad = ['x', '@', '%', 'q', '~'][rng.random_range(0..5)];
            let mut chars: Vec<char> = out[r].chars().collect();
            let at = rng.random_range(0..chars.len());
            chars[at] = bad;
            out[r] = chars.into_iter().collect();
        }
        1 => {
            if rng.random_bool(0.5) {
                out[r].push('.');
            } else {
                out[r].pop();
            }
        }
        2 => {
            let exit = out.iter().position(|l| l.starts_with("exit ")).unwrap();
            let dup = out[exit].clone();
            out.insert(exit + 1, dup);
        }
        3 => {
            let exit = out.iter().position(|l| l.starts_with("exit ")).unwrap();
            out.remove(exit);
        }
        4 => out.retain(|l| l.contains('=') || l.starts_with(';') || l.starts_with("exit ") || l.starts_with("wall ")),
        _ => out.insert(0, format!("width={}", rng.random_range(100..200))),
    }
    out.join("\n") + "\n"
}
