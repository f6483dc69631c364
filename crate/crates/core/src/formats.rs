//! Text formats for wirings and games.
//!
//! Wiring files:
//!
//! ```text
//! bdnf-wiring v1
//! n=3 k=1
//! 0: 1
//! 1: 2
//! 2: 0
//! ```
//!
//! Game files are either a single `uniform <n> <k>` line (optionally
//! followed by a `[penalty]` section) or sections `[budgets]` (n
//! integers), `[weights]` (sparse `v u w` triples), `[allowed]`
//! (`v: t1 t2 ..`, optional) and `[penalty]`. Ids are 0-based. Blank lines
//! and `#` comments are ignored everywhere.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::game::{GameError, GameInstance, PENALTY_FACTOR};
use crate::graph::{GraphError, NodeId, Wiring};

pub const WIRING_HEADER: &str = "bdnf-wiring v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Graph { line: usize, source: GraphError },
    #[error(transparent)]
    Game(#[from] GameError),
}

fn syntax(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Syntax { line, msg: msg.into() }
}

/// Non-empty lines with comments stripped, numbered from 1.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_num<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T, FormatError> {
    tok.parse().map_err(|_| syntax(line, format!("bad number `{tok}`")))
}

pub fn serialize_wiring(w: &Wiring) -> String {
    let mut s = format!("{WIRING_HEADER}\nn={} k={}\n", w.n(), w.k());
    for v in 0..w.n() {
        let _ = write!(s, "{v}:");
        for t in w.targets(v) {
            let _ = write!(s, " {t}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_wiring(text: &str) -> Result<Wiring, FormatError> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, WIRING_HEADER)) => {}
        Some((l, other)) => return Err(syntax(l, format!("expected `{WIRING_HEADER}`, got `{other}`"))),
        None => return Err(syntax(0, "empty file")),
    }
    let (hl, dims) = lines.next().ok_or_else(|| syntax(0, "missing `n=<n> k=<k>` line"))?;
    let (n, k) = match dims.split_whitespace().collect::<Vec<_>>().as_slice() {
        [a, b] => match (a.strip_prefix("n="), b.strip_prefix("k=")) {
            (Some(n), Some(k)) => (parse_num::<usize>(hl, n)?, parse_num::<usize>(hl, k)?),
            _ => return Err(syntax(hl, format!("expected `n=<n> k=<k>`, got `{dims}`"))),
        },
        _ => return Err(syntax(hl, format!("expected `n=<n> k=<k>`, got `{dims}`"))),
    };
    let mut w = Wiring::empty(n, k);
    let mut seen = vec![false; n];
    for (l, line) in lines {
        let (id, rest) = line.split_once(':').ok_or_else(|| syntax(l, format!("expected `<id>: <targets>`, got `{line}`")))?;
        let v: NodeId = parse_num(l, id.trim())?;
        if v >= n {
            return Err(syntax(l, format!("node {v} out of range for n={n}")));
        }
        if std::mem::replace(&mut seen[v], true) {
            return Err(syntax(l, format!("node {v} listed twice")));
        }
        let ts = rest.split_whitespace().map(|t| parse_num(l, t)).collect::<Result<Vec<NodeId>, _>>()?;
        w.set_targets(v, ts).map_err(|source| FormatError::Graph { line: l, source })?;
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(syntax(0, format!("node {v} has no line")));
    }
    Ok(w)
}

pub fn serialize_game(g: &GameInstance) -> String {
    let n = g.n();
    if let Some(k) = g.uniform_k() {
        let mut s = format!("uniform {n} {k}\n");
        if g.penalty() != PENALTY_FACTOR * n as f64 {
            let _ = write!(s, "[penalty]\n{}\n", g.penalty());
        }
        return s;
    }
    let mut s = String::from("[budgets]\n");
    s.push_str(&g.budgets().iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" "));
    s.push_str("\n[weights]\n");
    for v in 0..n {
        for (u, &x) in g.weight_row(v).iter().enumerate() {
            if x != 0.0 {
                let _ = writeln!(s, "{v} {u} {x}");
            }
        }
    }
    if !g.is_symmetric() {
        s.push_str("[allowed]\n");
        for v in 0..n {
            let _ = write!(s, "{v}:");
            for t in g.allowed(v) {
                let _ = write!(s, " {t}");
            }
            s.push('\n');
        }
    }
    let _ = write!(s, "[penalty]\n{}\n", g.penalty());
    s
}

pub fn parse_game(text: &str) -> Result<GameInstance, FormatError> {
    let mut uniform: Option<(usize, usize)> = None;
    let mut section: Option<&str> = None;
    let mut budgets: Vec<usize> = Vec::new();
    let mut triples: Vec<(usize, NodeId, NodeId, f64)> = Vec::new();
    let mut allowed: BTreeMap<NodeId, (usize, Vec<NodeId>)> = BTreeMap::new();
    let mut penalty: Option<f64> = None;
    for (l, line) in content_lines(text) {
        if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            match name {
                "budgets" | "weights" | "allowed" | "penalty" => section = Some(name),
                _ => return Err(syntax(l, format!("unknown section `{name}`"))),
            }
            continue;
        }
        match section {
            None => {
                let parts: Vec<&str> = line.split_whitespace().collect();
                match parts.as_slice() {
                    ["uniform", n, k] if uniform.is_none() => uniform = Some((parse_num(l, n)?, parse_num(l, k)?)),
                    _ => return Err(syntax(l, format!("expected `uniform <n> <k>` or a section, got `{line}`"))),
                }
            }
            Some("budgets") => {
                for tok in line.split_whitespace() {
                    budgets.push(parse_num(l, tok)?);
                }
            }
            Some("weights") => match line.split_whitespace().collect::<Vec<_>>().as_slice() {
                [v, u, x] => triples.push((l, parse_num(l, v)?, parse_num(l, u)?, parse_num(l, x)?)),
                _ => return Err(syntax(l, format!("expected `v u w`, got `{line}`"))),
            },
            Some("allowed") => {
                let (id, rest) =
                    line.split_once(':').ok_or_else(|| syntax(l, format!("expected `<id>: <targets>`, got `{line}`")))?;
                let v: NodeId = parse_num(l, id.trim())?;
                let ts = rest.split_whitespace().map(|t| parse_num(l, t)).collect::<Result<Vec<NodeId>, _>>()?;
                if allowed.insert(v, (l, ts)).is_some() {
                    return Err(syntax(l, format!("node {v} listed twice")));
                }
            }
            Some(_) => {
                if penalty.is_some() {
                    return Err(syntax(l, "penalty given twice"));
                }
                penalty = Some(parse_num(l, line)?);
            }
        }
    }
    if let Some((n, k)) = uniform {
        if !budgets.is_empty() || !triples.is_empty() || !allowed.is_empty() {
            return Err(syntax(0, "a uniform game takes only a [penalty] section"));
        }
        return Ok(GameInstance::uniform_with_penalty(n, k, penalty.unwrap_or(PENALTY_FACTOR * n as f64))?);
    }
    let n = budgets.len();
    if n == 0 {
        return Err(syntax(0, "missing [budgets] section"));
    }
    let mut weights = vec![vec![0.0; n]; n];
    for (l, v, u, x) in triples {
        if v >= n || u >= n {
            return Err(syntax(l, format!("weight ({v}, {u}) out of range for n={n}")));
        }
        weights[v][u] = x;
    }
    let allowed = if allowed.is_empty() {
        None
    } else {
        let mut rows = vec![Vec::new(); n];
        for (v, (l, ts)) in allowed {
            if v >= n {
                return Err(syntax(l, format!("node {v} out of range for n={n}")));
            }
            rows[v] = ts;
        }
        Some(rows)
    };
    let penalty = penalty.unwrap_or(PENALTY_FACTOR * n as f64);
    Ok(GameInstance::new(budgets, weights, allowed, penalty)?)
}
