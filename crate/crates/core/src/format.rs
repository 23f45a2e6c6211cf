//! Text formats for multiway-cut instances and bipartite SSBVE instances.
//!
//! Instance files:
//!
//! ```text
//! c optional comment
//! p mwc <n> <m> <k>
//! t <vertex>            (k lines)
//! e <u> <v> <weight>    (m lines)
//! ```
//!
//! Bipartite files: a header `b <k> <n_R> <t>` followed by one line per
//! right vertex listing its left neighbours.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{TerminalSet, WeightedGraph};
use crate::norms::Bipartite;

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices().chain(std::iter::once((line.len(), ' '))) {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token { text: &line[s..i], column: line[..s].chars().count() + 1 });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    out
}

fn number<T: FromStr>(tok: &Token, line: usize, what: &str) -> Result<T> {
    tok.text
        .parse()
        .map_err(|_| Error::parse(line, tok.column, format!("expected {what}, found `{}`", tok.text)))
}

fn expect_arity(toks: &[Token], arity: usize, line: usize, kind: &str) -> Result<()> {
    match toks.len().cmp(&arity) {
        std::cmp::Ordering::Equal => Ok(()),
        std::cmp::Ordering::Less => {
            let col = toks.last().map_or(1, |t| t.column + t.text.chars().count());
            Err(Error::parse(line, col, format!("`{kind}` line needs {} fields", arity - 1)))
        }
        std::cmp::Ordering::Greater => {
            Err(Error::parse(line, toks[arity].column, format!("unexpected trailing field `{}`", toks[arity].text)))
        }
    }
}

fn vertex(tok: &Token, line: usize, n: usize) -> Result<usize> {
    let v: usize = number(tok, line, "a vertex index")?;
    if v == 0 || v > n {
        return Err(Error::parse(line, tok.column, format!("vertex {v} outside 1..={n}")));
    }
    Ok(v)
}

struct Header {
    n: usize,
    m: usize,
    k: usize,
    line: usize,
}

/// Parses an instance, reporting the line and column of the first problem.
pub fn parse_instance(text: &str) -> Result<(WeightedGraph, TerminalSet)> {
    let mut header: Option<Header> = None;
    let mut terminals: Vec<usize> = Vec::new();
    let mut terminal_lines: HashMap<usize, usize> = HashMap::new();
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut edge_lines: HashMap<(usize, usize), usize> = HashMap::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let toks = tokens(raw);
        let Some(first) = toks.first() else { continue };
        match (first.text, &header) {
            ("c", _) => continue,
            ("p", None) => {
                expect_arity(&toks, 5, line, "p")?;
                if toks[1].text != "mwc" {
                    return Err(Error::parse(line, toks[1].column, format!("expected `mwc`, found `{}`", toks[1].text)));
                }
                let n = number(&toks[2], line, "a vertex count")?;
                let m = number(&toks[3], line, "an edge count")?;
                let k: usize = number(&toks[4], line, "a terminal count")?;
                if k < 2 || k > n {
                    return Err(Error::parse(line, toks[4].column, format!("terminal count {k} must lie in 2..={n}")));
                }
                header = Some(Header { n, m, k, line });
            }
            ("p", Some(h)) => {
                return Err(Error::parse(line, first.column, format!("second header (first on line {})", h.line)));
            }
            (_, None) => {
                return Err(Error::parse(line, first.column, format!("expected header `p mwc`, found `{}`", first.text)));
            }
            ("t", Some(h)) => {
                expect_arity(&toks, 2, line, "t")?;
                let v = vertex(&toks[1], line, h.n)?;
                if let Some(prev) = terminal_lines.insert(v, line) {
                    return Err(Error::parse(line, toks[1].column, format!("terminal {v} already declared on line {prev}")));
                }
                if terminals.len() == h.k {
                    return Err(Error::parse(line, first.column, format!("more than {} terminal lines", h.k)));
                }
                terminals.push(v);
            }
            ("e", Some(h)) => {
                expect_arity(&toks, 4, line, "e")?;
                let u = vertex(&toks[1], line, h.n)?;
                let v = vertex(&toks[2], line, h.n)?;
                if u == v {
                    return Err(Error::parse(line, toks[2].column, format!("self-loop at vertex {u}")));
                }
                let w: f64 = number(&toks[3], line, "a weight")?;
                if w.is_nan() || w < 0.0 {
                    return Err(Error::parse(line, toks[3].column, format!("weight must be non-negative, got `{}`", toks[3].text)));
                }
                if let Some(prev) = edge_lines.insert((u.min(v), u.max(v)), line) {
                    return Err(Error::parse(line, first.column, format!("duplicate edge {{{u}, {v}}} (first on line {prev})")));
                }
                if edges.len() == h.m {
                    return Err(Error::parse(line, first.column, format!("more than {} edge lines", h.m)));
                }
                edges.push((u, v, w));
            }
            (other, Some(_)) => {
                return Err(Error::parse(line, first.column, format!("unknown line type `{other}`")));
            }
        }
    }

    let h = header.ok_or_else(|| Error::parse(last_line.max(1), 1, "missing header `p mwc <n> <m> <k>`"))?;
    if terminals.len() != h.k {
        return Err(Error::parse(h.line, 1, format!("header declares {} terminals, found {}", h.k, terminals.len())));
    }
    if edges.len() != h.m {
        return Err(Error::parse(h.line, 1, format!("header declares {} edges, found {}", h.m, edges.len())));
    }
    let graph = WeightedGraph::new(h.n, edges)?;
    let terminals = TerminalSet::new(h.n, terminals)?;
    Ok((graph, terminals))
}

/// Canonical text form; weights use the shortest representation that parses
/// back to the same `f64`.
pub fn write_instance(graph: &WeightedGraph, terminals: &TerminalSet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "p mwc {} {} {}", graph.n(), graph.edges().len(), terminals.k());
    for t in terminals.as_slice() {
        let _ = writeln!(out, "t {t}");
    }
    for e in graph.edges() {
        let _ = writeln!(out, "e {} {} {}", e.u, e.v, e.w);
    }
    out
}

/// Parses `b <k> <n_R> <t>` and the `n_R` neighbourhood lines; blank lines
/// are empty neighbourhoods and `c` lines are comments.
pub fn parse_bipartite(text: &str) -> Result<(Bipartite, usize)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (line, toks) = loop {
        match lines.next() {
            None => return Err(Error::parse(1, 1, "missing header `b <k> <n_R> <t>`")),
            Some((line, raw)) => {
                let toks = tokens(raw);
                match toks.first() {
                    None => continue,
                    Some(t) if t.text == "c" => continue,
                    Some(_) => break (line, toks),
                }
            }
        }
    };
    if toks[0].text != "b" {
        return Err(Error::parse(line, toks[0].column, format!("expected header `b`, found `{}`", toks[0].text)));
    }
    expect_arity(&toks, 4, line, "b")?;
    let k: usize = number(&toks[1], line, "a left size")?;
    let n_r: usize = number(&toks[2], line, "a right size")?;
    let t: usize = number(&toks[3], line, "a target size")?;
    if k < 1 {
        return Err(Error::parse(line, toks[1].column, "left side must be non-empty"));
    }
    if t < 1 || t > k {
        return Err(Error::parse(line, toks[3].column, format!("t = {t} must lie in 1..={k}")));
    }
    let mut neighborhoods = Vec::with_capacity(n_r);
    let mut last = line;
    for (line, raw) in lines {
        last = line;
        let toks = tokens(raw);
        if toks.first().is_some_and(|t| t.text == "c") {
            continue;
        }
        if neighborhoods.len() == n_r {
            if let Some(tok) = toks.first() {
                return Err(Error::parse(line, tok.column, format!("more than {n_r} neighbourhood lines")));
            }
            continue;
        }
        let mut nb = Vec::with_capacity(toks.len());
        for tok in &toks {
            let i: usize = number(tok, line, "a left vertex")?;
            if i == 0 || i > k {
                return Err(Error::parse(line, tok.column, format!("left vertex {i} outside 1..={k}")));
            }
            nb.push(i);
        }
        neighborhoods.push(nb);
    }
    if neighborhoods.len() != n_r {
        return Err(Error::parse(last + 1, 1, format!("expected {n_r} neighbourhood lines, found {}", neighborhoods.len())));
    }
    Ok((Bipartite::new(k, neighborhoods)?, t))
}

pub fn write_bipartite(bip: &Bipartite, t: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "b {} {} {}", bip.left, bip.right(), t);
    for nb in &bip.neighborhoods {
        let line: Vec<String> = nb.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}
