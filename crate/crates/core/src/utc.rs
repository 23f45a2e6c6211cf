//! Unbalanced Terminal Cut: find `S` with `|S ∩ T| <= 1` and
//! `μ(S) >= ρ·μ(V)` minimizing `δ(S)`.
//!
//! Two backends: exhaustive enumeration (exact, `n <= 22`) and a greedy
//! region-growing heuristic that guarantees `μ(S) >= (ρ/4)·μ(V)`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{boundary_weight, min_isolating_cut, TerminalSet, VertexSet, WeightedGraph};

/// Largest `n` handled by the exact backend.
pub const EXACT_CAP: usize = 22;

/// Measure slack guaranteed by the heuristic backend.
pub const HEURISTIC_MEASURE_FACTOR: f64 = 0.25;

const COST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UtcBackend {
    Exact,
    Heuristic,
}

impl UtcBackend {
    /// Fraction of `ρ·μ(V)` the backend's output is guaranteed to reach.
    pub fn measure_factor(self) -> f64 {
        match self {
            UtcBackend::Exact => 1.0,
            UtcBackend::Heuristic => HEURISTIC_MEASURE_FACTOR,
        }
    }
}

impl fmt::Display for UtcBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UtcBackend::Exact => "exact",
            UtcBackend::Heuristic => "heuristic",
        })
    }
}

/// Backend selector as given on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UtcSelect {
    Exact,
    Heuristic,
    Auto,
}

impl UtcSelect {
    pub fn resolve(self, n: usize) -> UtcBackend {
        match self {
            UtcSelect::Exact => UtcBackend::Exact,
            UtcSelect::Heuristic => UtcBackend::Heuristic,
            UtcSelect::Auto if n <= EXACT_CAP => UtcBackend::Exact,
            UtcSelect::Auto => UtcBackend::Heuristic,
        }
    }
}

impl FromStr for UtcSelect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(UtcSelect::Exact),
            "heuristic" => Ok(UtcSelect::Heuristic),
            "auto" => Ok(UtcSelect::Auto),
            other => Err(Error::UnknownTag(other.to_string())),
        }
    }
}

impl fmt::Display for UtcSelect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UtcSelect::Exact => "exact",
            UtcSelect::Heuristic => "heuristic",
            UtcSelect::Auto => "auto",
        })
    }
}

/// `utc_backend(tag)` on a graph with `n` vertices.
pub fn utc_backend(tag: &str, n: usize) -> Result<UtcBackend> {
    Ok(tag.parse::<UtcSelect>()?.resolve(n))
}

#[derive(Debug, Clone, Copy)]
pub struct UtcInstance<'a> {
    pub graph: &'a WeightedGraph,
    pub measure: &'a [f64],
    pub rho: f64,
    pub terminals: &'a TerminalSet,
}

impl UtcInstance<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.measure.len() != self.graph.n() {
            return Err(Error::DimensionMismatch { expected: self.graph.n(), got: self.measure.len() });
        }
        if self.measure.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidArgument("measure must be finite and non-negative".into()));
        }
        if !(self.measure.iter().sum::<f64>() > 0.0) {
            return Err(Error::InvalidArgument("total measure must be positive".into()));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidArgument(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtcSolution {
    pub set: VertexSet,
    pub cost: f64,
    pub measure: f64,
    pub backend: &'static str,
}

/// `measure >= factor·ρ·total` with a relative slack of `1e-12`.
pub fn meets_measure(measure: f64, total: f64, rho: f64, factor: f64) -> bool {
    measure + 1e-12 * total >= factor * rho * total
}

pub fn solve_utc_exact(inst: &UtcInstance) -> Result<UtcSolution> {
    inst.validate()?;
    let ctx = UtcContext::new(inst.graph, inst.terminals, UtcBackend::Exact)?;
    ctx.solve_batch(inst.measure, &[inst.rho]).pop().expect("one result per rho")
}

pub fn solve_utc_heuristic(inst: &UtcInstance) -> Result<UtcSolution> {
    inst.validate()?;
    let ctx = UtcContext::new(inst.graph, inst.terminals, UtcBackend::Heuristic)?;
    ctx.solve_batch(inst.measure, &[inst.rho]).pop().expect("one result per rho")
}

pub fn solve_utc(backend: UtcBackend, inst: &UtcInstance) -> Result<UtcSolution> {
    match backend {
        UtcBackend::Exact => solve_utc_exact(inst),
        UtcBackend::Heuristic => solve_utc_heuristic(inst),
    }
}

/// Per-graph state shared by many UTC calls with different measures and
/// `ρ` values.
pub struct UtcContext<'a> {
    graph: &'a WeightedGraph,
    terminals: &'a TerminalSet,
    backend: UtcBackend,
    capped: WeightedGraph,
    isolating: Vec<VertexSet>,
}

impl<'a> UtcContext<'a> {
    pub fn new(graph: &'a WeightedGraph, terminals: &'a TerminalSet, backend: UtcBackend) -> Result<Self> {
        if backend == UtcBackend::Exact && graph.n() > EXACT_CAP {
            return Err(Error::TooLarge { n: graph.n(), cap: EXACT_CAP });
        }
        let isolating = match backend {
            UtcBackend::Exact => Vec::new(),
            UtcBackend::Heuristic => (1..=terminals.k())
                .map(|i| min_isolating_cut(graph, terminals, i).map(|(s, _)| s))
                .collect::<Result<_>>()?,
        };
        let (capped, _) = graph.capped();
        Ok(UtcContext { graph, terminals, backend, capped, isolating })
    }

    pub fn backend(&self) -> UtcBackend {
        self.backend
    }

    /// One result per entry of `rhos`, all against the same measure.
    pub fn solve_batch(&self, measure: &[f64], rhos: &[f64]) -> Vec<Result<UtcSolution>> {
        let total: f64 = measure.iter().sum();
        let check = UtcInstance { graph: self.graph, measure, rho: 1.0, terminals: self.terminals }.validate();
        if let Err(e) = check {
            return rhos.iter().map(|_| Err(e.clone())).collect();
        }
        if let Some(&bad) = rhos.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
            let e = Error::InvalidArgument(format!("rho must lie in (0, 1], got {bad}"));
            return rhos.iter().map(|_| Err(e.clone())).collect();
        }
        let (candidates, tag) = match self.backend {
            UtcBackend::Exact => (self.exact_frontier(measure, total, rhos), "exact"),
            UtcBackend::Heuristic => (self.heuristic_candidates(measure), "heuristic"),
        };
        rhos.iter()
            .map(|&rho| {
                let full = select(&candidates, |m| meets_measure(m, total, rho, 1.0));
                let pick = match (self.backend, full) {
                    (_, Some(c)) => Some(c),
                    (UtcBackend::Heuristic, None) => {
                        select(&candidates, |m| meets_measure(m, total, rho, HEURISTIC_MEASURE_FACTOR))
                    }
                    (UtcBackend::Exact, None) => None,
                };
                match pick {
                    Some(c) => Ok(UtcSolution {
                        cost: boundary_weight(self.graph, &c.set),
                        measure: c.set.measure(measure),
                        set: c.set.clone(),
                        backend: tag,
                    }),
                    None => Err(Error::Infeasible(format!(
                        "no set with at most one terminal reaches measure {}",
                        rho * total
                    ))),
                }
            })
            .collect()
    }

    // Gray-code walk over all 2^n subsets. For every rho the cheapest set
    // meeting its threshold is kept: each subset updates the bucket of the
    // largest threshold it meets, then a suffix minimum spreads it down.
    fn exact_frontier(&self, measure: &[f64], total: f64, rhos: &[f64]) -> Vec<Candidate> {
        let n = self.graph.n();
        let mut order: Vec<usize> = (0..rhos.len()).collect();
        order.sort_by(|&a, &b| rhos[a].total_cmp(&rhos[b]));
        let thresholds: Vec<f64> = order.iter().map(|&i| rhos[i]).collect();

        let tmask: u32 = self.terminals.as_slice().iter().fold(0, |m, &t| m | 1 << (t - 1));
        let half = n / 2;
        let low_sum = subset_sums(&measure[..half]);
        let high_sum = subset_sums(&measure[half..]);
        let low_mask = (1u32 << half) - 1;

        let adj: Vec<Vec<(usize, f64)>> =
            (1..=n).map(|v| self.capped.neighbors(v).iter().map(|&(u, w)| (u - 1, w)).collect()).collect();
        let degree: Vec<f64> = adj.iter().map(|a| a.iter().map(|&(_, w)| w).sum()).collect();
        let mut to_s = vec![0.0; n];

        let mut best: Vec<Option<(f64, u32)>> = vec![None; thresholds.len()];
        let mut mask: u32 = 0;
        let mut cost = 0.0;
        let mut visit = |mask: u32, cost: f64| {
            if (mask & tmask).count_ones() > 1 {
                return;
            }
            let m = low_sum[(mask & low_mask) as usize] + high_sum[(mask >> half) as usize];
            let reach = thresholds.partition_point(|&rho| meets_measure(m, total, rho, 1.0));
            if reach == 0 {
                return;
            }
            let slot = &mut best[reach - 1];
            if slot.is_none_or(|(c, _)| cost < c - COST_TOL) {
                *slot = Some((cost, mask));
            }
        };
        visit(0, 0.0);
        for step in 1u64..(1u64 << n) {
            let v = step.trailing_zeros() as usize;
            let adding = mask & (1 << v) == 0;
            if adding {
                cost += degree[v] - 2.0 * to_s[v];
                mask |= 1 << v;
                for &(u, w) in &adj[v] {
                    to_s[u] += w;
                }
            } else {
                mask &= !(1 << v);
                cost -= degree[v] - 2.0 * to_s[v];
                for &(u, w) in &adj[v] {
                    to_s[u] -= w;
                }
            }
            visit(mask, cost);
        }
        for i in (0..best.len().saturating_sub(1)).rev() {
            if let Some((c_next, m_next)) = best[i + 1] {
                if best[i].is_none_or(|(c, _)| c_next < c - COST_TOL) {
                    best[i] = Some((c_next, m_next));
                }
            }
        }
        let mut out = vec![None; rhos.len()];
        for (pos, &orig) in order.iter().enumerate() {
            out[orig] = best[pos];
        }
        // one candidate per requested rho; each meets its own threshold
        let mut candidates: Vec<Candidate> = out
            .into_iter()
            .flatten()
            .map(|(_, m)| {
                let set = VertexSet::from_mask(n, m as u64);
                Candidate { cost: boundary_weight(&self.capped, &set), measure: set.measure(measure), set }
            })
            .collect();
        candidates.sort_by(|a, b| a.cost.total_cmp(&b.cost));
        candidates
    }

    fn heuristic_candidates(&self, measure: &[f64]) -> Vec<Candidate> {
        let n = self.graph.n();
        let mut sets: Vec<VertexSet> = Vec::new();
        let seeds = self
            .terminals
            .as_slice()
            .iter()
            .copied()
            .chain(heaviest_non_terminal(self.graph, self.terminals));
        for seed in seeds {
            grow(&self.capped, self.terminals, measure, seed, &mut sets);
        }
        sets.extend(self.isolating.iter().cloned());
        let all_terminals = self.terminals.to_set(n);
        for &t in self.terminals.as_slice() {
            let mut s = VertexSet::full(n).difference(&all_terminals);
            s.insert(t);
            sets.push(s);
        }
        let mut by_measure: Vec<usize> = (1..=n).collect();
        by_measure.sort_by(|&a, &b| measure[b - 1].total_cmp(&measure[a - 1]).then(a.cmp(&b)));
        let mut prefix = VertexSet::empty(n);
        let mut has_terminal = false;
        for v in by_measure {
            if self.terminals.index_of(v).is_some() {
                if has_terminal {
                    continue;
                }
                has_terminal = true;
            }
            prefix.insert(v);
            sets.push(prefix.clone());
        }
        let mut candidates: Vec<Candidate> = sets
            .into_iter()
            .map(|set| Candidate { cost: boundary_weight(&self.capped, &set), measure: set.measure(measure), set })
            .collect();
        candidates.sort_by(|a, b| a.cost.total_cmp(&b.cost));
        candidates
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    set: VertexSet,
    cost: f64,
    measure: f64,
}

// Candidates are sorted by cost; the first admissible one wins, with larger
// measure breaking near-ties.
fn select(candidates: &[Candidate], admissible: impl Fn(f64) -> bool) -> Option<&Candidate> {
    let mut best: Option<&Candidate> = None;
    for c in candidates.iter().filter(|c| admissible(c.measure)) {
        match best {
            None => best = Some(c),
            Some(b) if c.cost <= b.cost + COST_TOL => {
                if c.measure > b.measure {
                    best = Some(c);
                }
            }
            Some(_) => break,
        }
    }
    best
}

fn subset_sums(values: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; 1 << values.len()];
    for mask in 1..sums.len() {
        let low = mask.trailing_zeros() as usize;
        sums[mask] = sums[mask & (mask - 1)] + values[low];
    }
    sums
}

fn heaviest_non_terminal(graph: &WeightedGraph, terminals: &TerminalSet) -> Option<usize> {
    (1..=graph.n())
        .filter(|&v| terminals.index_of(v).is_none())
        .max_by(|&a, &b| graph.weighted_degree(a).total_cmp(&graph.weighted_degree(b)).then(b.cmp(&a)))
}

// Greedy growth: repeatedly add the vertex maximizing
// gained measure / (max(boundary increase, 0) + 1), never taking a second
// terminal. Every prefix is recorded.
fn grow(graph: &WeightedGraph, terminals: &TerminalSet, measure: &[f64], seed: usize, out: &mut Vec<VertexSet>) {
    let n = graph.n();
    let mut set = VertexSet::empty(n);
    let mut to_s = vec![0.0; n + 1];
    let mut has_terminal = false;
    let add = |v: usize, set: &mut VertexSet, to_s: &mut Vec<f64>, has_terminal: &mut bool| {
        set.insert(v);
        *has_terminal |= terminals.index_of(v).is_some();
        for &(u, w) in graph.neighbors(v) {
            to_s[u] += w;
        }
    };
    add(seed, &mut set, &mut to_s, &mut has_terminal);
    out.push(set.clone());
    loop {
        let mut pick: Option<(usize, f64, f64)> = None;
        for v in 1..=n {
            if set.contains(v) || (has_terminal && terminals.index_of(v).is_some()) {
                continue;
            }
            let delta = graph.weighted_degree(v) - 2.0 * to_s[v];
            let score = measure[v - 1] / (delta.max(0.0) + 1.0);
            let better = match pick {
                None => true,
                Some((_, s, d)) => score > s + 1e-15 || (score >= s - 1e-15 && delta < d - 1e-15),
            };
            if better {
                pick = Some((v, score, delta));
            }
        }
        match pick {
            Some((v, _, _)) => {
                add(v, &mut set, &mut to_s, &mut has_terminal);
                out.push(set.clone());
            }
            None => break,
        }
    }
}
