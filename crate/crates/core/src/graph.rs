//! Weighted undirected graphs, vertex sets, cut computations and minimum
//! isolating cuts.
//!
//! Vertices are identified by `1..=n` everywhere in the public API; vertex
//! sets store vertex `v` at bit `v - 1`.

use std::collections::VecDeque;
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker weight for edges that must never be cut. Only produced by
/// [`preprocess_weights`].
pub const INFINITE: f64 = f64::INFINITY;

/// Absolute tolerance used for every floating-point comparison.
pub const TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Undirected graph with non-negative edge weights. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
    // adjacency[v - 1] = [(neighbour, weight)]
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); n];
        let mut out = Vec::with_capacity(edges.len());
        for (u, v, w) in edges {
            if u == 0 || v == 0 || u > n || v > n {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) outside 1..={n}")));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at {u}")));
            }
            if w.is_nan() || w < 0.0 {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) has weight {w}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
            adjacency[u - 1].push((v, w));
            adjacency[v - 1].push((u, w));
            out.push(Edge { u, v, w });
        }
        Ok(WeightedGraph { n, edges: out, adjacency })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v - 1]
    }

    /// Total weight incident to `v`.
    pub fn weighted_degree(&self, v: usize) -> f64 {
        self.adjacency[v - 1].iter().map(|&(_, w)| w).sum()
    }

    pub fn has_infinite_edges(&self) -> bool {
        self.edges.iter().any(|e| e.w.is_infinite())
    }

    pub fn total_finite_weight(&self) -> f64 {
        self.edges.iter().filter(|e| e.w.is_finite()).map(|e| e.w).sum()
    }

    pub fn min_positive_weight(&self) -> Option<f64> {
        self.edges
            .iter()
            .map(|e| e.w)
            .filter(|&w| w > 0.0)
            .min_by(|a, b| a.total_cmp(b))
    }

    pub fn max_finite_weight(&self) -> Option<f64> {
        self.edges
            .iter()
            .map(|e| e.w)
            .filter(|w| w.is_finite() && *w > 0.0)
            .max_by(|a, b| a.total_cmp(b))
    }

    /// Copy of the graph with every INFINITE weight replaced by
    /// `total_finite_weight + 1`, together with that replacement value.
    pub fn capped(&self) -> (WeightedGraph, f64) {
        let big = self.total_finite_weight() + 1.0;
        let edges = self
            .edges
            .iter()
            .map(|e| (e.u, e.v, if e.w.is_finite() { e.w } else { big }))
            .collect();
        (WeightedGraph::new(self.n, edges).expect("capping preserves validity"), big)
    }

    /// The whole vertex set.
    pub fn all_vertices(&self) -> VertexSet {
        VertexSet::full(self.n)
    }
}

/// Ordered list of distinct terminal vertices `t_1..t_k`, `k >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminalSet {
    terminals: Vec<usize>,
}

impl TerminalSet {
    pub fn new(n: usize, terminals: Vec<usize>) -> Result<Self> {
        if terminals.len() < 2 {
            return Err(Error::InvalidTerminals(format!(
                "need at least 2 terminals, got {}",
                terminals.len()
            )));
        }
        let mut seen = vec![false; n + 1];
        for &t in &terminals {
            if t == 0 || t > n {
                return Err(Error::InvalidTerminals(format!("terminal {t} outside 1..={n}")));
            }
            if seen[t] {
                return Err(Error::InvalidTerminals(format!("terminal {t} repeated")));
            }
            seen[t] = true;
        }
        Ok(TerminalSet { terminals })
    }

    pub fn k(&self) -> usize {
        self.terminals.len()
    }

    /// Terminal `t_i` for `1 <= i <= k`.
    pub fn get(&self, i: usize) -> usize {
        self.terminals[i - 1]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.terminals
    }

    /// Index `i` with `t_i == v`, if `v` is a terminal.
    pub fn index_of(&self, v: usize) -> Option<usize> {
        self.terminals.iter().position(|&t| t == v).map(|p| p + 1)
    }

    pub fn to_set(&self, n: usize) -> VertexSet {
        VertexSet::from_vertices(n, self.terminals.iter().copied())
    }
}

/// Subset of `1..=n`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct VertexSet {
    bits: FixedBitSet,
}

impl VertexSet {
    pub fn empty(n: usize) -> Self {
        VertexSet { bits: FixedBitSet::with_capacity(n) }
    }

    pub fn full(n: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(n);
        bits.insert_range(..);
        VertexSet { bits }
    }

    pub fn from_vertices(n: usize, vertices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n);
        for v in vertices {
            s.insert(v);
        }
        s
    }

    /// Set whose members are the 1-bits of `mask` (bit `i` is vertex `i + 1`).
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Self::from_vertices(n, (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1))
    }

    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn insert(&mut self, v: usize) {
        self.bits.insert(v - 1);
    }

    pub fn remove(&mut self, v: usize) {
        self.bits.set(v - 1, false);
    }

    pub fn contains(&self, v: usize) -> bool {
        v >= 1 && self.bits.contains(v - 1)
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones().map(|i| i + 1)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn union_with(&mut self, other: &VertexSet) {
        self.bits.union_with(&other.bits);
    }

    pub fn difference_with(&mut self, other: &VertexSet) {
        self.bits.difference_with(&other.bits);
    }

    pub fn intersect_with(&mut self, other: &VertexSet) {
        self.bits.intersect_with(&other.bits);
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        let mut s = self.clone();
        s.union_with(other);
        s
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        let mut s = self.clone();
        s.difference_with(other);
        s
    }

    pub fn intersection(&self, other: &VertexSet) -> VertexSet {
        let mut s = self.clone();
        s.intersect_with(other);
        s
    }

    pub fn complement(&self) -> VertexSet {
        let mut s = self.clone();
        s.bits.toggle_range(..);
        s
    }

    pub fn is_disjoint(&self, other: &VertexSet) -> bool {
        self.bits.is_disjoint(&other.bits)
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.bits.is_subset(&other.bits)
    }

    /// Number of members that are terminals.
    pub fn terminal_count(&self, terminals: &TerminalSet) -> usize {
        terminals.as_slice().iter().filter(|&&t| self.contains(t)).count()
    }

    /// Sum of `measure[v - 1]` over members.
    pub fn measure(&self, measure: &[f64]) -> f64 {
        self.iter().map(|v| measure[v - 1]).sum()
    }
}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Disjoint family of vertex sets, optionally labeled by terminal index.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub parts: Vec<VertexSet>,
    /// `labels[i]` is the terminal index (1-based) owned by `parts[i]`.
    pub labels: Option<Vec<usize>>,
}

impl Partition {
    pub fn unlabeled(parts: Vec<VertexSet>) -> Self {
        Partition { parts, labels: None }
    }

    /// Part `i` (0-based) is labeled with terminal `i + 1`.
    pub fn labeled(parts: Vec<VertexSet>) -> Self {
        let labels = (1..=parts.len()).collect();
        Partition { parts, labels: Some(labels) }
    }

    /// `assignment[v - 1]` is the 0-based part of vertex `v`.
    pub fn from_assignment(n: usize, k: usize, assignment: &[usize]) -> Self {
        let mut parts = vec![VertexSet::empty(n); k];
        for (i, &p) in assignment.iter().enumerate() {
            parts[p].insert(i + 1);
        }
        Partition::labeled(parts)
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Pairwise disjoint and covering all of `1..=n`.
    pub fn is_partition_of(&self, n: usize) -> bool {
        let mut seen = VertexSet::empty(n);
        for p in &self.parts {
            if p.universe() != n || !p.is_disjoint(&seen) {
                return false;
            }
            seen.union_with(p);
        }
        seen.len() == n
    }

    /// Complete partition with exactly `k` parts where part `i` holds exactly
    /// one terminal, namely `t_i`.
    pub fn check_terminal_labeled(&self, n: usize, terminals: &TerminalSet) -> Result<()> {
        if !self.is_partition_of(n) {
            return Err(Error::Invariant("parts are not a partition of V".into()));
        }
        if self.parts.len() != terminals.k() {
            return Err(Error::Invariant(format!(
                "expected {} parts, got {}",
                terminals.k(),
                self.parts.len()
            )));
        }
        for (i, part) in self.parts.iter().enumerate() {
            let label = self.labels.as_ref().map_or(i + 1, |l| l[i]);
            if part.terminal_count(terminals) != 1 || !part.contains(terminals.get(label)) {
                return Err(Error::Invariant(format!("part {} does not hold exactly t_{label}", i + 1)));
            }
        }
        Ok(())
    }

    pub fn cut_vector(&self, graph: &WeightedGraph) -> CutVector {
        CutVector(self.parts.iter().map(|p| boundary_weight(graph, p)).collect())
    }

    /// 0-based part index of every vertex; `None` for uncovered vertices.
    pub fn assignment(&self, n: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n];
        for (i, p) in self.parts.iter().enumerate() {
            for v in p.iter() {
                out[v - 1] = Some(i);
            }
        }
        out
    }
}

/// `(δ(P_1), …, δ(P_k))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutVector(pub Vec<f64>);

impl CutVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Total weight of edges with exactly one endpoint in `set`.
pub fn boundary_weight(graph: &WeightedGraph, set: &VertexSet) -> f64 {
    graph
        .edges
        .iter()
        .filter(|e| set.contains(e.u) != set.contains(e.v))
        .map(|e| e.w)
        .sum()
}

/// Total weight of edges between disjoint sets `a` and `b`.
pub fn cross_weight(graph: &WeightedGraph, a: &VertexSet, b: &VertexSet) -> Result<f64> {
    if !a.is_disjoint(b) {
        return Err(Error::Overlapping);
    }
    Ok(graph
        .edges
        .iter()
        .filter(|e| (a.contains(e.u) && b.contains(e.v)) || (a.contains(e.v) && b.contains(e.u)))
        .map(|e| e.w)
        .sum())
}

/// Minimum cut separating `t_i` from all other terminals.
///
/// The other terminals are merged into one sink and a maximum flow is pushed
/// from `t_i`; the returned set is the source side of the residual graph,
/// i.e. the inclusion-minimal minimum isolating cut. INFINITE edges carry
/// capacity `total_finite_weight + 1`; when every isolating cut has to cross
/// one of them the reported cost is [`INFINITE`].
pub fn min_isolating_cut(
    graph: &WeightedGraph,
    terminals: &TerminalSet,
    i: usize,
) -> Result<(VertexSet, f64)> {
    let k = terminals.k();
    if i == 0 || i > k {
        return Err(Error::InvalidArgument(format!("terminal index {i} outside 1..={k}")));
    }
    let n = graph.n();
    let (capped, big) = graph.capped();
    let sink = n;
    let mut net = FlowNetwork::new(n + 1);
    for e in capped.edges() {
        net.add_undirected(e.u - 1, e.v - 1, e.w);
    }
    let source = terminals.get(i) - 1;
    let sink_cap = capped.total_finite_weight() + 1.0;
    for (j, &t) in terminals.as_slice().iter().enumerate() {
        if j + 1 != i {
            net.add_directed(t - 1, sink, sink_cap);
        }
    }
    net.max_flow(source, sink);
    let side = net.source_side(source);
    let set = VertexSet::from_vertices(n, (0..n).filter(|&v| side[v]).map(|v| v + 1));
    let cost = boundary_weight(&capped, &set);
    let cost = if graph.has_infinite_edges() && cost >= big - TOL { INFINITE } else { cost };
    Ok((set, cost))
}

/// Weight transformation used to bound the max/min weight ratio by `n² / eps`.
///
/// `w' = 0` below `eps * W / n²`, `w' = w` up to and including `W`, and
/// `w' = INFINITE` strictly above `W`.
pub fn preprocess_weights(graph: &WeightedGraph, scale: f64, eps: f64) -> Result<WeightedGraph> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!("weight scale must be positive, got {scale}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    let n = graph.n() as f64;
    let floor = eps * scale / (n * n);
    let edges = graph
        .edges()
        .iter()
        .map(|e| {
            let w = if e.w < floor {
                0.0
            } else if e.w > scale {
                INFINITE
            } else {
                e.w
            };
            (e.u, e.v, w)
        })
        .collect();
    WeightedGraph::new(graph.n(), edges)
}

/// Sorted distinct positive edge weights: the candidates for the largest
/// weight cut by an optimal solution.
pub fn guess_weight_scales(graph: &WeightedGraph) -> Vec<f64> {
    let mut ws: Vec<f64> = graph
        .edges()
        .iter()
        .map(|e| e.w)
        .filter(|&w| w > 0.0 && w.is_finite())
        .collect();
    ws.sort_by(|a, b| a.total_cmp(b));
    ws.dedup();
    ws
}

/// True when `max finite weight / min positive weight > n² / eps`.
pub fn weight_ratio_exceeds(graph: &WeightedGraph, eps: f64) -> bool {
    match (graph.max_finite_weight(), graph.min_positive_weight()) {
        (Some(hi), Some(lo)) => {
            let n = graph.n() as f64;
            hi / lo > n * n / eps
        }
        _ => false,
    }
}

/// Dinic's algorithm on floating capacities.
struct FlowNetwork {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
    level: Vec<i64>,
    iter: Vec<usize>,
    tol: f64,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        FlowNetwork {
            head: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            level: vec![0; nodes],
            iter: vec![0; nodes],
            tol: 1e-12,
        }
    }

    fn push_arc(&mut self, from: usize, to: usize, cap: f64) {
        self.head[from].push(self.to.len());
        self.to.push(to);
        self.cap.push(cap);
    }

    fn add_directed(&mut self, u: usize, v: usize, cap: f64) {
        self.push_arc(u, v, cap);
        self.push_arc(v, u, 0.0);
        self.tol = self.tol.max(cap * 1e-13);
    }

    fn add_undirected(&mut self, u: usize, v: usize, cap: f64) {
        self.push_arc(u, v, cap);
        self.push_arc(v, u, cap);
        self.tol = self.tol.max(cap * 1e-13);
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        let mut queue = VecDeque::new();
        self.level[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &a in &self.head[u] {
                let v = self.to[a];
                if self.cap[a] > self.tol && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }

    fn dfs(&mut self, u: usize, t: usize, limit: f64) -> f64 {
        if u == t {
            return limit;
        }
        while self.iter[u] < self.head[u].len() {
            let a = self.head[u][self.iter[u]];
            let v = self.to[a];
            if self.cap[a] > self.tol && self.level[v] == self.level[u] + 1 {
                let pushed = self.dfs(v, t, limit.min(self.cap[a]));
                if pushed > self.tol {
                    self.cap[a] -= pushed;
                    self.cap[a ^ 1] += pushed;
                    return pushed;
                }
            }
            self.iter[u] += 1;
        }
        0.0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return flow;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= self.tol {
                    break;
                }
                flow += f;
            }
        }
    }

    fn source_side(&mut self, s: usize) -> Vec<bool> {
        self.bfs(s);
        self.level.iter().map(|&l| l >= 0).collect()
    }
}
