//! Uncrossing a cover into a partition, aggregating the parts into `k`
//! terminal-labeled parts, and the end-to-end pipelines.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::covering::{
    binary_search_opt, check_dimension, cover_lp, cover_with_rules, isolating_cuts, norm_cover_checks, radius,
    trivial_cut_vector, Cover, GroupRule,
};
use crate::error::{Error, Result};
use crate::graph::{
    boundary_weight, guess_weight_scales, preprocess_weights, weight_ratio_exceeds, CutVector, Partition,
    TerminalSet, VertexSet, WeightedGraph, TOL,
};
use crate::invariant::{ensure_all, InvariantCheck};
use crate::norms::{apply_permutation, compute_index_sets, floor_log2, NormKind, NormSpec};
use crate::utc::{UtcBackend, UtcSelect};

/// One part `P'_i` of an uncrossed partition.
#[derive(Debug, Clone, PartialEq)]
pub struct UncrossedPart {
    pub set: VertexSet,
    /// The source set `Z_i`.
    pub source: VertexSet,
    /// `δ(Z_i)`.
    pub source_cost: f64,
    pub group: Option<usize>,
    /// 1-based index of the terminal inside the part, if any.
    pub terminal: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncrossedPartition {
    pub n: usize,
    /// `P'_1..P'_{m''-1}` in sequence order, empty parts included.
    pub parts: Vec<UncrossedPart>,
    pub residual: VertexSet,
    pub repairs: usize,
    /// `Σ δ(P'_j)` over all parts and the residual, before the loop and after
    /// every repair.
    pub potentials: Vec<f64>,
    /// Lower bound `2(δ(P'_i) - δ(Z_i))` on the potential drop of each repair.
    pub drop_bounds: Vec<f64>,
    /// `δ(P'_i)` for every part.
    pub costs: Vec<f64>,
    pub residual_cost: f64,
}

impl UncrossedPartition {
    pub fn residual_terminal(&self, terminals: &TerminalSet) -> Option<usize> {
        terminals.as_slice().iter().position(|&t| self.residual.contains(t)).map(|i| i + 1)
    }

    /// Disjointness, coverage, the `2δ(Z_i)` bound and the potential drop.
    pub fn checks(&self, terminals: &TerminalSet) -> Vec<InvariantCheck> {
        let mut all: Vec<VertexSet> = self.parts.iter().map(|p| p.set.clone()).collect();
        all.push(self.residual.clone());
        let partition = Partition::unlabeled(all).is_partition_of(self.n);
        let bound = self
            .parts
            .iter()
            .zip(&self.costs)
            .find(|(p, &c)| c > 2.0 * p.source_cost + TOL * (1.0 + p.source_cost));
        let one_terminal = self.parts.iter().all(|p| p.set.terminal_count(terminals) <= 1);
        let drop = self
            .potentials
            .windows(2)
            .zip(&self.drop_bounds)
            .find(|(w, &b)| !(w[0] - w[1] > 0.0 && w[0] - w[1] >= b - TOL * (1.0 + w[0])));
        vec![
            InvariantCheck::new("uncrossing partition", partition, "parts disjoint and covering V"),
            InvariantCheck::new(
                "uncrossing part bound",
                bound.is_none(),
                bound.map_or("every part within 2 delta(Z)".into(), |(p, c)| {
                    format!("{c} > 2 * {}", p.source_cost)
                }),
            ),
            InvariantCheck::new("uncrossing terminals", one_terminal, "each part holds at most one terminal"),
            InvariantCheck::new(
                "uncrossing potential",
                drop.is_none(),
                drop.map_or(format!("{} repairs, potential strictly decreasing", self.repairs), |(w, b)| {
                    format!("potential {} -> {} with required drop {b}", w[0], w[1])
                }),
            ),
        ]
    }
}

struct Source {
    set: VertexSet,
    cost: f64,
    group: Option<usize>,
}

fn potential(graph: &WeightedGraph, parts: &[VertexSet], n: usize) -> (f64, VertexSet, f64) {
    let mut covered = VertexSet::empty(n);
    for p in parts {
        covered.union_with(p);
    }
    let residual = covered.complement();
    let residual_cost = boundary_weight(graph, &residual);
    let sum = parts.iter().map(|p| boundary_weight(graph, p)).sum::<f64>() + residual_cost;
    (sum, residual, residual_cost)
}

fn uncross_sequence(graph: &WeightedGraph, terminals: &TerminalSet, sources: Vec<Source>) -> Result<UncrossedPartition> {
    let n = graph.n();
    let mut parts: Vec<VertexSet> = Vec::with_capacity(sources.len());
    let mut seen = VertexSet::empty(n);
    for s in &sources {
        parts.push(s.set.difference(&seen));
        seen.union_with(&s.set);
    }
    let cap = match graph.min_positive_weight() {
        Some(w) => ((2.0 * graph.total_finite_weight() / w).ceil() as usize).saturating_add(1),
        None => 1,
    };
    let mut potentials = vec![potential(graph, &parts, n).0];
    let mut drop_bounds = Vec::new();
    let mut repairs = 0;
    loop {
        let violating = sources.iter().enumerate().find_map(|(i, s)| {
            let c = boundary_weight(graph, &parts[i]);
            (c > 2.0 * s.cost + TOL * (1.0 + s.cost)).then_some((i, c))
        });
        let Some((i, old_cost)) = violating else { break };
        if repairs >= cap {
            return Err(Error::IterationCap { stage: "uncrossing", cap });
        }
        repairs += 1;
        let z = &sources[i].set;
        for (j, p) in parts.iter_mut().enumerate() {
            if j != i {
                p.difference_with(z);
            }
        }
        parts[i] = z.clone();
        drop_bounds.push(2.0 * (old_cost - sources[i].cost));
        potentials.push(potential(graph, &parts, n).0);
    }
    let (_, residual, residual_cost) = potential(graph, &parts, n);
    let costs = parts.iter().map(|p| boundary_weight(graph, p)).collect();
    let parts = parts
        .into_iter()
        .zip(sources)
        .map(|(set, s)| UncrossedPart {
            terminal: terminals.as_slice().iter().position(|&t| set.contains(t)).map(|i| i + 1),
            set,
            source: s.set,
            source_cost: s.cost,
            group: s.group,
        })
        .collect();
    Ok(UncrossedPartition { n, parts, residual, repairs, potentials, drop_bounds, costs, residual_cost })
}

/// `ceil(12 k ln k)`.
pub fn lp_sample_size(k: usize) -> usize {
    let k = k as f64;
    (12.0 * k * k.ln()).ceil() as usize
}

/// `ceil(9 k ln^2 k)`.
pub fn norm_sample_size(k: usize) -> usize {
    let k = k as f64;
    (9.0 * k * k.ln() * k.ln()).ceil() as usize
}

fn sample(cover: &Cover, size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..cover.sets.len()).collect();
    idx.shuffle(rng);
    idx.truncate(size.min(idx.len()));
    idx
}

/// Samples `min(ceil(12 k ln k), m)` cover sets without replacement in random
/// order and uncrosses them.
pub fn uncross_lp(cover: &Cover, graph: &WeightedGraph, terminals: &TerminalSet, rng: &mut ChaCha8Rng) -> Result<UncrossedPartition> {
    if cover.is_empty() {
        return Err(Error::InvalidArgument("cover is empty".into()));
    }
    let picked = sample(cover, lp_sample_size(terminals.k()), rng);
    let sources = picked
        .into_iter()
        .map(|i| Source { set: cover.sets[i].set.clone(), cost: cover.sets[i].cost, group: cover.sets[i].group })
        .collect();
    uncross_sequence(graph, terminals, sources)
}

/// Isolating cuts first, then `min(ceil(9 k ln^2 k), m)` sampled cover sets
/// in random order.
pub fn uncross_norm(cover: &Cover, graph: &WeightedGraph, terminals: &TerminalSet, rng: &mut ChaCha8Rng) -> Result<UncrossedPartition> {
    let isolating = cover
        .isolating
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("cover carries no isolating cuts".into()))?;
    let picked = sample(cover, norm_sample_size(terminals.k()), rng);
    let sources = isolating
        .iter()
        .map(|(set, cost)| Source { set: set.clone(), cost: *cost, group: None })
        .chain(picked.into_iter().map(|i| Source {
            set: cover.sets[i].set.clone(),
            cost: cover.sets[i].cost,
            group: cover.sets[i].group,
        }))
        .collect();
    uncross_sequence(graph, terminals, sources)
}

/// A `k`-partition produced by aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregated {
    pub partition: Partition,
    pub cut_vector: CutVector,
    pub checks: Vec<InvariantCheck>,
}

fn uncovered(t: usize) -> Error {
    Error::Infeasible(format!("terminal t_{t} uncovered"))
}

/// `δ`-descending, stable by position.
fn sort_by_cost_desc(items: &mut [(usize, f64)]) {
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// Round-robin bucket inequality: for each bucket, the members beyond the
/// first `k` positions sum to at most `1/k` of the whole.
pub fn bucket_check(sorted_costs: &[f64], k: usize) -> InvariantCheck {
    let total: f64 = sorted_costs.iter().sum();
    let mut worst: Option<(usize, f64)> = None;
    for i in 0..k {
        let tail: f64 = sorted_costs.iter().enumerate().filter(|(j, _)| *j >= k && j % k == i).map(|(_, c)| c).sum();
        if tail > total / k as f64 + TOL * (1.0 + total) && worst.is_none_or(|(_, w)| tail > w) {
            worst = Some((i + 1, tail));
        }
    }
    InvariantCheck::new(
        "aggregation buckets",
        worst.is_none(),
        worst.map_or(format!("{} extra parts", sorted_costs.len()), |(i, t)| {
            format!("bucket {i}: {t} > {total}/{k}")
        }),
    )
}

/// Terminal parts seed `P_1..P_k`; the remaining parts (the residual
/// included) are sorted by `δ` descending and dealt round-robin.
pub fn aggregate_lp(up: &UncrossedPartition, graph: &WeightedGraph, terminals: &TerminalSet) -> Result<Aggregated> {
    if let Some(t) = up.residual_terminal(terminals) {
        return Err(uncovered(t));
    }
    let k = terminals.k();
    let mut parts: Vec<Option<VertexSet>> = vec![None; k];
    let mut rest: Vec<(usize, f64)> = Vec::new();
    for (i, p) in up.parts.iter().enumerate() {
        match p.terminal {
            Some(t) => parts[t - 1] = Some(p.set.clone()),
            None if !p.set.is_empty() => rest.push((i, up.costs[i])),
            None => {}
        }
    }
    let mut parts: Vec<VertexSet> = parts
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| uncovered(i + 1)))
        .collect::<Result<_>>()?;
    let residual_id = up.parts.len();
    if !up.residual.is_empty() {
        rest.push((residual_id, up.residual_cost));
    }
    sort_by_cost_desc(&mut rest);
    for (j, &(id, _)) in rest.iter().enumerate() {
        let set = if id == residual_id { &up.residual } else { &up.parts[id].set };
        parts[j % k].union_with(set);
    }
    let costs: Vec<f64> = rest.iter().map(|&(_, c)| c).collect();
    let partition = Partition::labeled(parts);
    let cut_vector = partition.cut_vector(graph);
    Ok(Aggregated { partition, cut_vector, checks: vec![bucket_check(&costs, k)] })
}

fn first_k_parts(up: &UncrossedPartition, terminals: &TerminalSet) -> Result<Vec<VertexSet>> {
    let k = terminals.k();
    (0..k)
        .map(|j| {
            let p = &up.parts[j];
            if p.set.contains(terminals.get(j + 1)) {
                Ok(p.set.clone())
            } else {
                Err(Error::Infeasible(format!("terminal t_{} displaced from its isolating part", j + 1)))
            }
        })
        .collect()
}

// Splits each group into `coords[i].len()` subgroups dealt round-robin by δ
// descending; subgroup s joins coordinate coords[i][s].
fn assemble_groups(
    up: &UncrossedPartition,
    graph: &WeightedGraph,
    terminals: &TerminalSet,
    coords: &[Vec<usize>],
    residual_coord: usize,
) -> Result<Aggregated> {
    let k = terminals.k();
    let mut parts = first_k_parts(up, terminals)?;
    let mut groups: Vec<Vec<(usize, f64)>> = vec![Vec::new(); coords.len()];
    for (i, p) in up.parts.iter().enumerate().skip(k) {
        if p.set.is_empty() {
            continue;
        }
        let g = p.group.ok_or_else(|| Error::Invariant(format!("part {} has no group", i + 1)))?;
        if coords[g].is_empty() {
            return Err(Error::Invariant(format!("group {g} has members but no coordinates")));
        }
        groups[g].push((i, up.costs[i]));
    }
    for (g, members) in groups.iter_mut().enumerate() {
        sort_by_cost_desc(members);
        for (r, &(id, _)) in members.iter().enumerate() {
            let coord = coords[g][r % coords[g].len()];
            parts[coord - 1].union_with(&up.parts[id].set);
        }
    }
    parts[residual_coord - 1].union_with(&up.residual);
    let partition = Partition::labeled(parts);
    let cut_vector = partition.cut_vector(graph);
    Ok(Aggregated { partition, cut_vector, checks: Vec::new() })
}

/// Aggregation with a minimization oracle: group `i` is split over `I_i`
/// and the residual joins `j_s = min I_{i*}` with `i* = argmax r_i`.
pub fn aggregate_norm_min(
    up: &UncrossedPartition,
    graph: &WeightedGraph,
    terminals: &TerminalSet,
    index_sets: &[Vec<usize>],
    r: &[f64],
) -> Result<Aggregated> {
    let i_star = (0..index_sets.len())
        .filter(|&i| !index_sets[i].is_empty())
        .fold(None, |best: Option<usize>, i| match best {
            Some(b) if r[b] >= r[i] => Some(b),
            _ => Some(i),
        })
        .ok_or_else(|| Error::InvalidArgument("all index sets are empty".into()))?;
    let j_s = index_sets[i_star][0];
    assemble_groups(up, graph, terminals, index_sets, j_s)
}

/// Aggregation with an ordering oracle: group `i` is split over the multiset
/// `I'_i`; the residual joins the coordinate of `I'_0`.
pub fn aggregate_ordering(
    up: &UncrossedPartition,
    graph: &WeightedGraph,
    terminals: &TerminalSet,
    assignment: &OrderingAssignment,
) -> Result<Aggregated> {
    assemble_groups(up, graph, terminals, &assignment.sets, assignment.sets[0][0])
}

/// Coordinates receiving each bucket maximum `b_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingAssignment {
    /// `I'_i` as a sorted multiset of size `2^i`.
    pub sets: Vec<Vec<usize>>,
    /// `Σ_i b_i Σ_{j ∈ I'_i} 1_j`.
    pub assembled: Vec<f64>,
    pub assembled_norm: f64,
    /// `||v||` for the sorted vector `v` with `v_j = b_{floor(log2 j)}`.
    pub reference_norm: f64,
}

/// Sorted-descending entries `x_{2^i}` of `v`.
pub fn bucket_maxima(v: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = v.iter().map(|a| a.abs()).collect();
    x.sort_by(|a, b| b.total_cmp(a));
    (0..=floor_log2(x.len())).map(|i| x[(1 << i) - 1]).collect()
}

/// Builds `u_1 = b_0 e_1` and `u_2 = u_3` holding `2^{i-1}` copies of `b_i`,
/// reorders each with the ordering oracle, and reads off where every `b_i`
/// landed. Fails if the assembled vector exceeds `3||v||`.
pub fn ordering_assignment(spec: &NormSpec, b: &[f64]) -> Result<OrderingAssignment> {
    let k = spec.k();
    let levels = floor_log2(k);
    if b.len() != levels + 1 {
        return Err(Error::DimensionMismatch { expected: levels + 1, got: b.len() });
    }
    if b.windows(2).any(|w| w[1] > w[0]) || b.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidArgument("b must be non-negative and non-increasing".into()));
    }
    let mut u1 = vec![0.0; k];
    let mut label1 = vec![None; k];
    u1[0] = b[0];
    label1[0] = Some(0);
    let mut u2 = vec![0.0; k];
    let mut label2 = vec![None; k];
    for i in 1..=levels {
        for pos in (1 << (i - 1))..(1 << i) {
            u2[pos - 1] = b[i];
            label2[pos - 1] = Some(i);
        }
    }
    let perm1 = spec.ordering_oracle(&u1)?;
    let perm2 = spec.ordering_oracle(&u2)?;
    let mut sets = vec![Vec::new(); levels + 1];
    for j in 0..k {
        if let Some(i) = label1[perm1[j] - 1] {
            sets[i].push(j + 1);
        }
        if let Some(i) = label2[perm2[j] - 1] {
            sets[i].push(j + 1);
            sets[i].push(j + 1);
        }
    }
    for s in &mut sets {
        s.sort_unstable();
    }
    let ordered1 = apply_permutation(&u1, &perm1);
    let ordered2 = apply_permutation(&u2, &perm2);
    let assembled: Vec<f64> = ordered1.iter().zip(&ordered2).map(|(a, c)| a + 2.0 * c).collect();
    let reference: Vec<f64> = (1..=k).map(|j| b[floor_log2(j)]).collect();
    let assembled_norm = spec.value(&assembled);
    let reference_norm = spec.value(&reference);
    if assembled_norm > 3.0 * reference_norm + TOL * (1.0 + reference_norm) {
        return Err(Error::Invariant(format!("ordering assignment {assembled_norm} > 3 * {reference_norm}")));
    }
    Ok(OrderingAssignment { sets, assembled, assembled_norm, reference_norm })
}

/// All non-increasing sequences of length `floor(log2 k) + 1` over
/// `{0} ∪ {r_max / 2^j : 0 <= j <= floor(log2 k)}`.
pub fn enumerate_b_sequences(r_max: f64, k: usize) -> Vec<Vec<f64>> {
    let len = floor_log2(k) + 1;
    if r_max <= 0.0 {
        return vec![vec![0.0; len]];
    }
    let mut values: Vec<f64> = (0..len).map(|j| r_max / (1u64 << j) as f64).collect();
    values.push(0.0);
    let mut out = Vec::new();
    let mut idx = vec![0usize; len];
    loop {
        out.push(idx.iter().map(|&i| values[i]).collect());
        // next non-decreasing index vector
        let mut pos = len;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if idx[pos] + 1 < values.len() {
                let v = idx[pos] + 1;
                for x in idx.iter_mut().skip(pos) {
                    *x = v;
                }
                break;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Lp,
    NormMin,
    NormOrdering,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lp" => Ok(Variant::Lp),
            "norm-min" => Ok(Variant::NormMin),
            "norm-ordering" => Ok(Variant::NormOrdering),
            other => Err(Error::UnknownTag(other.to_string())),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Lp => "lp",
            Variant::NormMin => "norm-min",
            Variant::NormOrdering => "norm-ordering",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub trials: usize,
    pub utc: UtcSelect,
    pub eps_weights: f64,
    /// `None` picks 1 for the exact backend and `8 sqrt(log2 n log2 k)`
    /// for the heuristic.
    pub alpha_mult: Option<f64>,
    pub variant: Variant,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            trials: 7,
            utc: UtcSelect::Auto,
            eps_weights: 0.01,
            alpha_mult: None,
            variant: Variant::Lp,
        }
    }
}

impl PipelineConfig {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if !(self.eps_weights > 0.0 && self.eps_weights < 1.0) {
            return Err(Error::InvalidArgument(format!("eps must lie in (0, 1), got {}", self.eps_weights)));
        }
        if let Some(a) = self.alpha_mult {
            if !(a > 0.0) {
                return Err(Error::InvalidArgument(format!("alpha multiplier must be positive, got {a}")));
            }
        }
        Ok(())
    }

    pub fn alpha_for(&self, backend: UtcBackend, n: usize, k: usize) -> f64 {
        self.alpha_mult.unwrap_or(match backend {
            UtcBackend::Exact => 1.0,
            UtcBackend::Heuristic => 8.0 * ((n as f64).log2() * (k as f64).log2()).sqrt().max(1.0),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub stream: u64,
    pub accepted: bool,
    pub objective: Option<f64>,
    pub reason: Option<String>,
    pub repairs: usize,
    pub parts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub partition: Partition,
    pub cut_vector: CutVector,
    pub objective: f64,
    pub trials: Vec<TrialRecord>,
    pub checks: Vec<InvariantCheck>,
    pub backend: UtcBackend,
    pub cover_size: usize,
    pub opt_guess: Option<f64>,
    pub weight_scale: Option<f64>,
}

impl Outcome {
    pub fn rejection_rate(&self) -> f64 {
        let rejected = self.trials.iter().filter(|t| !t.accepted).count();
        rejected as f64 / self.trials.len().max(1) as f64
    }
}

/// Merges checks with equal names: passes only if all instances pass, and
/// keeps the first failing detail.
pub fn merge_checks(checks: Vec<InvariantCheck>) -> Vec<InvariantCheck> {
    let mut out: Vec<InvariantCheck> = Vec::new();
    for c in checks {
        match out.iter_mut().find(|o| o.name == c.name) {
            Some(o) if o.passed && !c.passed => *o = c,
            Some(_) => {}
            None => out.push(c),
        }
    }
    out
}

pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn validate_instance(graph: &WeightedGraph, terminals: &TerminalSet) -> Result<()> {
    if terminals.as_slice().iter().any(|&t| t > graph.n()) {
        return Err(Error::InvalidTerminals("terminal outside the graph".into()));
    }
    Ok(())
}

// Runs `core` on the graph directly, or on every weight-preprocessed copy
// when the weight ratio is too large, re-scoring each answer on the
// original weights.
fn with_weight_preprocessing(
    graph: &WeightedGraph,
    eps: f64,
    objective: &dyn Fn(&[f64]) -> f64,
    core: &dyn Fn(&WeightedGraph) -> Result<Outcome>,
) -> Result<Outcome> {
    let run = |g: &WeightedGraph| -> Result<Outcome> {
        let (capped, _) = g.capped();
        core(&capped)
    };
    if !weight_ratio_exceeds(graph, eps) {
        return run(graph);
    }
    let mut best: Option<Outcome> = None;
    let mut last_err = None;
    for scale in guess_weight_scales(graph) {
        let g = preprocess_weights(graph, scale, eps)?;
        match run(&g) {
            Ok(mut out) => {
                out.cut_vector = out.partition.cut_vector(graph);
                out.objective = objective(&out.cut_vector.0);
                out.weight_scale = Some(scale);
                if best.as_ref().is_none_or(|b| out.objective < b.objective) {
                    best = Some(out);
                }
            }
            Err(e @ Error::Invariant(_)) => return Err(e),
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Infeasible("no weight scale".into())))
}

/// `l_p` value of a cut vector; `p = inf` is the maximum.
pub fn lp_objective(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        x.iter().fold(0.0, |m, &v| m.max(v))
    } else {
        x.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `p` used inside the algorithm: `max(1, log2 k)` in place of infinity.
pub fn effective_p(p: f64, k: usize) -> f64 {
    if p.is_infinite() {
        (k as f64).log2().max(1.0)
    } else {
        p
    }
}

/// Covering, then repeated (uncross, aggregate) trials; the best accepted
/// trial under the `l_p` objective wins.
pub fn solve_lp_multiway(graph: &WeightedGraph, terminals: &TerminalSet, p: f64, cfg: &PipelineConfig) -> Result<Outcome> {
    cfg.validate()?;
    validate_instance(graph, terminals)?;
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
    }
    let objective = |x: &[f64]| lp_objective(x, p);
    with_weight_preprocessing(graph, cfg.eps_weights, &objective, &|g| lp_core(g, terminals, p, cfg))
}

fn lp_core(graph: &WeightedGraph, terminals: &TerminalSet, p: f64, cfg: &PipelineConfig) -> Result<Outcome> {
    let backend = cfg.utc.resolve(graph.n());
    let cover = cover_lp(graph, terminals, effective_p(p, terminals.k()), backend)?;
    let mut checks = cover.structural_checks(terminals);
    let mut trials = Vec::new();
    let mut best: Option<Aggregated> = None;
    let mut accepted = 0;
    for stream in 0..(4 * cfg.trials) as u64 {
        if accepted == cfg.trials {
            break;
        }
        let mut rng = trial_rng(cfg.seed, stream);
        let up = uncross_lp(&cover, graph, terminals, &mut rng)?;
        checks.extend(up.checks(terminals));
        let parts = up.parts.iter().filter(|p| !p.set.is_empty()).count() + usize::from(!up.residual.is_empty());
        let mut record = TrialRecord { stream, accepted: false, objective: None, reason: None, repairs: up.repairs, parts };
        match aggregate_lp(&up, graph, terminals) {
            Ok(agg) => {
                agg.partition.check_terminal_labeled(graph.n(), terminals)?;
                checks.extend(agg.checks.iter().cloned());
                let obj = lp_objective(&agg.cut_vector.0, p);
                record.accepted = true;
                record.objective = Some(obj);
                accepted += 1;
                if best.as_ref().is_none_or(|b| obj < lp_objective(&b.cut_vector.0, p)) {
                    best = Some(agg);
                }
            }
            Err(Error::Infeasible(reason)) => record.reason = Some(reason),
            Err(e) => return Err(e),
        }
        trials.push(record);
    }
    let checks = merge_checks(checks);
    ensure_all(&checks)?;
    let best = best.ok_or(Error::AllTrialsRejected { attempts: trials.len() })?;
    Ok(Outcome {
        objective: lp_objective(&best.cut_vector.0, p),
        partition: best.partition,
        cut_vector: best.cut_vector,
        trials,
        checks,
        backend,
        cover_size: cover.len(),
        opt_guess: None,
        weight_scale: None,
    })
}

/// Norm pipeline: `norm-min` (minimization oracle) or `norm-ordering`
/// (ordering oracle, enumerating bucket maxima).
pub fn solve_norm_multiway(graph: &WeightedGraph, terminals: &TerminalSet, spec: &NormSpec, cfg: &PipelineConfig) -> Result<Outcome> {
    cfg.validate()?;
    validate_instance(graph, terminals)?;
    check_dimension(spec, terminals)?;
    let objective = |x: &[f64]| spec.value(x);
    match cfg.variant {
        Variant::NormOrdering => {
            if !spec.has_ordering_oracle() {
                return Err(Error::MissingOracle("ordering"));
            }
            with_weight_preprocessing(graph, cfg.eps_weights, &objective, &|g| ordering_core(g, terminals, spec, cfg))
        }
        _ => {
            if !spec.has_minimization_oracle() {
                return Err(Error::MissingOracle("minimization"));
            }
            with_weight_preprocessing(graph, cfg.eps_weights, &objective, &|g| norm_min_core(g, terminals, spec, cfg))
        }
    }
}

/// Dispatches on `cfg.variant`; the `lp` variant needs an `l_p` norm.
pub fn solve(graph: &WeightedGraph, terminals: &TerminalSet, spec: &NormSpec, cfg: &PipelineConfig) -> Result<Outcome> {
    match (cfg.variant, spec.kind()) {
        (Variant::Lp, NormKind::Lp { p }) => solve_lp_multiway(graph, terminals, *p, cfg),
        (Variant::Lp, _) => Err(Error::InvalidArgument("the lp variant needs an lp norm".into())),
        _ => solve_norm_multiway(graph, terminals, spec, cfg),
    }
}

struct NormTrials {
    best: Option<Aggregated>,
    records: Vec<TrialRecord>,
    checks: Vec<InvariantCheck>,
}

// Uncross/aggregate trials shared by both norm variants.
fn norm_trials(
    cover: &Cover,
    graph: &WeightedGraph,
    terminals: &TerminalSet,
    spec: &NormSpec,
    cfg: &PipelineConfig,
    stream_base: u64,
    aggregate: &dyn Fn(&UncrossedPartition) -> Result<Aggregated>,
) -> Result<NormTrials> {
    let iso: Vec<f64> = cover.isolating.as_ref().map_or(Vec::new(), |c| c.iter().map(|x| x.1).collect());
    let iso_norm = spec.value(&iso);
    let k = terminals.k();
    let mut out = NormTrials { best: None, records: Vec::new(), checks: Vec::new() };
    let mut accepted = 0;
    for attempt in 0..(4 * cfg.trials) as u64 {
        if accepted == cfg.trials {
            break;
        }
        let stream = stream_base + attempt;
        let mut rng = trial_rng(cfg.seed, stream);
        let up = uncross_norm(cover, graph, terminals, &mut rng)?;
        out.checks.extend(up.checks(terminals));
        out.checks.push(InvariantCheck::le("isolating prefix bound", spec.value(&up.costs[..k]), 2.0 * iso_norm));
        let parts = up.parts.iter().filter(|p| !p.set.is_empty()).count() + usize::from(!up.residual.is_empty());
        let mut record = TrialRecord { stream, accepted: false, objective: None, reason: None, repairs: up.repairs, parts };
        match aggregate(&up) {
            Ok(agg) => {
                agg.partition.check_terminal_labeled(graph.n(), terminals)?;
                let obj = spec.value(&agg.cut_vector.0);
                record.accepted = true;
                record.objective = Some(obj);
                accepted += 1;
                if out.best.as_ref().is_none_or(|b| obj < spec.value(&b.cut_vector.0)) {
                    out.best = Some(agg);
                }
            }
            Err(Error::Infeasible(reason)) => record.reason = Some(reason),
            Err(e) => return Err(e),
        }
        out.records.push(record);
    }
    Ok(out)
}

fn norm_min_core(graph: &WeightedGraph, terminals: &TerminalSet, spec: &NormSpec, cfg: &PipelineConfig) -> Result<Outcome> {
    let backend = cfg.utc.resolve(graph.n());
    let alpha = cfg.alpha_for(backend, graph.n(), terminals.k());
    let index_sets = compute_index_sets(spec)?;
    let search = binary_search_opt(graph, terminals, spec, alpha, backend)?;
    let r: Vec<f64> = index_sets
        .iter()
        .map(|s| if s.is_empty() { f64::INFINITY } else { radius(search.guess, spec.indicator_norm(s)) })
        .collect();
    let cover = search.cover;
    let sizes: Vec<usize> = index_sets.iter().map(Vec::len).collect();
    let mut checks = cover.structural_checks(terminals);
    checks.extend(norm_cover_checks(&cover, &sizes));
    let aggregate = |up: &UncrossedPartition| aggregate_norm_min(up, graph, terminals, &index_sets, &r);
    let run = norm_trials(&cover, graph, terminals, spec, cfg, 0, &aggregate)?;
    checks.extend(run.checks);
    let checks = merge_checks(checks);
    ensure_all(&checks)?;
    let best = run.best.ok_or(Error::AllTrialsRejected { attempts: run.records.len() })?;
    Ok(Outcome {
        objective: spec.value(&best.cut_vector.0),
        partition: best.partition,
        cut_vector: best.cut_vector,
        trials: run.records,
        checks,
        backend,
        cover_size: cover.len(),
        opt_guess: Some(search.guess),
        weight_scale: None,
    })
}

/// `|B'_i| = min(2^{i+1} - 1, k) - 2^i + 1`.
pub fn ordering_bucket_size(i: usize, k: usize) -> usize {
    ((1usize << (i + 1)) - 1).min(k) + 1 - (1 << i)
}

/// Group rules for one guessed `b` sequence.
pub fn ordering_rules(b: &[f64], k: usize, alpha_mult: f64) -> Vec<Option<GroupRule>> {
    let log_k = (k as f64).log2();
    b.iter()
        .enumerate()
        .map(|(i, &bi)| {
            let size = ordering_bucket_size(i, k) as f64;
            Some(GroupRule { rho: (1.0 / (2.0 * log_k * size)).min(1.0), threshold: alpha_mult * bi })
        })
        .collect()
}

fn first_coordinate(spec: &NormSpec) -> Result<usize> {
    if spec.has_minimization_oracle() {
        return Ok(spec.minimization_oracle(1)?[0]);
    }
    let mut e1 = vec![0.0; spec.k()];
    e1[0] = 1.0;
    let perm = spec.ordering_oracle(&e1)?;
    Ok(perm.iter().position(|&p| p == 1).expect("permutation contains 1") + 1)
}

fn ordering_core(graph: &WeightedGraph, terminals: &TerminalSet, spec: &NormSpec, cfg: &PipelineConfig) -> Result<Outcome> {
    let n = graph.n();
    let k = terminals.k();
    let backend = cfg.utc.resolve(n);
    let alpha = cfg.alpha_for(backend, n, k);
    let isolating = isolating_cuts(graph, terminals)?;
    let iso: Vec<f64> = isolating.iter().map(|c| c.1).collect();
    let hi = spec.value(&trivial_cut_vector(graph, terminals));
    let start = if spec.has_minimization_oracle() {
        binary_search_opt(graph, terminals, spec, alpha, backend)?.guess
    } else {
        spec.value(&iso)
    };
    let unit = spec.indicator_norm(&[first_coordinate(spec)?]);
    let cap_total = graph.total_finite_weight();
    let positive_floor = graph.min_positive_weight().unwrap_or(1.0) * unit.max(f64::MIN_POSITIVE);

    let mut guesses = vec![start];
    let mut g = if start > 0.0 { start } else { positive_floor };
    loop {
        if start > 0.0 {
            g *= 2.0;
        }
        guesses.push(g);
        if g >= hi || guesses.len() > 64 {
            break;
        }
        if start <= 0.0 {
            g *= 2.0;
        }
    }

    let mut checks = Vec::new();
    let mut records = Vec::new();
    let mut best: Option<(f64, Aggregated, f64, usize)> = None;
    for guess in guesses {
        let r_max = radius(guess, unit).min(cap_total);
        for (seq_idx, b) in enumerate_b_sequences(r_max, k).into_iter().enumerate() {
            let rules = ordering_rules(&b, k, alpha);
            let cover = match cover_with_rules(graph, terminals, &rules, isolating.clone(), backend) {
                Ok(c) => c,
                Err(Error::GuessTooLow { .. }) => continue,
                Err(e) => return Err(e),
            };
            let assignment = ordering_assignment(spec, &b)?;
            checks.extend(cover.structural_checks(terminals));
            let aggregate = |up: &UncrossedPartition| aggregate_ordering(up, graph, terminals, &assignment);
            let run = norm_trials(&cover, graph, terminals, spec, cfg, seq_idx as u64 * 1000, &aggregate)?;
            checks.extend(run.checks);
            records.extend(run.records);
            if let Some(agg) = run.best {
                let obj = spec.value(&agg.cut_vector.0);
                if best.as_ref().is_none_or(|(o, ..)| obj < *o) {
                    best = Some((obj, agg, guess, cover.len()));
                }
            }
        }
        if best.is_some() {
            break;
        }
    }
    let checks = merge_checks(checks);
    ensure_all(&checks)?;
    let (objective, agg, guess, cover_size) = best.ok_or(Error::AllTrialsRejected { attempts: records.len() })?;
    Ok(Outcome {
        objective,
        partition: agg.partition,
        cut_vector: agg.cut_vector,
        trials: records,
        checks,
        backend,
        cover_size,
        opt_guess: Some(guess),
        weight_scale: None,
    })
}
