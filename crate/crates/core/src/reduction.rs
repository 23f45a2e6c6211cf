//! Small Set Bipartite Vertex Expansion as Norm Multiway Cut: the gadget,
//! its cost sandwich, and the small-set extraction procedures.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Partition, TerminalSet, WeightedGraph};
use crate::norms::{floor_log2, Bipartite, NormSpec};
use crate::oracle::{brute_force_multiway, brute_force_ssbve, OracleBudget};
use crate::partitioning::{solve_norm_multiway, PipelineConfig, Variant};

const SANDWICH_TOL: f64 = 1e-6;

/// Choose `t` left vertices minimizing `|N(S)|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SsbveInstance {
    pub bip: Bipartite,
    pub t: usize,
}

impl SsbveInstance {
    pub fn new(bip: Bipartite, t: usize) -> Result<Self> {
        if bip.left < 2 {
            return Err(Error::InvalidArgument(format!("need |L| >= 2, got {}", bip.left)));
        }
        if t < 1 || t > bip.left {
            return Err(Error::InvalidArgument(format!("t = {t} must lie in 1..={}", bip.left)));
        }
        Ok(SsbveInstance { bip, t })
    }

    pub fn k(&self) -> usize {
        self.bip.left
    }

    pub fn n_r(&self) -> usize {
        self.bip.right()
    }
}

/// `H = (L, B, L × B)` with unit weights, terminals `L = 1..=k`,
/// `B = k+1..=k+t`, and the neighbourhood-max norm of the bipartite graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedInstance {
    pub graph: WeightedGraph,
    pub terminals: TerminalSet,
    pub spec: NormSpec,
    pub k: usize,
    pub t: usize,
    pub n_r: usize,
}

pub fn build_reduction(ssbve: &SsbveInstance) -> Result<ReducedInstance> {
    let (k, t) = (ssbve.k(), ssbve.t);
    let edges = (1..=k).flat_map(|i| (1..=t).map(move |b| (i, k + b, 1.0))).collect();
    Ok(ReducedInstance {
        graph: WeightedGraph::new(k + t, edges)?,
        terminals: TerminalSet::new(k + t, (1..=k).collect())?,
        spec: NormSpec::neighborhood_max(&ssbve.bip)?,
        k,
        t,
        n_r: ssbve.n_r(),
    })
}

/// `y_i = |P_i| - 1`.
pub fn y_from_partition(part: &Partition, red: &ReducedInstance) -> Result<Vec<f64>> {
    if part.labels.is_none() {
        return Err(Error::InvalidArgument("partition is not terminal-labeled".into()));
    }
    part.check_terminal_labeled(red.graph.n(), &red.terminals)?;
    let mut y = vec![0.0; red.k];
    for (p, &label) in part.parts.iter().zip(part.labels.as_ref().expect("checked above")) {
        y[label - 1] = (p.len() - 1) as f64;
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    /// `||(δ(P_1), ..., δ(P_k))||`.
    pub cost: f64,
    pub y: Vec<f64>,
    pub y_norm: f64,
    pub lower: f64,
    pub upper: f64,
    pub cut_vector: Vec<f64>,
    /// Whether `δ(P_i) = (k - 2) y_i + t` for every `i`.
    pub coordinates_exact: bool,
    pub holds: bool,
}

/// Checks `(k-2)||y|| <= c <= (k-2)||y|| + t n_R` and the per-coordinate
/// edge count.
pub fn verify_sandwich(part: &Partition, red: &ReducedInstance) -> Result<SandwichReport> {
    if red.k < 2 {
        return Err(Error::InvalidArgument(format!("sandwich needs k >= 2, got {}", red.k)));
    }
    let y = y_from_partition(part, red)?;
    let mut cut_vector = vec![0.0; red.k];
    for (p, &label) in part.parts.iter().zip(part.labels.as_ref().expect("labeled")) {
        cut_vector[label - 1] = crate::graph::boundary_weight(&red.graph, p);
    }
    let cost = red.spec.value(&cut_vector);
    let y_norm = red.spec.value(&y);
    let scale = (red.k - 2) as f64;
    let lower = scale * y_norm;
    let upper = lower + (red.t * red.n_r) as f64;
    let coordinates_exact = cut_vector.iter().zip(&y).all(|(&x, &yi)| x == scale * yi + red.t as f64);
    let holds = lower <= cost + SANDWICH_TOL && cost <= upper + SANDWICH_TOL && coordinates_exact;
    Ok(SandwichReport { cost, y, y_norm, lower, upper, cut_vector, coordinates_exact, holds })
}

/// Any Norm Multiway Cut solver returning a terminal-labeled partition.
pub trait NormMultiwaySolver {
    fn solve(&self, graph: &WeightedGraph, terminals: &TerminalSet, spec: &NormSpec) -> Result<Partition>;
}

/// Exhaustive enumeration.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleSolver {
    pub budget: OracleBudget,
}

impl NormMultiwaySolver for OracleSolver {
    fn solve(&self, graph: &WeightedGraph, terminals: &TerminalSet, spec: &NormSpec) -> Result<Partition> {
        Ok(brute_force_multiway(graph, terminals, spec, self.budget)?.0)
    }
}

/// The covering / uncrossing / aggregation pipeline.
#[derive(Debug, Clone)]
pub struct PipelineSolver {
    pub config: PipelineConfig,
}

impl Default for PipelineSolver {
    fn default() -> Self {
        PipelineSolver { config: PipelineConfig { variant: Variant::NormMin, ..PipelineConfig::default() } }
    }
}

impl NormMultiwaySolver for PipelineSolver {
    fn solve(&self, graph: &WeightedGraph, terminals: &TerminalSet, spec: &NormSpec) -> Result<Partition> {
        Ok(solve_norm_multiway(graph, terminals, spec, &self.config)?.partition)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extraction {
    /// `S'` in the instance's left labels, sorted.
    pub set: Vec<usize>,
    /// The group index `j`, or `None` for the exhaustive small-`k` path.
    pub group: Option<usize>,
    pub y: Vec<f64>,
    pub y_norm: f64,
    pub neighborhood: usize,
}

/// `Q_j = {i : 2^j <= y_i < 2^{j+1}}` for `j = 0..ℓ`, `ℓ = floor(log2 t) + 1`.
pub fn y_groups(y: &[f64], t: usize) -> Vec<Vec<usize>> {
    let levels = floor_log2(t) + 1;
    let mut groups = vec![Vec::new(); levels];
    for (i, &yi) in y.iter().enumerate() {
        if yi >= 1.0 {
            let j = floor_log2(yi as usize);
            if j < levels {
                groups[j].push(i + 1);
            }
        }
    }
    groups
}

/// Smallest `j` with `|Q_j| >= 2^{-(j+1)} t / ℓ`.
pub fn pick_group(groups: &[Vec<usize>], t: usize) -> Option<usize> {
    let levels = groups.len();
    groups.iter().enumerate().position(|(j, q)| (q.len() << (j + 1)) * levels >= t)
}

/// Runs the solver on the reduced instance and returns the qualifying group.
/// Instances with `k <= 3` are solved exhaustively.
pub fn extract_small_set(ssbve: &SsbveInstance, solver: &dyn NormMultiwaySolver) -> Result<Extraction> {
    if ssbve.k() <= 3 {
        let (set, neighborhood) = brute_force_ssbve(&ssbve.bip, ssbve.t, OracleBudget::default())?;
        return Ok(Extraction { set, group: None, y: Vec::new(), y_norm: 0.0, neighborhood });
    }
    let red = build_reduction(ssbve)?;
    let part = solver.solve(&red.graph, &red.terminals, &red.spec)?;
    let report = verify_sandwich(&part, &red)?;
    if !report.holds {
        return Err(Error::Invariant(format!(
            "sandwich violated: {} <= {} <= {}",
            report.lower, report.cost, report.upper
        )));
    }
    let groups = y_groups(&report.y, ssbve.t);
    let j = pick_group(&groups, ssbve.t)
        .ok_or_else(|| Error::Invariant(format!("no group qualifies for y = {:?}", report.y)))?;
    let set = groups[j].clone();
    let neighborhood = ssbve.bip.neighborhood_of(&set);
    if set.is_empty() || set.len() > ssbve.t {
        return Err(Error::Invariant(format!("extracted {} vertices for t = {}", set.len(), ssbve.t)));
    }
    let bound = report.y_norm / (1u64 << j) as f64;
    if neighborhood as f64 > bound + SANDWICH_TOL {
        return Err(Error::Invariant(format!("|N(S')| = {neighborhood} > {bound}")));
    }
    Ok(Extraction { set, group: Some(j), y: report.y, y_norm: report.y_norm, neighborhood })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IteratedExtraction {
    pub set: Vec<usize>,
    pub rounds: Vec<Extraction>,
    pub neighborhood: usize,
}

/// Repeats the extraction on `G[(L \ chosen) ∪ R]` with the remaining target
/// until `t` vertices are chosen; returns the `t` smallest labels chosen.
pub fn iterate_extraction(ssbve: &SsbveInstance, solver: &dyn NormMultiwaySolver) -> Result<IteratedExtraction> {
    let mut remaining: Vec<usize> = (1..=ssbve.k()).collect();
    let mut chosen: Vec<usize> = Vec::new();
    let mut rounds = Vec::new();
    while chosen.len() < ssbve.t {
        let need = ssbve.t - chosen.len();
        if need >= remaining.len() {
            chosen.append(&mut remaining);
            break;
        }
        let sub = SsbveInstance::new(ssbve.bip.induced_left(&remaining), need)?;
        let round = extract_small_set(&sub, solver)?;
        if round.set.is_empty() {
            return Err(Error::Invariant("extraction round removed no vertex".into()));
        }
        let picked: Vec<usize> = round.set.iter().map(|&i| remaining[i - 1]).collect();
        remaining.retain(|v| !picked.contains(v));
        chosen.extend(picked);
        rounds.push(round);
    }
    chosen.sort_unstable();
    chosen.truncate(ssbve.t);
    let neighborhood = ssbve.bip.neighborhood_of(&chosen);
    Ok(IteratedExtraction { set: chosen, rounds, neighborhood })
}
