//! Multiplicative-weights covering: repeatedly solve Unbalanced Terminal Cut
//! against the current vertex measure and halve the measure of the chosen
//! set until the total measure drops below `1/n`.

use crate::error::{Error, Result};
use crate::graph::{boundary_weight, min_isolating_cut, Partition, TerminalSet, VertexSet, WeightedGraph, TOL};
use crate::invariant::InvariantCheck;
use crate::norms::{compute_index_sets, floor_log2, NormSpec};
use crate::utc::{UtcBackend, UtcContext};

/// Per-vertex measure `μ_t` and the iteration counter `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureState {
    pub mu: Vec<f64>,
    pub t: usize,
}

impl MeasureState {
    pub fn new(n: usize) -> Self {
        MeasureState { mu: vec![1.0; n], t: 1 }
    }

    pub fn total(&self) -> f64 {
        self.mu.iter().sum()
    }
}

/// Halves `μ(v)` for every `v ∈ S` and advances `t`.
pub fn halve_measure(mut state: MeasureState, set: &VertexSet) -> MeasureState {
    for v in set.iter() {
        state.mu[v - 1] /= 2.0;
    }
    state.t += 1;
    state
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverSet {
    pub set: VertexSet,
    pub cost: f64,
    /// `μ_t(S_t) / μ_t(V)` at the iteration that produced the set.
    pub fraction: f64,
    pub iteration: usize,
    /// Group index for the norm variant.
    pub group: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cover {
    pub n: usize,
    pub k: usize,
    pub sets: Vec<CoverSet>,
    /// `(C_i, δ(C_i))` for the norm variant.
    pub isolating: Option<Vec<(VertexSet, f64)>>,
    pub backend: UtcBackend,
}

impl Cover {
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn fraction_sum(&self) -> f64 {
        self.sets.iter().map(|s| s.fraction).sum()
    }

    /// Number of cover sets containing each vertex (isolating cuts excluded).
    pub fn frequencies(&self) -> Vec<usize> {
        let mut freq = vec![0; self.n];
        for s in &self.sets {
            for v in s.set.iter() {
                freq[v - 1] += 1;
            }
        }
        freq
    }

    pub fn cost_power_sum(&self, p: f64) -> f64 {
        self.sets.iter().map(|s| s.cost.powf(p)).sum()
    }

    pub fn cost_sum(&self) -> f64 {
        self.sets.iter().map(|s| s.cost).sum()
    }

    pub fn group_sizes(&self, groups: usize) -> Vec<usize> {
        let mut sizes = vec![0; groups];
        for s in &self.sets {
            if let Some(g) = s.group {
                sizes[g] += 1;
            }
        }
        sizes
    }

    /// Runtime checks that hold on every completed run: frequency, measure
    /// budget, terminal count, and (exact backend only) cover size.
    pub fn structural_checks(&self, terminals: &TerminalSet) -> Vec<InvariantCheck> {
        let n = self.n as f64;
        let budget = 4.0 * n.ln() + 1.0;
        let min_freq = self.frequencies().into_iter().min().unwrap_or(0);
        let need = floor_log2(self.n) + 1;
        let mut checks = vec![
            InvariantCheck::new("cover frequency", min_freq >= need, format!("min frequency {min_freq}, need {need}")),
            InvariantCheck::le("cover measure budget", self.fraction_sum(), budget),
            InvariantCheck::new(
                "cover terminals",
                self.sets.iter().all(|s| s.set.terminal_count(terminals) <= 1),
                "every cover set holds at most one terminal",
            ),
        ];
        if self.backend == UtcBackend::Exact && self.isolating.is_none() {
            let cap = 2.0 * self.k as f64 * budget;
            checks.push(InvariantCheck::le("cover size", self.sets.len() as f64, cap));
        }
        checks
    }
}

fn iteration_cap(n: usize, k: usize) -> usize {
    let log = (n.max(2) as f64).log2().ceil() as usize;
    64 * k * log
}

/// Candidate measures `2^i μ(v)`, clamped to `μ(V)`, exactly deduplicated.
pub fn guess_grid(mu: &[f64]) -> Vec<f64> {
    let n = mu.len();
    let total: f64 = mu.iter().sum();
    let mut grid: Vec<f64> = Vec::new();
    for &m in mu {
        if m <= 0.0 {
            continue;
        }
        for i in 0..=floor_log2(n.max(1)) {
            grid.push((m * (1u64 << i) as f64).min(total));
        }
    }
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    grid
}

/// Covering for the `l_p` objective. `p` must be finite.
///
/// Among the UTC answers for all grid candidates the set minimizing
/// `max(δ/(10f)^{1/p}, δ/(10 k^{1-1/p} f))` with `f = μ_t(S)/μ_t(V)` is kept.
pub fn cover_lp(graph: &WeightedGraph, terminals: &TerminalSet, p: f64, backend: UtcBackend) -> Result<Cover> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("covering needs finite p >= 1, got {p}")));
    }
    let n = graph.n();
    let k = terminals.k();
    let ctx = UtcContext::new(graph, terminals, backend)?;
    let cap = iteration_cap(n, k);
    let kf = k as f64;
    let l1_scale = 10.0 * kf.powf(1.0 - 1.0 / p);
    let mut state = MeasureState::new(n);
    let mut sets = Vec::new();
    while state.total() >= 1.0 / n as f64 {
        if sets.len() >= cap {
            return Err(Error::IterationCap { stage: "covering", cap });
        }
        let total = state.total();
        let mut rhos: Vec<f64> = guess_grid(&state.mu)
            .into_iter()
            .map(|a| (a / total).max(1.0 / (2.0 * kf)).min(1.0))
            .collect();
        rhos.dedup();
        let mut best: Option<(f64, CoverSet)> = None;
        for sol in ctx.solve_batch(&state.mu, &rhos).into_iter().flatten() {
            let f = sol.measure / total;
            let score = (sol.cost / (10.0 * f).powf(1.0 / p)).max(sol.cost / (l1_scale * f));
            let better = match &best {
                None => true,
                Some((s, b)) => score < s - 1e-12 * s.abs() || (score <= s + 1e-12 * s.abs() && f > b.fraction),
            };
            if better {
                let cs = CoverSet { set: sol.set, cost: sol.cost, fraction: f, iteration: state.t, group: None };
                best = Some((score, cs));
            }
        }
        let (_, chosen) = best.ok_or_else(|| {
            Error::Infeasible(format!("no UTC candidate is feasible at iteration {}", state.t))
        })?;
        state = halve_measure(state, &chosen.set);
        sets.push(chosen);
    }
    Ok(Cover { n, k, sets, isolating: None, backend })
}

/// Isolating cuts `(C_i, δ(C_i))` for all terminals.
pub fn isolating_cuts(graph: &WeightedGraph, terminals: &TerminalSet) -> Result<Vec<(VertexSet, f64)>> {
    (1..=terminals.k()).map(|i| min_isolating_cut(graph, terminals, i)).collect()
}

/// One group of the norm covering loop: the UTC measure parameter and the
/// acceptance threshold on `δ(U_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupRule {
    pub rho: f64,
    pub threshold: f64,
}

/// Group rules `ρ_i = 1/(2 log2 k |I_i|)`, threshold `alpha_mult·r_i` with
/// `r_i = guess / ||1_{I_i}||`. Empty index sets yield `None`.
pub fn min_oracle_rules(spec: &NormSpec, index_sets: &[Vec<usize>], guess: f64, alpha_mult: f64) -> Vec<Option<GroupRule>> {
    let log_k = (spec.k() as f64).log2();
    index_sets
        .iter()
        .map(|set| {
            if set.is_empty() {
                return None;
            }
            let r = radius(guess, spec.indicator_norm(set));
            Some(GroupRule { rho: (1.0 / (2.0 * log_k * set.len() as f64)).min(1.0), threshold: alpha_mult * r })
        })
        .collect()
}

/// `guess / norm`, infinite for a zero norm with positive guess.
pub fn radius(guess: f64, norm: f64) -> f64 {
    if norm > 0.0 {
        guess / norm
    } else if guess > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Covering for a monotonic norm with a minimization oracle.
pub fn cover_norm(
    graph: &WeightedGraph,
    terminals: &TerminalSet,
    spec: &NormSpec,
    opt_guess: f64,
    alpha_mult: f64,
    backend: UtcBackend,
) -> Result<Cover> {
    if !(opt_guess >= 0.0) {
        return Err(Error::InvalidArgument(format!("opt guess must be non-negative, got {opt_guess}")));
    }
    check_dimension(spec, terminals)?;
    let index_sets = compute_index_sets(spec)?;
    let rules = min_oracle_rules(spec, &index_sets, opt_guess, alpha_mult);
    let isolating = isolating_cuts(graph, terminals)?;
    cover_with_rules(graph, terminals, &rules, isolating, backend)
}

pub(crate) fn check_dimension(spec: &NormSpec, terminals: &TerminalSet) -> Result<()> {
    if spec.k() != terminals.k() {
        return Err(Error::DimensionMismatch { expected: terminals.k(), got: spec.k() });
    }
    Ok(())
}

/// The norm covering loop for explicit per-group rules; groups are tried in
/// order and the first accepted `U_i` becomes `S_t`.
pub fn cover_with_rules(
    graph: &WeightedGraph,
    terminals: &TerminalSet,
    rules: &[Option<GroupRule>],
    isolating: Vec<(VertexSet, f64)>,
    backend: UtcBackend,
) -> Result<Cover> {
    let n = graph.n();
    let k = terminals.k();
    let ctx = UtcContext::new(graph, terminals, backend)?;
    let active: Vec<(usize, GroupRule)> =
        rules.iter().enumerate().filter_map(|(i, r)| r.map(|r| (i, r))).collect();
    let rhos: Vec<f64> = active.iter().map(|(_, r)| r.rho).collect();
    let cap = iteration_cap(n, k) * rules.len().max(1);
    let mut state = MeasureState::new(n);
    let mut sets = Vec::new();
    while state.total() >= 1.0 / n as f64 {
        if sets.len() >= cap {
            return Err(Error::IterationCap { stage: "norm covering", cap });
        }
        let total = state.total();
        let answers = ctx.solve_batch(&state.mu, &rhos);
        let accepted = active.iter().zip(answers).find_map(|(&(group, rule), ans)| {
            let sol = ans.ok()?;
            (sol.cost <= rule.threshold * (1.0 + 1e-12) + TOL).then_some((group, sol))
        });
        let (group, sol) = accepted.ok_or(Error::GuessTooLow { iteration: state.t })?;
        let cs = CoverSet {
            fraction: sol.measure / total,
            cost: sol.cost,
            set: sol.set,
            iteration: state.t,
            group: Some(group),
        };
        state = halve_measure(state, &cs.set);
        sets.push(cs);
    }
    Ok(Cover { n, k, sets, isolating: Some(isolating), backend })
}

/// Cut vector of the partition sending every non-terminal to `t_1`.
pub fn trivial_cut_vector(graph: &WeightedGraph, terminals: &TerminalSet) -> Vec<f64> {
    let n = graph.n();
    let mut parts: Vec<VertexSet> =
        terminals.as_slice().iter().map(|&t| VertexSet::from_vertices(n, [t])).collect();
    let rest = VertexSet::full(n).difference(&terminals.to_set(n));
    parts[0].union_with(&rest);
    Partition::labeled(parts).cut_vector(graph).0
}

/// Result of the power-of-two search for the optimum value.
#[derive(Debug, Clone)]
pub struct OptSearch {
    pub cover: Cover,
    pub guess: f64,
    pub lower: f64,
    pub upper: f64,
    pub evaluations: usize,
}

/// Searches guesses `lo·2^j` between `lo = ||(δ(C_i))||` and the norm of the
/// trivial partition; returns the smallest guess (within the bracket found)
/// for which [`cover_norm`] completes.
pub fn binary_search_opt(
    graph: &WeightedGraph,
    terminals: &TerminalSet,
    spec: &NormSpec,
    alpha_mult: f64,
    backend: UtcBackend,
) -> Result<OptSearch> {
    check_dimension(spec, terminals)?;
    let index_sets = compute_index_sets(spec)?;
    let isolating = isolating_cuts(graph, terminals)?;
    let iso_vec: Vec<f64> = isolating.iter().map(|(_, c)| *c).collect();
    let mut lo = spec.value(&iso_vec);
    let hi = spec.value(&trivial_cut_vector(graph, terminals));
    let mut evaluations = 0;
    let mut attempt = |guess: f64| -> Result<Option<Cover>> {
        evaluations += 1;
        let rules = min_oracle_rules(spec, &index_sets, guess, alpha_mult);
        match cover_with_rules(graph, terminals, &rules, isolating.clone(), backend) {
            Ok(c) => Ok(Some(c)),
            Err(Error::GuessTooLow { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    if lo <= 0.0 {
        if let Some(cover) = attempt(0.0)? {
            return Ok(OptSearch { cover, guess: 0.0, lower: 0.0, upper: hi, evaluations });
        }
        let w_min = graph.min_positive_weight().unwrap_or(1.0);
        lo = w_min * spec.indicator_norm(&index_sets[0]);
        if lo <= 0.0 {
            lo = w_min;
        }
    }
    if let Some(cover) = attempt(lo)? {
        return Ok(OptSearch { cover, guess: lo, lower: lo, upper: hi, evaluations });
    }
    // lo·2^top is the first power reaching hi; keep doubling past it if the
    // backend still rejects (possible only with a heuristic backend)
    let mut top = 1usize;
    while lo * 2f64.powi(top as i32) < hi && top < 1100 {
        top += 1;
    }
    let mut top_cover = None;
    for _ in 0..64 {
        if let Some(c) = attempt(lo * 2f64.powi(top as i32))? {
            top_cover = Some(c);
            break;
        }
        top += 1;
    }
    let mut top_cover = top_cover.ok_or(Error::GuessTooLow { iteration: 0 })?;
    let mut bottom = 0usize;
    while top - bottom > 1 {
        let mid = (top + bottom) / 2;
        match attempt(lo * 2f64.powi(mid as i32))? {
            Some(c) => {
                top = mid;
                top_cover = c;
            }
            None => bottom = mid,
        }
    }
    Ok(OptSearch { cover: top_cover, guess: lo * 2f64.powi(top as i32), lower: lo, upper: hi, evaluations })
}

/// Cover-level checks for the norm variant.
pub fn norm_cover_checks(cover: &Cover, index_sizes: &[usize]) -> Vec<InvariantCheck> {
    let mut checks = Vec::new();
    if cover.backend != UtcBackend::Exact {
        return checks;
    }
    let n = cover.n as f64;
    let log_k = (cover.k as f64).log2();
    let sizes = cover.group_sizes(index_sizes.len());
    for (i, (&g, &size)) in sizes.iter().zip(index_sizes).enumerate() {
        let cap = 2.0 * log_k * size as f64 * (4.0 * n.ln() + 1.0);
        checks.push(InvariantCheck::le(format!("group {i} size"), g as f64, cap));
    }
    checks
}

/// `δ(S)` recomputed for each cover set; used to double-check recorded costs.
pub fn recomputed_costs(graph: &WeightedGraph, cover: &Cover) -> Vec<f64> {
    cover.sets.iter().map(|s| boundary_weight(graph, &s.set)).collect()
}
