//! Brute-force exact solvers used as ground truth on small instances.

use crate::error::{Error, Result};
use crate::graph::{Partition, TerminalSet, VertexSet, WeightedGraph};
use crate::norms::{next_combination, Bipartite, NormSpec};
use crate::utc::{meets_measure, UtcInstance, UtcSolution};

const IMPROVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_assignments: u64,
}

impl OracleBudget {
    pub fn new(max_assignments: u64) -> Result<Self> {
        if max_assignments == 0 {
            return Err(Error::InvalidArgument("oracle budget must be positive".into()));
        }
        Ok(OracleBudget { max_assignments })
    }

    fn admit(&self, needed: Option<u128>) -> Result<()> {
        match needed {
            Some(x) if x <= u128::from(self.max_assignments) => Ok(()),
            other => Err(Error::BudgetExceeded { needed: other.unwrap_or(u128::MAX), budget: self.max_assignments }),
        }
    }
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_assignments: 10_000_000 }
    }
}

fn strictly_better(candidate: f64, best: f64) -> bool {
    candidate < best - IMPROVE_TOL * best.abs().max(1.0)
}

/// `C(n, r)`, `None` on overflow.
pub fn binomial(n: usize, r: usize) -> Option<u128> {
    if r > n {
        return Some(0);
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Enumerates every assignment of the non-terminals to the `k` terminal parts
/// in lexicographic order and keeps the first minimizer of `||δ||`.
pub fn brute_force_multiway(
    graph: &WeightedGraph,
    terminals: &TerminalSet,
    spec: &NormSpec,
    budget: OracleBudget,
) -> Result<(Partition, f64)> {
    let n = graph.n();
    let k = terminals.k();
    if spec.k() != k {
        return Err(Error::DimensionMismatch { expected: k, got: spec.k() });
    }
    let free: Vec<usize> = (1..=n).filter(|&v| terminals.index_of(v).is_none()).collect();
    budget.admit((k as u128).checked_pow(free.len() as u32))?;

    let mut label = vec![0usize; n + 1];
    for (i, &t) in terminals.as_slice().iter().enumerate() {
        label[t] = i;
    }
    let mut digits = vec![0usize; free.len()];
    let mut cut = vec![0.0; k];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        for (&v, &d) in free.iter().zip(&digits) {
            label[v] = d;
        }
        cut.iter_mut().for_each(|c| *c = 0.0);
        for e in graph.edges() {
            let (a, b) = (label[e.u], label[e.v]);
            if a != b {
                cut[a] += e.w;
                cut[b] += e.w;
            }
        }
        let value = spec.value(&cut);
        if best.as_ref().is_none_or(|(_, b)| strictly_better(value, *b)) {
            best = Some((digits.clone(), value));
        }
        // odometer, last digit fastest
        let mut pos = digits.len();
        loop {
            if pos == 0 {
                let (digits, value) = best.expect("at least one assignment");
                let mut assignment = vec![0; n];
                for (i, &t) in terminals.as_slice().iter().enumerate() {
                    assignment[t - 1] = i;
                }
                for (&v, &d) in free.iter().zip(&digits) {
                    assignment[v - 1] = d;
                }
                return Ok((Partition::from_assignment(n, k, &assignment), value));
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < k {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// Exact Small Set Bipartite Vertex Expansion: a `t`-subset of `L`
/// minimizing `|N(S)|`, lexicographically least on ties.
pub fn brute_force_ssbve(bip: &Bipartite, t: usize, budget: OracleBudget) -> Result<(Vec<usize>, usize)> {
    if t > bip.left {
        return Err(Error::InvalidArgument(format!("t = {t} exceeds |L| = {}", bip.left)));
    }
    budget.admit(binomial(bip.left, t))?;
    let mut comb: Vec<usize> = (1..=t).collect();
    let mut best = comb.clone();
    let mut best_val = bip.neighborhood_of(&comb);
    while next_combination(&mut comb, bip.left) {
        let val = bip.neighborhood_of(&comb);
        if val < best_val {
            best_val = val;
            best.clone_from(&comb);
        }
    }
    Ok((best, best_val))
}

/// Exhaustive UTC over all vertex subsets in increasing bitmask order.
pub fn brute_force_utc(inst: &UtcInstance, budget: OracleBudget) -> Result<UtcSolution> {
    inst.validate()?;
    let n = inst.graph.n();
    if n >= 64 {
        return Err(Error::BudgetExceeded { needed: u128::MAX, budget: budget.max_assignments });
    }
    budget.admit(Some(1u128 << n))?;
    let total: f64 = inst.measure.iter().sum();
    let terminal_mask: u64 = inst.terminals.as_slice().iter().map(|&t| 1u64 << (t - 1)).fold(0, |a, b| a | b);
    let mut best: Option<(u64, f64, f64)> = None;
    for mask in 0..(1u64 << n) {
        if (mask & terminal_mask).count_ones() > 1 {
            continue;
        }
        let measure: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| inst.measure[i]).sum();
        if !meets_measure(measure, total, inst.rho, 1.0) {
            continue;
        }
        let cost: f64 = inst
            .graph
            .edges()
            .iter()
            .filter(|e| (mask >> (e.u - 1) ^ mask >> (e.v - 1)) & 1 == 1)
            .map(|e| e.w)
            .sum();
        if best.is_none_or(|(_, c, _)| cost < c) {
            best = Some((mask, cost, measure));
        }
    }
    let (mask, cost, measure) =
        best.ok_or_else(|| Error::Infeasible(format!("no set with at most one terminal reaches rho = {}", inst.rho)))?;
    Ok(UtcSolution { set: VertexSet::from_mask(n, mask), cost, measure, backend: "brute-force" })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utc::solve_utc_exact;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_edges(rng: &mut ChaCha8Rng, n: usize, prob: f64, wmax: u32) -> Vec<(usize, usize, f64)> {
        let mut edges = Vec::new();
        for u in 1..=n {
            for v in (u + 1)..=n {
                if rng.gen_bool(prob) {
                    edges.push((u, v, rng.gen_range(1..=wmax) as f64));
                }
            }
        }
        edges
    }

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> WeightedGraph {
        WeightedGraph::new(n, edges.to_vec()).unwrap()
    }

    #[test]
    fn multiway_examples() {
        let t13 = |n| TerminalSet::new(n, vec![1, 3]).unwrap();
        let path = graph(3, &[(1, 2, 1.0), (2, 3, 1.0)]);
        let (part, obj) = brute_force_multiway(&path, &t13(3), &NormSpec::lp(2, 1.0).unwrap(), OracleBudget::default()).unwrap();
        assert_eq!(obj, 2.0);
        // lexicographically least: vertex 2 joins terminal 1
        assert_eq!(part.parts[0].to_vec(), vec![1, 2]);

        let c4 = graph(4, &[(1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 1, 1.0)]);
        let (_, obj) =
            brute_force_multiway(&c4, &t13(4), &NormSpec::lp(2, f64::INFINITY).unwrap(), OracleBudget::default()).unwrap();
        assert_eq!(obj, 2.0);
        let (_, obj) = brute_force_multiway(&c4, &t13(4), &NormSpec::lp(2, 2.0).unwrap(), OracleBudget::default()).unwrap();
        assert!((obj - 8f64.sqrt()).abs() < 1e-12);

        let empty = graph(5, &[]);
        let t = TerminalSet::new(5, vec![1, 2, 3]).unwrap();
        let (_, obj) = brute_force_multiway(&empty, &t, &NormSpec::lp(3, 1.0).unwrap(), OracleBudget::default()).unwrap();
        assert_eq!(obj, 0.0);
    }

    #[test]
    fn multiway_budget() {
        let g = graph(12, &[]);
        let t = TerminalSet::new(12, vec![1, 2]).unwrap();
        let err = brute_force_multiway(&g, &t, &NormSpec::lp(2, 1.0).unwrap(), OracleBudget::new(1000).unwrap());
        assert_eq!(err.unwrap_err(), Error::BudgetExceeded { needed: 1024, budget: 1000 });
    }

    #[test]
    fn ssbve_examples() {
        let bip = Bipartite::new(2, vec![vec![1]]).unwrap();
        assert_eq!(brute_force_ssbve(&bip, 1, OracleBudget::default()).unwrap(), (vec![2], 0));
        let complete = Bipartite::new(4, vec![vec![1, 2, 3, 4]; 3]).unwrap();
        for t in 1..=4 {
            assert_eq!(brute_force_ssbve(&complete, t, OracleBudget::default()).unwrap().1, 3);
        }
    }

    // independent second enumerator: bitmasks with popcount t
    fn ssbve_by_masks(bip: &Bipartite, t: usize) -> usize {
        (0u32..1 << bip.left)
            .filter(|m| m.count_ones() as usize == t)
            .map(|m| {
                let set: Vec<usize> = (1..=bip.left).filter(|i| m >> (i - 1) & 1 == 1).collect();
                bip.neighborhood_of(&set)
            })
            .min()
            .unwrap()
    }

    proptest! {
        #[test]
        fn ssbve_matches_mask_enumeration(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let left = rng.gen_range(2..=7);
            let right = rng.gen_range(0..=6);
            let nbs = (0..right)
                .map(|_| (1..=left).filter(|_| rng.gen_bool(0.4)).collect())
                .collect();
            let bip = Bipartite::new(left, nbs).unwrap();
            let t = rng.gen_range(1..=left);
            prop_assert_eq!(brute_force_ssbve(&bip, t, OracleBudget::default()).unwrap().1, ssbve_by_masks(&bip, t));
        }

        #[test]
        fn utc_matches_exact(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(3..=9);
            let edges = random_edges(&mut rng, n, 0.4, 5);
            let g = WeightedGraph::new(n, edges).unwrap();
            let k = rng.gen_range(2..=3.min(n));
            let mut vs: Vec<usize> = (1..=n).collect();
            vs.shuffle(&mut rng);
            let t = TerminalSet::new(n, vs[..k].to_vec()).unwrap();
            let mu: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=4) as f64).collect();
            let rho = rng.gen_range(0.05..0.9);
            let inst = UtcInstance { graph: &g, measure: &mu, rho, terminals: &t };
            match (solve_utc_exact(&inst), brute_force_utc(&inst, OracleBudget::default())) {
                (Ok(a), Ok(b)) => prop_assert!((a.cost - b.cost).abs() < 1e-9),
                (Err(Error::Infeasible(_)), Err(Error::Infeasible(_))) => {}
                (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
        }

        #[test]
        fn multiway_invariant_under_relabeling(seed in 0u64..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(4..=8);
            let edges = random_edges(&mut rng, n, 0.5, 3);
            let g = WeightedGraph::new(n, edges.clone()).unwrap();
            let t = TerminalSet::new(n, vec![1, 2, 3]).unwrap();
            let spec = NormSpec::lp(3, 2.0).unwrap();
            let (_, base) = brute_force_multiway(&g, &t, &spec, OracleBudget::default()).unwrap();
            for _ in 0..20 {
                let mut pi: Vec<usize> = (1..=n).collect();
                pi.shuffle(&mut rng);
                let relabeled = edges.iter().map(|&(u, v, w)| (pi[u - 1], pi[v - 1], w)).collect();
                let g2 = WeightedGraph::new(n, relabeled).unwrap();
                let t2 = TerminalSet::new(n, vec![pi[0], pi[1], pi[2]]).unwrap();
                let (_, obj) = brute_force_multiway(&g2, &t2, &spec, OracleBudget::default()).unwrap();
                prop_assert!((obj - base).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn utc_edge_cases() {
        let g = graph(3, &[]);
        let t = TerminalSet::new(3, vec![1, 2]).unwrap();
        let mu = [1.0; 3];
        let inst = UtcInstance { graph: &g, measure: &mu, rho: 0.5, terminals: &t };
        assert_eq!(brute_force_utc(&inst, OracleBudget::default()).unwrap().cost, 0.0);
        let g2 = graph(2, &[(1, 2, 1.0)]);
        let t2 = TerminalSet::new(2, vec![1, 2]).unwrap();
        let inst = UtcInstance { graph: &g2, measure: &mu[..2], rho: 1.0, terminals: &t2 };
        assert!(matches!(brute_force_utc(&inst, OracleBudget::default()), Err(Error::Infeasible(_))));
        assert!(matches!(
            brute_force_utc(&inst, OracleBudget::new(2).unwrap()),
            Err(Error::BudgetExceeded { needed: 4, budget: 2 })
        ));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), Some(10));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(binomial(60, 30), Some(118264581564861424));
    }
}
