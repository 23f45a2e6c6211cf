#![allow(dead_code)]

use std::io::Write;

use mwcut::generate::{generate, Generator};
use mwcut::{TerminalSet, VertexSet, WeightedGraph};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub name: String,
    pub graph: WeightedGraph,
    pub terminals: TerminalSet,
}

/// Round-robin over the three generators with random parameters.
pub fn mixed_instance(rng: &mut ChaCha8Rng, index: usize, n: usize, k: usize) -> Instance {
    let max_weight = rng.gen_range(1..=5);
    let seed = rng.gen();
    let generator = match index % 3 {
        0 => Generator::Gnp { n, k, p: rng.gen_range(0.15..0.5), max_weight },
        1 => Generator::PlantedKPart { n, k, p_in: rng.gen_range(0.5..0.9), p_out: rng.gen_range(0.0..0.2), max_weight },
        _ => Generator::StarChain { n, k },
    };
    let g = generate(&generator, seed).expect("valid generator parameters");
    Instance { name: format!("{generator} seed={seed}"), graph: g.graph, terminals: g.terminals }
}

/// Total weight of edges leaving `set`, recomputed from the edge list.
pub fn boundary(graph: &WeightedGraph, set: &VertexSet) -> f64 {
    graph
        .edges()
        .iter()
        .filter(|e| set.contains(e.u) != set.contains(e.v))
        .map(|e| e.w)
        .sum()
}

/// Minimum `δ(S)` over `S ∋ t_i` avoiding the other terminals, by enumeration.
pub fn brute_isolating_cut(graph: &WeightedGraph, terminals: &TerminalSet, i: usize) -> f64 {
    let n = graph.n();
    let mut best = f64::INFINITY;
    for mask in 0u64..(1 << n) {
        let set = VertexSet::from_mask(n, mask);
        let ok = terminals.as_slice().iter().enumerate().all(|(j, &t)| set.contains(t) == (j + 1 == i));
        if ok {
            best = best.min(boundary(graph, &set));
        }
    }
    best
}

pub fn lp_value(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        x.iter().cloned().fold(0.0, f64::max)
    } else {
        x.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Writes a line straight to stderr so it shows up even when test output is
/// captured.
pub fn announce(line: &str) {
    let _ = writeln!(std::io::stderr().lock(), "{line}");
}

pub fn verdict(criterion: usize, title: &str, passed: bool, detail: &str) {
    announce(&format!(
        "criterion {criterion:>2} [{}] {title}: {detail}",
        if passed { "PASS" } else { "FAIL" }
    ));
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}
