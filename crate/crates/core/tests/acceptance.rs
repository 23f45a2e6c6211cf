mod common;

use std::time::Instant;

use common::{boundary, brute_isolating_cut, lp_value, median, mixed_instance, verdict, Instance};
use mwcut::covering::{binary_search_opt, cover_lp, isolating_cuts, Cover};
use mwcut::format::{parse_instance, write_instance};
use mwcut::generate::{generate, Generator};
use mwcut::norms::{apply_permutation, next_combination, next_permutation, Bipartite};
use mwcut::oracle::{brute_force_multiway, brute_force_ssbve, brute_force_utc, OracleBudget};
use mwcut::partitioning::{
    aggregate_lp, bucket_maxima, effective_p, ordering_assignment, solve_lp_multiway, solve_norm_multiway, trial_rng,
    uncross_lp, uncross_norm, UncrossedPartition,
};
use mwcut::reduction::{build_reduction, extract_small_set, iterate_extraction, verify_sandwich, OracleSolver, SsbveInstance};
use mwcut::report::{run_benchmark, BenchInstance, Mode, RunOptions};
use mwcut::utc::{solve_utc_exact, UtcInstance};
use mwcut::{
    Error, NormSpec, Partition, PipelineConfig, TerminalSet, UtcBackend, UtcSelect, Variant, VertexSet, WeightedGraph,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PS: [f64; 4] = [1.0, 2.0, 4.0, f64::INFINITY];

fn exact_cfg(seed: u64) -> PipelineConfig {
    PipelineConfig { seed, utc: UtcSelect::Exact, ..PipelineConfig::default() }
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, prob: f64, max_weight: u32) -> WeightedGraph {
    let mut edges = Vec::new();
    for u in 1..=n {
        for v in (u + 1)..=n {
            if rng.gen_bool(prob) {
                edges.push((u, v, f64::from(rng.gen_range(1..=max_weight))));
            }
        }
    }
    WeightedGraph::new(n, edges).unwrap()
}

fn random_terminals(rng: &mut ChaCha8Rng, n: usize, k: usize) -> TerminalSet {
    let mut vs: Vec<usize> = (1..=n).collect();
    vs.shuffle(rng);
    TerminalSet::new(n, vs[..k].to_vec()).unwrap()
}

/// Exactly one terminal per part, part `i` holding `t_i`, covering `V`
/// without overlap; checked from vertex counts.
fn labeled_partition_ok(part: &Partition, n: usize, terminals: &TerminalSet) -> bool {
    if part.parts.len() != terminals.k() {
        return false;
    }
    let mut count = vec![0usize; n + 1];
    for p in &part.parts {
        for v in p.iter() {
            count[v] += 1;
        }
    }
    let covered = (1..=n).all(|v| count[v] == 1);
    let terminals_ok = part.parts.iter().enumerate().all(|(i, p)| {
        terminals.as_slice().iter().enumerate().all(|(j, &t)| p.contains(t) == (i == j))
    });
    covered && terminals_ok
}

/// Cover statistics recomputed by replaying the halving of the measure.
struct CoverFacts {
    min_frequency: usize,
    fraction_sum: f64,
    size: usize,
}

fn cover_facts(cover: &Cover, n: usize) -> CoverFacts {
    let mut mu = vec![1.0f64; n + 1];
    let mut fraction_sum = 0.0;
    let mut freq = vec![0usize; n + 1];
    for s in &cover.sets {
        let total: f64 = mu[1..].iter().sum();
        let inside: f64 = s.set.iter().map(|v| mu[v]).sum();
        fraction_sum += inside / total;
        for v in s.set.iter() {
            mu[v] /= 2.0;
            freq[v] += 1;
        }
    }
    CoverFacts { min_frequency: freq[1..].iter().copied().min().unwrap_or(0), fraction_sum, size: cover.sets.len() }
}

fn floor_log2(n: usize) -> usize {
    (usize::BITS - 1 - n.leading_zeros()) as usize
}

#[test]
fn criterion_01_feasibility() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut accepted, mut rejected, mut bad) = (0, 0, Vec::new());
    for i in 0..500 {
        let n = rng.gen_range(6..=40);
        let k = rng.gen_range(2..=6);
        let inst = mixed_instance(&mut rng, i, n, k);
        let p = PS[i % 4];
        let utc = if n <= 14 { UtcSelect::Exact } else { UtcSelect::Heuristic };
        let cfg = PipelineConfig { seed: i as u64, utc, ..PipelineConfig::default() };
        match solve_lp_multiway(&inst.graph, &inst.terminals, p, &cfg) {
            Ok(out) => {
                accepted += 1;
                if !labeled_partition_ok(&out.partition, n, &inst.terminals) {
                    bad.push(inst.name.clone());
                }
            }
            Err(Error::AllTrialsRejected { .. }) => rejected += 1,
            Err(e) => bad.push(format!("{}: {e}", inst.name)),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = bad.is_empty() && secs < 120.0;
    verdict(
        1,
        "feasibility",
        passed,
        &format!("{accepted} accepted, {rejected} rejected-all, {} bad, {secs:.1}s (< 120s)", bad.len()),
    );
    assert!(passed, "{bad:?}");
}

#[test]
fn criterion_02_covering_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut failures = Vec::new();
    let mut runs = 0;
    for i in 0..300 {
        let n = rng.gen_range(6..=30);
        let k = rng.gen_range(2..=6);
        let inst = mixed_instance(&mut rng, i, n, k);
        let backend = if n <= 14 { UtcBackend::Exact } else { UtcBackend::Heuristic };
        let p = effective_p(PS[i % 4], k);
        let cover = cover_lp(&inst.graph, &inst.terminals, p, backend).unwrap();
        runs += 1;
        let facts = cover_facts(&cover, n);
        let budget = 4.0 * (n as f64).ln() + 1.0;
        if facts.min_frequency < floor_log2(n) + 1 {
            failures.push(format!("{}: frequency {}", inst.name, facts.min_frequency));
        }
        if facts.fraction_sum > budget + 1e-9 {
            failures.push(format!("{}: measure {} > {budget}", inst.name, facts.fraction_sum));
        }
        if backend == UtcBackend::Exact && facts.size as f64 > 2.0 * k as f64 * budget {
            failures.push(format!("{}: size {}", inst.name, facts.size));
        }
    }
    // norm covers obey (a) and (b) as well
    for i in 0..40 {
        let n = rng.gen_range(6..=12);
        let k = rng.gen_range(2..=4);
        let inst = mixed_instance(&mut rng, i, n, k);
        let spec = NormSpec::lp(k, PS[i % 4]).unwrap();
        let search = binary_search_opt(&inst.graph, &inst.terminals, &spec, 1.0, UtcBackend::Exact).unwrap();
        runs += 1;
        let facts = cover_facts(&search.cover, n);
        if facts.min_frequency < floor_log2(n) + 1 || facts.fraction_sum > 4.0 * (n as f64).ln() + 1.0 + 1e-9 {
            failures.push(format!("norm {}: {} / {}", inst.name, facts.min_frequency, facts.fraction_sum));
        }
    }
    verdict(2, "covering invariants", failures.is_empty(), &format!("{runs} covers, {} violations", failures.len()));
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn criterion_03_covering_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_power = 0.0f64;
    let mut worst_sum = 0.0f64;
    let mut failures = Vec::new();
    for i in 0..50 {
        let n = rng.gen_range(6..=12);
        let inst = mixed_instance(&mut rng, i, n, 3);
        let p = [1.0, 2.0, 4.0][i % 3];
        let cover = cover_lp(&inst.graph, &inst.terminals, p, UtcBackend::Exact).unwrap();
        let (_, opt) =
            brute_force_multiway(&inst.graph, &inst.terminals, &NormSpec::lp(3, p).unwrap(), OracleBudget::default()).unwrap();
        let costs: Vec<f64> = cover.sets.iter().map(|s| boundary(&inst.graph, &s.set)).collect();
        let factor = 10.0 * (4.0 * (n as f64).ln() + 1.0);
        let power: f64 = costs.iter().map(|c| c.powf(p)).sum();
        let sum: f64 = costs.iter().sum();
        let power_bound = factor * opt.powf(p);
        let sum_bound = factor * 3f64.powf(1.0 - 1.0 / p) * opt;
        if power > power_bound * (1.0 + 1e-6) || sum > sum_bound * (1.0 + 1e-6) {
            failures.push(format!("{}: {power} vs {power_bound}, {sum} vs {sum_bound}", inst.name));
        }
        if power_bound > 0.0 {
            worst_power = worst_power.max(power / power_bound);
            worst_sum = worst_sum.max(sum / sum_bound);
        }
    }
    verdict(
        3,
        "covering cost",
        failures.is_empty(),
        &format!("50 instances, worst fraction of bound: power {worst_power:.3}, sum {worst_sum:.3}"),
    );
    assert!(failures.is_empty(), "{failures:?}");
}

/// Independent checks on one uncrossing trial.
fn uncrossing_violations(up: &UncrossedPartition, graph: &WeightedGraph) -> Vec<String> {
    let n = graph.n();
    let mut out = Vec::new();
    let mut count = vec![0usize; n + 1];
    for set in up.parts.iter().map(|p| &p.set).chain(std::iter::once(&up.residual)) {
        for v in set.iter() {
            count[v] += 1;
        }
    }
    if (1..=n).any(|v| count[v] != 1) {
        out.push("not a partition".into());
    }
    for (i, p) in up.parts.iter().enumerate() {
        let (c, z) = (boundary(graph, &p.set), boundary(graph, &p.source));
        if c > 2.0 * z + 1e-9 {
            out.push(format!("part {i}: {c} > 2 * {z}"));
        }
    }
    if up.potentials.windows(2).any(|w| !(w[1] < w[0])) {
        out.push(format!("potential not strictly decreasing: {:?}", up.potentials));
    }
    let final_potential: f64 =
        up.parts.iter().map(|p| boundary(graph, &p.set)).sum::<f64>() + boundary(graph, &up.residual);
    if (final_potential - up.potentials.last().unwrap()).abs() > 1e-9 * (1.0 + final_potential) {
        out.push("recorded potential differs".into());
    }
    out
}

/// Bucket inequality recomputed from the uncrossed parts.
fn bucket_violation(up: &UncrossedPartition, graph: &WeightedGraph, k: usize) -> Option<String> {
    let mut q: Vec<f64> = up
        .parts
        .iter()
        .filter(|p| p.terminal.is_none() && !p.set.is_empty())
        .map(|p| boundary(graph, &p.set))
        .collect();
    if !up.residual.is_empty() {
        q.push(boundary(graph, &up.residual));
    }
    q.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = q.iter().sum();
    (0..k).find_map(|i| {
        let tail: f64 = q.iter().enumerate().filter(|(j, _)| *j >= k && j % k == i).map(|(_, c)| c).sum();
        (tail > total / k as f64 + 1e-9 * (1.0 + total)).then(|| format!("bucket {i}: {tail} > {total}/{k}"))
    })
}

#[test]
fn criterion_04_05_uncrossing_and_buckets() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut trials, mut repaired, mut aggregated) = (0, 0, 0);
    let mut failures = Vec::new();
    let mut bucket_failures = Vec::new();
    let mut i = 0;
    while trials < 1000 {
        let n = rng.gen_range(6..=16);
        let k = rng.gen_range(2..=5);
        let inst = mixed_instance(&mut rng, i, n, k);
        let p = effective_p(PS[i % 4], k);
        i += 1;
        let cover = cover_lp(&inst.graph, &inst.terminals, p, UtcBackend::Exact).unwrap();
        for stream in 0..10 {
            let up = match uncross_lp(&cover, &inst.graph, &inst.terminals, &mut trial_rng(i as u64, stream)) {
                Ok(up) => up,
                Err(e) => {
                    failures.push(format!("{}: {e}", inst.name));
                    continue;
                }
            };
            trials += 1;
            repaired += usize::from(up.repairs > 0);
            failures.extend(uncrossing_violations(&up, &inst.graph).into_iter().map(|f| format!("{}: {f}", inst.name)));
            if aggregate_lp(&up, &inst.graph, &inst.terminals).is_ok() {
                aggregated += 1;
                if let Some(f) = bucket_violation(&up, &inst.graph, k) {
                    bucket_failures.push(format!("{}: {f}", inst.name));
                }
            }
        }
    }
    // norm-variant sequences with isolating cuts in front
    let mut norm_trials = 0;
    for j in 0..30 {
        let n = rng.gen_range(6..=12);
        let k = rng.gen_range(2..=4);
        let inst = mixed_instance(&mut rng, j, n, k);
        let spec = NormSpec::lp(k, 2.0).unwrap();
        let search = binary_search_opt(&inst.graph, &inst.terminals, &spec, 1.0, UtcBackend::Exact).unwrap();
        for stream in 0..5 {
            let up = uncross_norm(&search.cover, &inst.graph, &inst.terminals, &mut trial_rng(j as u64, stream)).unwrap();
            norm_trials += 1;
            repaired += usize::from(up.repairs > 0);
            failures.extend(uncrossing_violations(&up, &inst.graph));
        }
    }
    verdict(
        4,
        "uncrossing",
        failures.is_empty(),
        &format!("{trials} lp + {norm_trials} norm trials, {repaired} with repairs, {} violations", failures.len()),
    );
    verdict(
        5,
        "aggregation buckets",
        bucket_failures.is_empty(),
        &format!("{aggregated} aggregated trials, {} violations", bucket_failures.len()),
    );
    assert!(failures.is_empty(), "{failures:?}");
    assert!(bucket_failures.is_empty(), "{bucket_failures:?}");
}

#[test]
fn criterion_06_end_to_end_ratio() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut ratios = Vec::new();
    let mut below_one = Vec::new();
    let mut rejected = 0;
    for i in 0..100 {
        let n = rng.gen_range(6..=11);
        let inst = mixed_instance(&mut rng, i, n, 3);
        let p = [1.0, 2.0, f64::INFINITY][i % 3];
        let (_, opt) =
            brute_force_multiway(&inst.graph, &inst.terminals, &NormSpec::lp(3, p).unwrap(), OracleBudget::default()).unwrap();
        match solve_lp_multiway(&inst.graph, &inst.terminals, p, &exact_cfg(i as u64)) {
            Ok(out) => {
                let value = lp_value(&out.partition.cut_vector(&inst.graph).0, p);
                let ratio = if opt > 0.0 { value / opt } else if value == 0.0 { 1.0 } else { f64::INFINITY };
                if ratio < 1.0 - 1e-9 {
                    below_one.push(format!("{}: {ratio}", inst.name));
                }
                ratios.push(ratio);
            }
            Err(Error::AllTrialsRejected { .. }) => rejected += 1,
            Err(e) => panic!("{}: {e}", inst.name),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let med = median(&mut ratios);
    let passed = below_one.is_empty() && med <= 3.0 && max <= 8.0 && secs < 300.0;
    verdict(
        6,
        "end-to-end ratio",
        passed,
        &format!("{} solved, {rejected} rejected-all, median {med:.4}, max {max:.4}, {secs:.1}s", ratios.len()),
    );
    assert!(passed, "{below_one:?}");
}

fn shipped_norms(k: usize, rng: &mut ChaCha8Rng) -> Vec<NormSpec> {
    let mut out: Vec<NormSpec> = PS.iter().map(|&p| NormSpec::lp(k, p).unwrap()).collect();
    for p in [1.0, 2.0, 3.0] {
        let c = (0..k).map(|_| f64::from(rng.gen_range(1..=4))).collect();
        out.push(NormSpec::weighted_lp(p, c).unwrap());
    }
    let right = rng.gen_range(1..=6);
    let nbs = (0..right)
        .map(|_| {
            let mut nb: Vec<usize> = (1..=k).filter(|_| rng.gen_bool(0.4)).collect();
            if nb.is_empty() {
                nb.push(rng.gen_range(1..=k));
            }
            nb
        })
        .collect();
    out.push(NormSpec::neighborhood_max(&Bipartite::new(k, nbs).unwrap()).unwrap());
    out
}

#[test]
fn criterion_07_norm_pipeline() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut failures = Vec::new();

    // (a) the first k uncrossed parts stay within twice the isolating cuts
    let mut runs = 0;
    for i in 0..40 {
        let n = rng.gen_range(6..=11);
        let k = rng.gen_range(2..=4);
        let inst = mixed_instance(&mut rng, i, n, k);
        let norms = shipped_norms(k, &mut rng);
        let spec = &norms[i % norms.len()];
        let iso: Vec<f64> = (1..=k).map(|t| brute_isolating_cut(&inst.graph, &inst.terminals, t)).collect();
        let computed: Vec<f64> = isolating_cuts(&inst.graph, &inst.terminals).unwrap().iter().map(|c| c.1).collect();
        if iso.iter().zip(&computed).any(|(a, b)| (a - b).abs() > 1e-9) {
            failures.push(format!("{}: isolating cuts {computed:?} vs {iso:?}", inst.name));
        }
        let search = binary_search_opt(&inst.graph, &inst.terminals, spec, 1.0, UtcBackend::Exact).unwrap();
        for stream in 0..7 {
            let up = uncross_norm(&search.cover, &inst.graph, &inst.terminals, &mut trial_rng(7, stream)).unwrap();
            let first: Vec<f64> = up.parts[..k].iter().map(|p| boundary(&inst.graph, &p.set)).collect();
            runs += 1;
            if spec.value(&first) > 2.0 * spec.value(&iso) + 1e-9 {
                failures.push(format!("{}: prefix {first:?} vs isolating {iso:?}", inst.name));
            }
        }
        let cfg = PipelineConfig { variant: Variant::NormMin, ..exact_cfg(i as u64) };
        match solve_norm_multiway(&inst.graph, &inst.terminals, spec, &cfg) {
            Ok(out) if !labeled_partition_ok(&out.partition, n, &inst.terminals) => {
                failures.push(format!("{}: pipeline output not labeled", inst.name))
            }
            Ok(_) | Err(Error::AllTrialsRejected { .. }) => {}
            Err(e) => failures.push(format!("{}: {e}", inst.name)),
        }
    }

    // (b) ordering assignment stays within 3||v||
    let mut vectors = 0;
    for k in [2, 3, 5, 8] {
        for spec in shipped_norms(k, &mut rng) {
            for _ in 0..200 {
                let v: Vec<f64> = (0..k).map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..10.0) }).collect();
                let a = ordering_assignment(&spec, &bucket_maxima(&v)).unwrap();
                vectors += 1;
                if a.assembled_norm > 3.0 * spec.value(&v) + 1e-9 {
                    failures.push(format!("{}: {} > 3 * {}", spec.tag(), a.assembled_norm, spec.value(&v)));
                }
            }
        }
    }

    // (c) the guessed optimum lies within a factor 2 of the true one
    let mut worst_over: f64 = 0.0;
    let mut worst_under: f64 = f64::INFINITY;
    for i in 0..20 {
        let n = rng.gen_range(6..=10);
        let k = 3 + i % 2;
        let inst = mixed_instance(&mut rng, i, n, k);
        let spec = NormSpec::lp(k, [1.0, 2.0][i % 2]).unwrap();
        let (_, opt) = brute_force_multiway(&inst.graph, &inst.terminals, &spec, OracleBudget::default()).unwrap();
        let search = binary_search_opt(&inst.graph, &inst.terminals, &spec, 1.0, UtcBackend::Exact).unwrap();
        if opt > 0.0 {
            worst_over = worst_over.max(search.guess / opt);
            worst_under = worst_under.min(search.guess / opt);
        }
        if search.guess > 2.0 * opt + 1e-9 || 2.0 * search.guess < opt - 1e-9 {
            failures.push(format!("{}: guess {} vs opt {opt}", inst.name, search.guess));
        }
    }
    verdict(
        7,
        "norm pipeline",
        failures.is_empty(),
        &format!(
            "{runs} prefix checks, {vectors} ordering vectors, guess/OPT in [{worst_under:.3}, {worst_over:.3}] (allowed [0.5, 2])"
        ),
    );
    assert!(failures.is_empty(), "{failures:?}");
}

fn enumerate_min(spec: &NormSpec, i: usize) -> (Vec<usize>, f64) {
    let k = spec.k();
    let mut comb: Vec<usize> = (1..=i).collect();
    let mut best = (comb.clone(), spec.indicator_norm(&comb));
    while next_combination(&mut comb, k) {
        let v = spec.indicator_norm(&comb);
        if v < best.1 - 1e-12 * best.1.max(1.0) {
            best = (comb.clone(), v);
        }
    }
    best
}

fn enumerate_order(spec: &NormSpec, x: &[f64]) -> f64 {
    let mut perm: Vec<usize> = (1..=x.len()).collect();
    let mut best = spec.value(&apply_permutation(x, &perm));
    while next_permutation(&mut perm) {
        best = best.min(spec.value(&apply_permutation(x, &perm)));
    }
    best
}

#[test]
fn criterion_08_oracle_cross_validation() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut failures = Vec::new();
    let (mut feasible, mut infeasible) = (0, 0);
    for _ in 0..200 {
        let n = rng.gen_range(3..=12);
        let prob = rng.gen_range(0.1..0.6);
        let graph = random_graph(&mut rng, n, prob, 6);
        let k = rng.gen_range(2..=n.min(4));
        let terminals = random_terminals(&mut rng, n, k);
        let mu: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(1..=8))).collect();
        let rho = rng.gen_range(0.02..1.0);
        let inst = UtcInstance { graph: &graph, measure: &mu, rho, terminals: &terminals };
        match (solve_utc_exact(&inst), brute_force_utc(&inst, OracleBudget::default())) {
            (Ok(a), Ok(b)) => {
                feasible += 1;
                let total: f64 = mu.iter().sum();
                let measure = a.set.measure(&mu);
                if (a.cost - b.cost).abs() > 1e-9
                    || (boundary(&graph, &a.set) - a.cost).abs() > 1e-9
                    || measure < rho * total - 1e-9
                    || a.set.terminal_count(&terminals) > 1
                {
                    failures.push(format!("utc n={n}: exact {} vs brute {}", a.cost, b.cost));
                }
            }
            (Err(Error::Infeasible(_)), Err(Error::Infeasible(_))) => infeasible += 1,
            (a, b) => failures.push(format!("utc mismatch {a:?} vs {b:?}")),
        }
    }
    let mut oracle_checks = 0;
    for k in 2..=8 {
        for spec in shipped_norms(k, &mut rng) {
            for i in 1..=k {
                let got = spec.minimization_oracle(i).unwrap();
                let (want, value) = enumerate_min(&spec, i);
                oracle_checks += 1;
                if got != want || (spec.indicator_norm(&got) - value).abs() > 1e-12 * value.max(1.0) {
                    failures.push(format!("{} min({i}): {got:?} vs {want:?}", spec.tag()));
                }
            }
            for _ in 0..10 {
                let x: Vec<f64> = (0..k).map(|_| f64::from(rng.gen_range(0..6))).collect();
                let perm = spec.ordering_oracle(&x).unwrap();
                let got = spec.value(&apply_permutation(&x, &perm));
                let want = enumerate_order(&spec, &x);
                oracle_checks += 1;
                if (got - want).abs() > 1e-9 * want.max(1.0) {
                    failures.push(format!("{} order({x:?}): {got} vs {want}", spec.tag()));
                }
            }
        }
    }
    verdict(
        8,
        "oracle cross-validation",
        failures.is_empty(),
        &format!("utc {feasible} feasible + {infeasible} infeasible agree, {oracle_checks} norm-oracle checks"),
    );
    assert!(failures.is_empty(), "{failures:?}");
}

fn random_bipartite(rng: &mut ChaCha8Rng, k: usize, right: usize) -> Bipartite {
    let nbs = (0..right).map(|_| (1..=k).filter(|_| rng.gen_bool(0.35)).collect()).collect();
    Bipartite::new(k, nbs).unwrap()
}

#[test]
fn criterion_09_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut failures = Vec::new();
    for _ in 0..100 {
        let k = rng.gen_range(2..=7);
        let t = rng.gen_range(1..=k);
        let right = rng.gen_range(0..=8);
        let ssbve = SsbveInstance::new(random_bipartite(&mut rng, k, right), t).unwrap();
        let red = build_reduction(&ssbve).unwrap();
        let mut assignment: Vec<usize> = (0..k).collect();
        assignment.extend((0..t).map(|_| rng.gen_range(0..k)));
        let part = Partition::from_assignment(k + t, k, &assignment);
        let report = verify_sandwich(&part, &red).unwrap();
        for i in 0..k {
            let y = assignment[k..].iter().filter(|&&a| a == i).count() as f64;
            let x = boundary(&red.graph, &part.parts[i]);
            if x != (k as f64 - 2.0) * y + t as f64 || report.y[i] != y {
                failures.push(format!("x_{i} = {x}, y_{i} = {y}, k = {k}, t = {t}"));
            }
        }
        if !report.holds {
            failures.push(format!("sandwich {} <= {} <= {}", report.lower, report.cost, report.upper));
        }
    }
    let mut log = Vec::new();
    for _ in 0..25 {
        let k = rng.gen_range(4..=6);
        let t = rng.gen_range(1..=3);
        let right = rng.gen_range(1..=8);
        let ssbve = SsbveInstance::new(random_bipartite(&mut rng, k, right), t).unwrap();
        let solver = OracleSolver::default();
        let one = extract_small_set(&ssbve, &solver).unwrap();
        let j = one.group.expect("k >= 4 runs the solver");
        if one.set.len() > t || ssbve.bip.neighborhood_of(&one.set) as f64 > one.y_norm / f64::from(1u32 << j) + 1e-9 {
            failures.push(format!("extraction {:?} with y = {:?}", one.set, one.y));
        }
        let all = iterate_extraction(&ssbve, &solver).unwrap();
        let (_, best) = brute_force_ssbve(&ssbve.bip, t, OracleBudget::default()).unwrap();
        if all.set.len() != t || all.neighborhood < best {
            failures.push(format!("iteration returned {:?}", all.set));
        }
        log.push(format!("{}/{}", all.neighborhood, best));
    }
    verdict(
        9,
        "reduction",
        failures.is_empty(),
        &format!("100 sandwiches, 25 extractions; |N(S)|/optimum: {}", log.join(" ")),
    );
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn criterion_10_determinism() {
    let instances = || -> Vec<BenchInstance> {
        let mut rng = ChaCha8Rng::seed_from_u64(1010);
        (0..12)
            .map(|i| {
                let n = rng.gen_range(6..=10);
                let Instance { name, graph, terminals } = mixed_instance(&mut rng, i, n, 3);
                BenchInstance { name, graph, terminals }
            })
            .collect()
    };
    let lp2 = |k: usize| NormSpec::lp(k, 2.0);
    let run = |variant: Variant| {
        let cfg = PipelineConfig { variant, ..exact_cfg(42) };
        let opts = RunOptions { mode: Mode::Compare, ..RunOptions::default() };
        let mut buf = Vec::new();
        run_benchmark(instances(), &lp2, &cfg, &opts, &mut buf).unwrap();
        buf
    };
    let mut passed = true;
    let mut bytes = 0;
    for variant in [Variant::Lp, Variant::NormMin, Variant::NormOrdering] {
        let (a, b) = (run(variant), run(variant));
        passed &= a == b;
        bytes += a.len();
    }
    verdict(10, "determinism", passed, &format!("3 variants x 12 instances, {bytes} bytes identical across runs"));
    assert!(passed);
}

#[test]
fn criterion_11_format_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut failures = Vec::new();
    for i in 0..200 {
        let n = rng.gen_range(2..=30);
        let k = rng.gen_range(2..=n.min(6));
        let (graph, terminals) = if i % 2 == 0 {
            let inst = mixed_instance(&mut rng, i, n.max(k), k);
            (inst.graph, inst.terminals)
        } else {
            // fractional and extreme weights
            let mut edges = Vec::new();
            for u in 1..=n {
                for v in (u + 1)..=n {
                    if rng.gen_bool(0.3) {
                        let w = match rng.gen_range(0..4) {
                            0 => rng.gen::<f64>(),
                            1 => rng.gen::<f64>() * 1e9,
                            2 => f64::from(rng.gen_range(0..100)),
                            _ => 1.0 / f64::from(rng.gen_range(1..1000)),
                        };
                        edges.push((u, v, w));
                    }
                }
            }
            (WeightedGraph::new(n, edges).unwrap(), random_terminals(&mut rng, n, k))
        };
        let text = write_instance(&graph, &terminals);
        match parse_instance(&text) {
            Ok((g, t)) if g == graph && t == terminals && write_instance(&g, &t) == text => {}
            other => failures.push(format!("instance {i}: {other:?}")),
        }
    }
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/malformed");
    let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    let mut positioned = 0;
    for path in &files {
        let text = std::fs::read_to_string(path).unwrap();
        let expected = text.lines().next().and_then(|l| l.strip_prefix("c expect ")).map(str::trim).map(String::from);
        let result = std::panic::catch_unwind(|| parse_instance(&text));
        match result {
            Ok(Err(Error::Parse { line, column, .. })) if line >= 1 && column >= 1 => {
                if expected.as_deref() == Some(format!("{line}:{column}").as_str()) {
                    positioned += 1;
                } else {
                    failures.push(format!("{}: got {line}:{column}, expected {expected:?}", path.display()));
                }
            }
            other => failures.push(format!("{}: {other:?}", path.display())),
        }
    }
    let passed = failures.is_empty() && files.len() == 10;
    verdict(
        11,
        "format round-trip",
        passed,
        &format!("200 round-trips, {positioned}/{} malformed files with expected positions", files.len()),
    );
    assert!(passed, "{failures:?}");
}

#[test]
fn star_chain_fixture_matches_generator() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let text = std::fs::read_to_string(dir.join("star_chain_n6_k3.mwc")).unwrap();
    let (graph, terminals) = parse_instance(&text).unwrap();
    let generated = generate(&Generator::StarChain { n: 6, k: 3 }, 0).unwrap();
    assert_eq!(graph, generated.graph);
    let golden: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("star_chain_n6_k3.json")).unwrap()).unwrap();
    for (key, p) in [("l1", 1.0), ("l2", 2.0), ("linf", f64::INFINITY)] {
        let want = golden[key].as_f64().unwrap();
        let spec = NormSpec::lp(3, p).unwrap();
        let (_, opt) = brute_force_multiway(&graph, &terminals, &spec, OracleBudget::default()).unwrap();
        assert!((opt - want).abs() < 1e-12, "{key}: {opt} vs {want}");
        let out = solve_lp_multiway(&graph, &terminals, p, &exact_cfg(0)).unwrap();
        assert!(out.objective >= want - 1e-9);
    }
    let _ = VertexSet::empty(1);
}
