//! Monotonic norms on `R^k` with minimization and ordering oracles.
//!
//! Coordinates are 1-indexed. A permutation `perm` reorders a vector as
//! `y[j] = x[perm[j]]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `k` for subset enumeration in the generic minimization oracle.
pub const SUBSET_CAP: usize = 24;
/// Largest `k` for permutation enumeration in the generic ordering oracle.
pub const PERMUTATION_CAP: usize = 8;

const ORACLE_TOL: f64 = 1e-12;

/// Bipartite graph `(L, R, E)` with `L = 1..=left`; `neighborhoods[v]` lists
/// `N(v)` for the right vertex `v` (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartite {
    pub left: usize,
    pub neighborhoods: Vec<Vec<usize>>,
}

impl Bipartite {
    pub fn new(left: usize, mut neighborhoods: Vec<Vec<usize>>) -> Result<Self> {
        for (v, nb) in neighborhoods.iter_mut().enumerate() {
            if let Some(&bad) = nb.iter().find(|&&i| i == 0 || i > left) {
                return Err(Error::InvalidArgument(format!(
                    "right vertex {} lists left vertex {bad} outside 1..={left}",
                    v + 1
                )));
            }
            nb.sort_unstable();
            nb.dedup();
        }
        Ok(Bipartite { left, neighborhoods })
    }

    pub fn right(&self) -> usize {
        self.neighborhoods.len()
    }

    /// `|N(S)|` for `S ⊆ L` given as a membership mask over `1..=left`.
    pub fn neighborhood_size(&self, in_s: &[bool]) -> usize {
        self.neighborhoods
            .iter()
            .filter(|nb| nb.iter().any(|&i| in_s[i - 1]))
            .count()
    }

    pub fn neighborhood_of(&self, set: &[usize]) -> usize {
        let mut mask = vec![false; self.left];
        for &i in set {
            mask[i - 1] = true;
        }
        self.neighborhood_size(&mask)
    }

    /// Sub-instance induced on the left vertices `keep` (relabeled to
    /// `1..=keep.len()` in the given order) and all of `R`.
    pub fn induced_left(&self, keep: &[usize]) -> Bipartite {
        let mut relabel = vec![0; self.left + 1];
        for (idx, &i) in keep.iter().enumerate() {
            relabel[i] = idx + 1;
        }
        let neighborhoods = self
            .neighborhoods
            .iter()
            .map(|nb| nb.iter().filter(|&&i| relabel[i] > 0).map(|&i| relabel[i]).collect())
            .collect();
        Bipartite { left: keep.len(), neighborhoods }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NormKind {
    /// `p = f64::INFINITY` is the max norm.
    Lp { p: f64 },
    WeightedLp { p: f64, c: Vec<f64> },
    /// `sum over v in R of max over i in N(v) of |x_i|`; right vertices with
    /// empty neighbourhoods are dropped.
    NeighborhoodMax { neighborhoods: Vec<Vec<usize>> },
}

/// A monotonic norm on `R^k` together with the oracles it exposes.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSpec {
    k: usize,
    kind: NormKind,
    minimization: bool,
    ordering: bool,
}

impl NormSpec {
    pub fn lp(k: usize, p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
        }
        Self::build(k, NormKind::Lp { p })
    }

    pub fn weighted_lp(p: f64, c: Vec<f64>) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("weighted l_p needs finite p >= 1, got {p}")));
        }
        if let Some(bad) = c.iter().find(|&&ci| !(ci > 0.0 && ci.is_finite())) {
            return Err(Error::InvalidArgument(format!("weights must be positive, got {bad}")));
        }
        Self::build(c.len(), NormKind::WeightedLp { p, c })
    }

    pub fn neighborhood_max(bip: &Bipartite) -> Result<Self> {
        let neighborhoods = bip.neighborhoods.iter().filter(|nb| !nb.is_empty()).cloned().collect();
        Self::build(bip.left, NormKind::NeighborhoodMax { neighborhoods })
    }

    fn build(k: usize, kind: NormKind) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("norm dimension must be positive".into()));
        }
        Ok(NormSpec { k, kind, minimization: true, ordering: true })
    }

    pub fn without_minimization_oracle(mut self) -> Self {
        self.minimization = false;
        self
    }

    pub fn without_ordering_oracle(mut self) -> Self {
        self.ordering = false;
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> &NormKind {
        &self.kind
    }

    pub fn has_minimization_oracle(&self) -> bool {
        self.minimization
    }

    pub fn has_ordering_oracle(&self) -> bool {
        self.ordering
    }

    pub fn permutation_invariant(&self) -> bool {
        match &self.kind {
            NormKind::Lp { .. } => true,
            NormKind::WeightedLp { c, .. } => c.iter().all(|&ci| ci == c[0]),
            NormKind::NeighborhoodMax { .. } => false,
        }
    }

    /// Short textual tag, e.g. `lp:2`.
    pub fn tag(&self) -> String {
        match &self.kind {
            NormKind::Lp { p } if p.is_infinite() => "lp:inf".into(),
            NormKind::Lp { p } => format!("lp:{p}"),
            NormKind::WeightedLp { p, c } => {
                let cs: Vec<String> = c.iter().map(|x| x.to_string()).collect();
                format!("wlp:{p}:{}", cs.join(","))
            }
            NormKind::NeighborhoodMax { neighborhoods } => format!("nmax:{}", neighborhoods.len()),
        }
    }

    /// `||x||`, checking the dimension.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, got: x.len() });
        }
        Ok(self.value(x))
    }

    /// `||x||` without the dimension check.
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            NormKind::Lp { p } => lp_value(x, *p, None),
            NormKind::WeightedLp { p, c } => lp_value(x, *p, Some(c)),
            NormKind::NeighborhoodMax { neighborhoods } => neighborhoods
                .iter()
                .map(|nb| nb.iter().map(|&i| x[i - 1].abs()).fold(0.0, f64::max))
                .sum(),
        }
    }

    /// `||1_A||` for a set (or multiset) of coordinates.
    pub fn indicator_norm(&self, a: &[usize]) -> f64 {
        let mut x = vec![0.0; self.k];
        for &i in a {
            x[i - 1] = 1.0;
        }
        self.value(&x)
    }

    /// `A_i`: an `i`-subset of coordinates minimizing `||1_A||`, returned
    /// sorted; lexicographically smallest among minimizers.
    pub fn minimization_oracle(&self, i: usize) -> Result<Vec<usize>> {
        if !self.minimization {
            return Err(Error::MissingOracle("minimization"));
        }
        if i > self.k {
            return Err(Error::InvalidArgument(format!("subset size {i} exceeds k = {}", self.k)));
        }
        match &self.kind {
            NormKind::Lp { .. } => Ok((1..=i).collect()),
            NormKind::WeightedLp { c, .. } => {
                let mut idx: Vec<usize> = (1..=self.k).collect();
                idx.sort_by(|&a, &b| c[a - 1].total_cmp(&c[b - 1]).then(a.cmp(&b)));
                let mut out = idx[..i].to_vec();
                out.sort_unstable();
                Ok(out)
            }
            NormKind::NeighborhoodMax { .. } => self.enumerate_subsets(i),
        }
    }

    fn enumerate_subsets(&self, i: usize) -> Result<Vec<usize>> {
        if self.k > SUBSET_CAP {
            return Err(Error::OracleCapExceeded { what: "subset", cap: SUBSET_CAP, k: self.k });
        }
        let mut comb: Vec<usize> = (1..=i).collect();
        let mut best = comb.clone();
        let mut best_val = self.indicator_norm(&comb);
        while next_combination(&mut comb, self.k) {
            let val = self.indicator_norm(&comb);
            if val < best_val - ORACLE_TOL * best_val.max(1.0) {
                best_val = val;
                best.clone_from(&comb);
            }
        }
        Ok(best)
    }

    /// Permutation `perm` minimizing `||(x[perm[1]], ..., x[perm[k]])||`,
    /// lexicographically smallest among minimizers.
    pub fn ordering_oracle(&self, x: &[f64]) -> Result<Vec<usize>> {
        if !self.ordering {
            return Err(Error::MissingOracle("ordering"));
        }
        if x.len() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, got: x.len() });
        }
        match &self.kind {
            NormKind::Lp { .. } => Ok((1..=self.k).collect()),
            NormKind::WeightedLp { c, .. } => Ok(rearrangement(x, c)),
            NormKind::NeighborhoodMax { .. } => self.enumerate_permutations(x),
        }
    }

    fn enumerate_permutations(&self, x: &[f64]) -> Result<Vec<usize>> {
        if self.k > PERMUTATION_CAP {
            return Err(Error::OracleCapExceeded { what: "permutation", cap: PERMUTATION_CAP, k: self.k });
        }
        let mut perm: Vec<usize> = (1..=self.k).collect();
        let mut best = perm.clone();
        let mut best_val = self.value(&apply_permutation(x, &perm));
        while next_permutation(&mut perm) {
            let val = self.value(&apply_permutation(x, &perm));
            if val < best_val - ORACLE_TOL * best_val.max(1.0) {
                best_val = val;
                best.clone_from(&perm);
            }
        }
        Ok(best)
    }
}

/// `y[j] = x[perm[j]]` with 1-indexed `perm`.
pub fn apply_permutation(x: &[f64], perm: &[usize]) -> Vec<f64> {
    perm.iter().map(|&p| x[p - 1]).collect()
}

fn lp_value(x: &[f64], p: f64, c: Option<&[f64]>) -> f64 {
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || scale.is_infinite() {
        return scale;
    }
    if p.is_infinite() {
        return scale;
    }
    let sum: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| c.map_or(1.0, |c| c[i]) * (v.abs() / scale).powf(p))
        .sum();
    scale * sum.powf(1.0 / p)
}

// Largest |x| paired with the smallest weight. Positions with equal weight
// form a class that must receive a fixed multiset of values; the
// lexicographically least permutation takes, at each position, the smallest
// unused index whose value the class still needs.
fn rearrangement(x: &[f64], c: &[f64]) -> Vec<usize> {
    let k = x.len();
    let mut positions: Vec<usize> = (0..k).collect();
    positions.sort_by(|&a, &b| c[a].total_cmp(&c[b]).then(a.cmp(&b)));
    let mut values: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    values.sort_by(|a, b| b.total_cmp(a));

    // need[class] = multiset of values owed to positions of that class
    let mut class_of = vec![0; k];
    let mut need: Vec<Vec<f64>> = Vec::new();
    for (r, &pos) in positions.iter().enumerate() {
        if r == 0 || c[pos] != c[positions[r - 1]] {
            need.push(Vec::new());
        }
        class_of[pos] = need.len() - 1;
        need.last_mut().unwrap().push(values[r]);
    }
    let mut used = vec![false; k];
    let mut perm = Vec::with_capacity(k);
    for pos in 0..k {
        let class = &mut need[class_of[pos]];
        let idx = (0..k)
            .find(|&i| !used[i] && class.iter().any(|&v| v == x[i].abs()))
            .expect("rearrangement multiset covers every position");
        let slot = class.iter().position(|&v| v == x[idx].abs()).unwrap();
        class.swap_remove(slot);
        used[idx] = true;
        perm.push(idx + 1);
    }
    perm
}

/// Advances a sorted combination over `1..=n` in lexicographic order.
pub fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let r = comb.len();
    let mut i = r;
    while i > 0 {
        i -= 1;
        if comb[i] < n - (r - 1 - i) {
            comb[i] += 1;
            for j in i + 1..r {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Advances to the next permutation in lexicographic order.
pub fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// `I_0, ..., I_L` with `L = floor(log2 k)`: `I_i = A_{2^i}` for `i < L` and
/// `|I_L| = k - 2^L` (empty when `k` is a power of two).
pub fn compute_index_sets(spec: &NormSpec) -> Result<Vec<Vec<usize>>> {
    let k = spec.k();
    let levels = floor_log2(k);
    let mut sets = Vec::with_capacity(levels + 1);
    for i in 0..levels {
        sets.push(spec.minimization_oracle(1 << i)?);
    }
    let last = k - (1 << levels);
    sets.push(if last == 0 { Vec::new() } else { spec.minimization_oracle(last)? });
    Ok(sets)
}

pub fn floor_log2(k: usize) -> usize {
    assert!(k > 0);
    (usize::BITS - 1 - k.leading_zeros()) as usize
}

/// Parses `lp:<p>`, `wlp:<p>:<c1,..,ck>` or `nmax:<path>`; `load` reads a
/// bipartite instance for the last form.
pub fn parse_norm_tag(tag: &str, k: usize, load: &dyn Fn(&str) -> Result<Bipartite>) -> Result<NormSpec> {
    let (head, rest) = tag.split_once(':').ok_or_else(|| Error::UnknownTag(tag.to_string()))?;
    let spec = match head {
        "lp" => NormSpec::lp(k, parse_p(rest)?)?,
        "wlp" => {
            let (p, cs) = rest.split_once(':').ok_or_else(|| Error::UnknownTag(tag.to_string()))?;
            let c = cs
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad weight `{s}`"))))
                .collect::<Result<Vec<_>>>()?;
            NormSpec::weighted_lp(parse_p(p)?, c)?
        }
        "nmax" => NormSpec::neighborhood_max(&load(rest)?)?,
        _ => return Err(Error::UnknownTag(tag.to_string())),
    };
    if spec.k() != k {
        return Err(Error::DimensionMismatch { expected: k, got: spec.k() });
    }
    Ok(spec)
}

pub fn parse_p(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "infinity" | "max" => Ok(f64::INFINITY),
        t => t.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad p `{t}`"))),
    }
}
