//! Seeded random instance generators.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Partition, TerminalSet, WeightedGraph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    /// Erdős–Rényi `G(n, p)` with integer weights in `1..=max_weight` and
    /// `k` random terminals.
    Gnp { n: usize, k: usize, p: f64, max_weight: u32 },
    /// `k` clusters `{v : (v - 1) mod k = i}` with terminal `i + 1` each;
    /// intra-cluster edges with probability `p_in`, cross edges with `p_out`.
    PlantedKPart { n: usize, k: usize, p_in: f64, p_out: f64, max_weight: u32 },
    /// Terminal centres `1..=k` on a unit path; leaf `v` hangs off centre
    /// `c = (v - k - 1) mod k + 1` and also off `c + 1` when `c < k`.
    StarChain { n: usize, k: usize },
}

impl Generator {
    pub fn kind(&self) -> &'static str {
        match self {
            Generator::Gnp { .. } => "gnp",
            Generator::PlantedKPart { .. } => "planted-k-part",
            Generator::StarChain { .. } => "star-chain",
        }
    }

    fn validate(&self) -> Result<()> {
        let (n, k) = match *self {
            Generator::Gnp { n, k, p, max_weight } => {
                check_prob("p", p)?;
                check_weight(max_weight)?;
                (n, k)
            }
            Generator::PlantedKPart { n, k, p_in, p_out, max_weight } => {
                check_prob("p_in", p_in)?;
                check_prob("p_out", p_out)?;
                check_weight(max_weight)?;
                (n, k)
            }
            Generator::StarChain { n, k } => (n, k),
        };
        if k < 2 || k > n {
            return Err(Error::InvalidArgument(format!("need 2 <= k <= n, got n = {n}, k = {k}")));
        }
        Ok(())
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Gnp { n, k, p, max_weight } => write!(f, "gnp(n={n}, k={k}, p={p}, w<={max_weight})"),
            Generator::PlantedKPart { n, k, p_in, p_out, max_weight } => {
                write!(f, "planted-k-part(n={n}, k={k}, p_in={p_in}, p_out={p_out}, w<={max_weight})")
            }
            Generator::StarChain { n, k } => write!(f, "star-chain(n={n}, k={k})"),
        }
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {p}")))
    }
}

fn check_weight(w: u32) -> Result<()> {
    if w == 0 {
        return Err(Error::InvalidArgument("max weight must be at least 1".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub graph: WeightedGraph,
    pub terminals: TerminalSet,
    /// The planted terminal-labeled partition, when the generator has one.
    pub planted: Option<Partition>,
}

fn weight(rng: &mut ChaCha8Rng, max_weight: u32) -> f64 {
    f64::from(rng.gen_range(1..=max_weight))
}

pub fn generate(generator: &Generator, seed: u64) -> Result<Generated> {
    generator.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match *generator {
        Generator::Gnp { n, k, p, max_weight } => {
            let mut edges = Vec::new();
            for u in 1..=n {
                for v in (u + 1)..=n {
                    if rng.gen_bool(p) {
                        edges.push((u, v, weight(&mut rng, max_weight)));
                    }
                }
            }
            let mut vertices: Vec<usize> = (1..=n).collect();
            vertices.shuffle(&mut rng);
            Ok(Generated {
                graph: WeightedGraph::new(n, edges)?,
                terminals: TerminalSet::new(n, vertices[..k].to_vec())?,
                planted: None,
            })
        }
        Generator::PlantedKPart { n, k, p_in, p_out, max_weight } => {
            let cluster = |v: usize| (v - 1) % k;
            let mut edges = Vec::new();
            for u in 1..=n {
                for v in (u + 1)..=n {
                    let prob = if cluster(u) == cluster(v) { p_in } else { p_out };
                    if rng.gen_bool(prob) {
                        edges.push((u, v, weight(&mut rng, max_weight)));
                    }
                }
            }
            let assignment: Vec<usize> = (1..=n).map(cluster).collect();
            Ok(Generated {
                graph: WeightedGraph::new(n, edges)?,
                terminals: TerminalSet::new(n, (1..=k).collect())?,
                planted: Some(Partition::from_assignment(n, k, &assignment)),
            })
        }
        Generator::StarChain { n, k } => {
            let mut edges: Vec<(usize, usize, f64)> = (1..k).map(|c| (c, c + 1, 1.0)).collect();
            for v in (k + 1)..=n {
                let c = (v - k - 1) % k + 1;
                edges.push((c, v, 1.0));
                if c < k {
                    edges.push((c + 1, v, 1.0));
                }
            }
            Ok(Generated {
                graph: WeightedGraph::new(n, edges)?,
                terminals: TerminalSet::new(n, (1..=k).collect())?,
                planted: None,
            })
        }
    }
}
