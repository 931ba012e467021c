//! Random-walk corpus generation.
//!
//! Three transition models drive the walks: uniform over neighbors
//! (truncated), search-biased with return/in-out parameters p and q, and
//! degree-weight biased, where the mass on an edge (i, j) is
//! `w_ij * min(d_i, d_j) / (max(d_i, d_j) + alpha)` so neighbors of similar
//! degree attract the walk. Sampling goes through alias tables for O(1)
//! draws; per-walk RNGs are seeded as `seed ^ walk_index`, which makes
//! parallel and sequential generation produce identical corpora.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::par;

const PROB_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WalkStrategy {
    /// Uniform over the current node's neighbors.
    Truncated,
    /// Second-order walk biased by return parameter p and in-out parameter q.
    Biased,
    /// First-order walk guided by degree-weight proximity.
    DegreeWeight,
}

impl std::str::FromStr for WalkStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truncated" => Ok(WalkStrategy::Truncated),
            "biased" => Ok(WalkStrategy::Biased),
            "degree_weight" | "degree-weight" | "dw" => Ok(WalkStrategy::DegreeWeight),
            other => Err(Error::validation(format!(
                "unknown walk strategy `{other}` (expected truncated, biased, or degree_weight)"
            ))),
        }
    }
}

impl std::fmt::Display for WalkStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            WalkStrategy::Truncated => "truncated",
            WalkStrategy::Biased => "biased",
            WalkStrategy::DegreeWeight => "degree_weight",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct WalkConfig {
    pub strategy: WalkStrategy,
    /// Walks started from every node.
    pub walks_per_node: usize,
    /// Nodes per walk, counting the start node.
    pub walk_length: usize,
    /// Smoothing constant in the degree-weight proximity denominator.
    pub dw_alpha: f64,
    /// Return parameter of the biased strategy.
    pub p: f64,
    /// In-out parameter of the biased strategy.
    pub q: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            strategy: WalkStrategy::DegreeWeight,
            walks_per_node: 10,
            walk_length: 40,
            dw_alpha: 1.0,
            p: 1.0,
            q: 1.0,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length < 2 {
            return Err(Error::validation("walk length must be at least 2"));
        }
        if self.walks_per_node == 0 {
            return Err(Error::validation("walks per node must be at least 1"));
        }
        if self.p <= 0.0 || self.q <= 0.0 {
            return Err(Error::validation("p and q must be positive"));
        }
        if self.dw_alpha < 0.0 || !self.dw_alpha.is_finite() {
            return Err(Error::validation("dw alpha must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Uniform transition distribution over N(u) (empty for a dead end).
pub fn transition_probs_truncated(g: &Graph, u: usize) -> Vec<f64> {
    let deg = g.degree(u);
    if deg == 0 {
        return Vec::new();
    }
    vec![1.0 / deg as f64; deg]
}

/// Second-order transition distribution over N(u) given the previous node.
/// Mass on neighbor x is `a * w_ux` with a = 1/p when x is the previous node,
/// 1 when x neighbors the previous node, 1/q otherwise. With no previous node
/// (first step) the distribution is proportional to edge weights.
pub fn transition_probs_biased(
    g: &Graph,
    prev: Option<usize>,
    u: usize,
    p: f64,
    q: f64,
) -> Result<Vec<f64>> {
    if p <= 0.0 || q <= 0.0 {
        return Err(Error::validation("p and q must be positive"));
    }
    let nbrs = g.neighbors(u);
    if nbrs.is_empty() {
        return Ok(Vec::new());
    }
    let mass: Vec<f64> = match prev {
        None => nbrs.iter().map(|&(_, w)| w).collect(),
        Some(prev) => nbrs
            .iter()
            .map(|&(x, w)| {
                let bias = if x == prev {
                    1.0 / p
                } else if g.has_edge(prev, x) {
                    1.0
                } else {
                    1.0 / q
                };
                bias * w
            })
            .collect(),
    };
    Ok(normalize_or_uniform(mass, u))
}

/// Degree-weight proximity of an existing edge (i, j):
/// `w_ij * min(d_i, d_j) / (max(d_i, d_j) + alpha)`.
pub fn dw_proximity(g: &Graph, i: usize, j: usize, alpha: f64) -> Result<f64> {
    let w = g
        .edge_weight(i, j)
        .ok_or_else(|| Error::validation(format!("({i}, {j}) is not an edge")))?;
    let (di, dj) = (g.degree(i) as f64, g.degree(j) as f64);
    Ok(w * di.min(dj) / (di.max(dj) + alpha))
}

/// Degree-weight transition distribution over N(u). Falls back to the
/// truncated distribution (with a warning) when every incident weight is 0.
pub fn transition_probs_dw(g: &Graph, u: usize, alpha: f64) -> Result<Vec<f64>> {
    let nbrs = g.neighbors(u);
    if nbrs.is_empty() {
        return Ok(Vec::new());
    }
    let mut mass = Vec::with_capacity(nbrs.len());
    for &(x, _) in nbrs {
        mass.push(dw_proximity(g, u, x, alpha)?);
    }
    Ok(normalize_or_uniform(mass, u))
}

/// Normalizes to sum 1; zero total mass degrades to the uniform distribution
/// so walks never stall on explicitly zero-weighted edges.
fn normalize_or_uniform(mut mass: Vec<f64>, node: usize) -> Vec<f64> {
    let total: f64 = mass.iter().sum();
    if total <= 0.0 {
        eprintln!("warning: node {node} has zero total transition mass; using uniform transitions");
        let n = mass.len();
        return vec![1.0 / n as f64; n];
    }
    for m in mass.iter_mut() {
        *m /= total;
    }
    mass
}

/// Vose alias table: O(n) construction, O(1) sampling, expected frequencies
/// equal to the input distribution.
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
    support: Vec<usize>,
}

impl AliasTable {
    /// Builds a table over `support` (parallel to `dist`). `dist` must be a
    /// probability vector: non-negative entries summing to 1 within 1e-9.
    pub fn new(dist: &[f64], support: Vec<usize>) -> Result<AliasTable> {
        if dist.len() != support.len() {
            return Err(Error::dimension(format!(
                "distribution has {} entries but support has {}",
                dist.len(),
                support.len()
            )));
        }
        if dist.is_empty() {
            return Err(Error::validation(
                "cannot build alias table for empty distribution",
            ));
        }
        for (i, &p) in dist.iter().enumerate() {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::validation(format!(
                    "distribution entry {i} is {p}; must be finite and >= 0"
                )));
            }
        }
        let total: f64 = dist.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::validation(format!(
                "distribution sums to {total}, expected 1 within {PROB_SUM_TOL}"
            )));
        }

        let n = dist.len();
        let mut prob = vec![0.0; n];
        let mut alias = vec![0usize; n];
        let mut scaled: Vec<f64> = dist.iter().map(|&p| p * n as f64).collect();
        let mut small: Vec<usize> = Vec::with_capacity(n);
        let mut large: Vec<usize> = Vec::with_capacity(n);
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            large.pop();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                small.push(l);
            } else {
                large.push(l);
            }
        }
        for i in large.into_iter().chain(small) {
            prob[i] = 1.0;
        }

        Ok(AliasTable {
            prob,
            alias,
            support,
        })
    }

    /// Table over indices `0..dist.len()`.
    pub fn from_dist(dist: &[f64]) -> Result<AliasTable> {
        let support = (0..dist.len()).collect();
        Self::new(dist, support)
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    /// Per-slot acceptance probabilities (1.0 where no aliasing is needed).
    pub fn probs(&self) -> &[f64] {
        &self.prob
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let slot = rng.gen_range(0..self.prob.len());
        if rng.gen::<f64>() < self.prob[slot] {
            self.support[slot]
        } else {
            self.support[self.alias[slot]]
        }
    }
}

/// Collection of walks: node-id sequences of at most `walk_length` nodes
/// (shorter only when a dead end cuts the walk off).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<usize>>,
}

impl WalkCorpus {
    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    pub fn mean_length(&self) -> f64 {
        if self.walks.is_empty() {
            return 0.0;
        }
        self.walks.iter().map(|w| w.len()).sum::<usize>() as f64 / self.walks.len() as f64
    }

    /// Writes one walk per line, space-separated original node tokens.
    pub fn write(&self, g: &Graph, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path.as_ref())?;
        let mut out = BufWriter::new(file);
        for walk in &self.walks {
            let mut first = true;
            for &node in walk {
                if !first {
                    out.write_all(b" ")?;
                }
                out.write_all(g.node_name(node).as_bytes())?;
                first = false;
            }
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a corpus file, mapping original tokens back to dense ids.
    pub fn read(path: impl AsRef<Path>, g: &Graph) -> Result<WalkCorpus> {
        let file = File::open(path.as_ref())?;
        let reader = BufReader::new(file);
        let mut walks = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let mut walk = Vec::new();
            for token in trimmed.split_whitespace() {
                let id = g.node_id(token).ok_or_else(|| {
                    Error::parse(lineno + 1, format!("unknown node token `{token}`"))
                })?;
                walk.push(id);
            }
            walks.push(walk);
        }
        Ok(WalkCorpus { walks })
    }
}

/// Precomputed sampling state for one strategy over one graph.
enum Sampler {
    /// One table per node, used at every step (truncated and degree-weight
    /// strategies are first-order).
    PerNode(Vec<Option<AliasTable>>),
    /// First-step tables per node plus lazily built per-(prev, current)
    /// context tables, one slot per directed arc.
    Biased {
        first: Vec<Option<AliasTable>>,
        context: Vec<OnceLock<AliasTable>>,
        arc_offset: Vec<usize>,
        p: f64,
        q: f64,
    },
}

impl Sampler {
    fn build(g: &Graph, cfg: &WalkConfig) -> Result<Sampler> {
        let n = g.node_count();
        match cfg.strategy {
            WalkStrategy::Truncated => {
                let tables = build_per_node(g, |u| Ok(transition_probs_truncated(g, u)))?;
                Ok(Sampler::PerNode(tables))
            }
            WalkStrategy::DegreeWeight => {
                let tables = build_per_node(g, |u| transition_probs_dw(g, u, cfg.dw_alpha))?;
                Ok(Sampler::PerNode(tables))
            }
            WalkStrategy::Biased => {
                let first =
                    build_per_node(g, |u| transition_probs_biased(g, None, u, cfg.p, cfg.q))?;
                let mut arc_offset = Vec::with_capacity(n + 1);
                let mut total = 0usize;
                for u in 0..n {
                    arc_offset.push(total);
                    total += g.degree(u);
                }
                arc_offset.push(total);
                let context = (0..total).map(|_| OnceLock::new()).collect();
                Ok(Sampler::Biased {
                    first,
                    context,
                    arc_offset,
                    p: cfg.p,
                    q: cfg.q,
                })
            }
        }
    }

    /// Next node from `current`, or None at a dead end. `prev` is the node
    /// visited before `current` (None on the first step).
    fn step<R: Rng + ?Sized>(
        &self,
        g: &Graph,
        prev: Option<usize>,
        current: usize,
        rng: &mut R,
    ) -> Option<usize> {
        match self {
            Sampler::PerNode(tables) => tables[current].as_ref().map(|t| t.sample(rng)),
            Sampler::Biased {
                first,
                context,
                arc_offset,
                p,
                q,
            } => match prev {
                None => first[current].as_ref().map(|t| t.sample(rng)),
                Some(prev_node) => {
                    if g.degree(current) == 0 {
                        return None;
                    }
                    let pos = g
                        .neighbors(prev_node)
                        .binary_search_by_key(&current, |&(v, _)| v)
                        .expect("walk stepped along a non-edge");
                    let slot = &context[arc_offset[prev_node] + pos];
                    let table = slot.get_or_init(|| {
                        let dist = transition_probs_biased(g, Some(prev_node), current, *p, *q)
                            .expect("validated p and q");
                        let support = g.neighbors(current).iter().map(|&(v, _)| v).collect();
                        AliasTable::new(&dist, support).expect("normalized distribution")
                    });
                    Some(table.sample(rng))
                }
            },
        }
    }
}

fn build_per_node<F>(g: &Graph, dist_fn: F) -> Result<Vec<Option<AliasTable>>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync,
{
    let tables = par::map_indexed(g.node_count(), |u| -> Result<Option<AliasTable>> {
        let dist = dist_fn(u)?;
        if dist.is_empty() {
            Ok(None)
        } else {
            let support: Vec<usize> = g.neighbors(u).iter().map(|&(v, _)| v).collect();
            Ok(Some(AliasTable::new(&dist, support)?))
        }
    });
    tables.into_iter().collect()
}

fn sample_walk<R: Rng + ?Sized>(
    g: &Graph,
    sampler: &Sampler,
    length: usize,
    start: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut walk = Vec::with_capacity(length);
    walk.push(start);
    while walk.len() < length {
        let current = *walk.last().unwrap();
        let prev = if walk.len() >= 2 {
            Some(walk[walk.len() - 2])
        } else {
            None
        };
        match sampler.step(g, prev, current, rng) {
            Some(next) => walk.push(next),
            None => break,
        }
    }
    walk
}

/// Generates `walks_per_node * |V|` walks in (node, repetition) order.
/// Deterministic for a fixed seed; with the `parallel` feature the walks are
/// produced concurrently with identical output.
pub fn generate_corpus(g: &Graph, cfg: &WalkConfig) -> Result<WalkCorpus> {
    cfg.validate()?;
    let sampler = Sampler::build(g, cfg)?;
    let count = g.node_count() * cfg.walks_per_node;
    let walks = par::map_indexed(count, |walk_index| run_walk(g, &sampler, cfg, walk_index));
    Ok(WalkCorpus { walks })
}

/// Sequential twin of [`generate_corpus`]: the fallback used when the
/// `parallel` feature is disabled, also exposed so benchmarks can compare
/// the two paths. Output is bit-identical to the parallel version.
pub fn generate_corpus_serial(g: &Graph, cfg: &WalkConfig) -> Result<WalkCorpus> {
    cfg.validate()?;
    let sampler = Sampler::build(g, cfg)?;
    let count = g.node_count() * cfg.walks_per_node;
    let walks = par::map_indexed_serial(count, |walk_index| run_walk(g, &sampler, cfg, walk_index));
    Ok(WalkCorpus { walks })
}

fn run_walk(g: &Graph, sampler: &Sampler, cfg: &WalkConfig, walk_index: usize) -> Vec<usize> {
    let start = walk_index / cfg.walks_per_node;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ walk_index as u64);
    sample_walk(g, sampler, cfg.walk_length, start, &mut rng)
}
