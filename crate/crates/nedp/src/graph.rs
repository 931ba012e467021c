//! Weighted graph storage, edge-list I/O, and link-prediction splits.
//!
//! Nodes carry dense integer ids in `[0, |V|)`; the original input tokens are
//! retained so every output file can speak the caller's vocabulary. Undirected
//! graphs store both orientations of each edge with equal weight.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::util::mix_seed;

/// Immutable weighted graph with a per-node degree cache.
#[derive(Debug, Clone)]
pub struct Graph {
    directed: bool,
    /// Per-node neighbor list, sorted by neighbor id. Undirected graphs hold
    /// both orientations; directed graphs hold out-edges only.
    adjacency: Vec<Vec<(usize, f64)>>,
    /// Original input tokens, indexed by dense id (the remapping table).
    node_names: Vec<String>,
    name_index: HashMap<String, usize>,
    /// Undirected edges count each unordered pair once; directed counts arcs.
    edge_count: usize,
}

impl Graph {
    /// Builds a graph from `(src, dst, weight)` triples over dense ids
    /// `0..node_count`. Duplicate edges sum their weights; self-loops are
    /// dropped with a warning.
    pub fn from_weighted_edges(
        node_count: usize,
        edges: &[(usize, usize, f64)],
        directed: bool,
    ) -> Result<Graph> {
        let names: Vec<String> = (0..node_count).map(|i| i.to_string()).collect();
        Self::build(names, edges, directed)
    }

    /// Convenience constructor for unweighted edges (all weights 1).
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)], directed: bool) -> Result<Graph> {
        let weighted: Vec<(usize, usize, f64)> =
            edges.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        Self::from_weighted_edges(node_count, &weighted, directed)
    }

    fn build(node_names: Vec<String>, edges: &[(usize, usize, f64)], directed: bool) -> Result<Graph> {
        let n = node_names.len();
        let mut weight_map: HashMap<(usize, usize), f64> = HashMap::new();
        let mut dropped_loops = 0usize;
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::validation(format!(
                    "edge ({u}, {v}) references a node outside [0, {n})"
                )));
            }
            if w < 0.0 || !w.is_finite() {
                return Err(Error::validation(format!(
                    "edge ({u}, {v}) has invalid weight {w}; weights must be finite and >= 0"
                )));
            }
            if u == v {
                dropped_loops += 1;
                continue;
            }
            let key = if directed || u < v { (u, v) } else { (v, u) };
            *weight_map.entry(key).or_insert(0.0) += w;
        }
        if dropped_loops > 0 {
            eprintln!("warning: dropped {dropped_loops} self-loop(s)");
        }

        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(u, v), &w) in &weight_map {
            adjacency[u].push((v, w));
            if !directed {
                adjacency[v].push((u, w));
            }
        }
        for list in &mut adjacency {
            list.sort_unstable_by_key(|&(v, _)| v);
        }

        let name_index = node_names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();

        Ok(Graph {
            directed,
            adjacency,
            node_names,
            name_index,
            edge_count: weight_map.len(),
        })
    }

    /// Parses a whitespace-separated edge list: `src dst [weight]` per line,
    /// `#`-prefixed comment lines and blank lines skipped. Tokens are mapped
    /// to dense ids in order of first appearance.
    pub fn load_edge_list(path: impl AsRef<Path>, directed: bool, weighted: bool) -> Result<Graph> {
        let file = File::open(path.as_ref())?;
        Self::parse_edge_list(BufReader::new(file), directed, weighted)
    }

    pub fn parse_edge_list(reader: impl BufRead, directed: bool, weighted: bool) -> Result<Graph> {
        let mut names: Vec<String> = Vec::new();
        let mut name_index: HashMap<String, usize> = HashMap::new();
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();

        let mut intern = |token: &str, names: &mut Vec<String>, index: &mut HashMap<String, usize>| {
            if let Some(&id) = index.get(token) {
                id
            } else {
                let id = names.len();
                names.push(token.to_string());
                index.insert(token.to_string(), id);
                id
            }
        };

        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = trimmed.split_whitespace().collect();
            if tokens.len() < 2 || tokens.len() > 3 {
                return Err(Error::parse(
                    lineno,
                    format!("expected `src dst [weight]`, got {} token(s)", tokens.len()),
                ));
            }
            let u = intern(tokens[0], &mut names, &mut name_index);
            let v = intern(tokens[1], &mut names, &mut name_index);
            let w = if weighted && tokens.len() == 3 {
                let w: f64 = tokens[2].parse().map_err(|_| {
                    Error::parse(lineno, format!("invalid weight token `{}`", tokens[2]))
                })?;
                if w < 0.0 {
                    return Err(Error::validation(format!(
                        "line {lineno}: negative weight {w}"
                    )));
                }
                w
            } else {
                1.0
            };
            edges.push((u, v, w));
        }

        Self::build(names, &edges, directed)
    }

    /// Writes the edge list back out using original node tokens; reloading
    /// yields an isomorphic graph.
    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path.as_ref())?;
        let mut out = BufWriter::new(file);
        for (u, v, w) in self.edges() {
            writeln!(out, "{} {} {}", self.node_names[u], self.node_names[v], w)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Undirected: number of unordered edges. Directed: number of arcs.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Neighbors of `u`, sorted by id, with edge weights.
    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adjacency[u]
    }

    /// Number of incident edges (out-degree for directed graphs).
    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    /// Weight of edge u->v, or None when absent.
    pub fn edge_weight(&self, u: usize, v: usize) -> Option<f64> {
        self.adjacency[u]
            .binary_search_by_key(&v, |&(n, _)| n)
            .ok()
            .map(|idx| self.adjacency[u][idx].1)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edge_weight(u, v).is_some()
    }

    /// True when the unordered pair {u, v} is connected by an edge in either
    /// direction.
    pub fn connected_pair(&self, u: usize, v: usize) -> bool {
        self.has_edge(u, v) || (self.directed && self.has_edge(v, u))
    }

    pub fn node_name(&self, u: usize) -> &str {
        &self.node_names[u]
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn node_id(&self, name: &str) -> Option<usize> {
        self.name_index.get(name).copied()
    }

    /// Iterates edges once each: `u < v` pairs for undirected graphs, arcs
    /// for directed ones.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(move |(u, list)| {
            list.iter().filter_map(move |&(v, w)| {
                if self.directed || u < v {
                    Some((u, v, w))
                } else {
                    None
                }
            })
        })
    }

    /// BFS connectivity over the undirected view of the graph.
    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let undirected = self.undirected_adjacency();
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut visited = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &undirected[u] {
                if !seen[v] {
                    seen[v] = true;
                    visited += 1;
                    queue.push_back(v);
                }
            }
        }
        visited == n
    }

    fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for (u, v, _) in self.edges() {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    /// New graph over the same nodes with the given edge subset.
    pub fn with_edges(&self, edges: &[(usize, usize, f64)]) -> Result<Graph> {
        Self::build(self.node_names.clone(), edges, self.directed)
    }
}

/// Train/test edge split for link prediction. The training graph stays
/// connected; negatives are sampled from the non-edges of the original graph.
#[derive(Debug, Clone)]
pub struct EdgeSplit {
    pub train_graph: Graph,
    pub test_positive: Vec<(usize, usize)>,
    pub test_negative: Vec<(usize, usize)>,
    pub removal_fraction: f64,
}

/// Moves `round(fraction * |E|)` edges to the test set while keeping the
/// remaining graph connected. A uniformly random spanning tree (Wilson's
/// algorithm) is exempt from removal; the removed edges are drawn uniformly
/// from the rest.
pub fn split_edges(g: &Graph, fraction: f64, seed: u64) -> Result<EdgeSplit> {
    if g.is_directed() {
        return Err(Error::validation("split_edges requires an undirected graph"));
    }
    if !(0.0 < fraction && fraction < 1.0) {
        return Err(Error::validation(format!(
            "removal fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if !g.is_connected() {
        return Err(Error::validation("split_edges requires a connected graph"));
    }

    let all_edges: Vec<(usize, usize, f64)> = g.edges().collect();
    let edge_total = all_edges.len();
    let target = (fraction * edge_total as f64).round() as usize;
    let max_removable = edge_total.saturating_sub(g.node_count().saturating_sub(1));
    if target == 0 {
        return Err(Error::validation(format!(
            "fraction {fraction} selects zero of {edge_total} edges"
        )));
    }
    if target > max_removable {
        return Err(Error::validation(format!(
            "cannot remove {target} of {edge_total} edges and stay connected; \
             at most {max_removable} are removable (fraction {:.4})",
            max_removable as f64 / edge_total as f64
        )));
    }

    let mut tree_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 1));
    let tree = uniform_spanning_tree(g, &mut tree_rng);

    let mut removable: Vec<(usize, usize, f64)> = all_edges
        .iter()
        .copied()
        .filter(|&(u, v, _)| !tree.contains(&(u, v)))
        .collect();
    let mut pick_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 2));
    removable.shuffle(&mut pick_rng);
    let removed: HashSet<(usize, usize)> = removable[..target]
        .iter()
        .map(|&(u, v, _)| (u, v))
        .collect();

    let train_edges: Vec<(usize, usize, f64)> = all_edges
        .iter()
        .copied()
        .filter(|&(u, v, _)| !removed.contains(&(u, v)))
        .collect();
    let train_graph = g.with_edges(&train_edges)?;
    debug_assert!(train_graph.is_connected());

    let mut test_positive: Vec<(usize, usize)> = removed.into_iter().collect();
    test_positive.sort_unstable();
    let test_negative = sample_negative_edges(g, test_positive.len(), mix_seed(seed, 3))?;

    Ok(EdgeSplit {
        train_graph,
        test_positive,
        test_negative,
        removal_fraction: fraction,
    })
}

/// Wilson's loop-erased random walk; returns tree edges as `u < v` pairs.
/// Samples uniformly over the spanning trees of the (unweighted) graph.
fn uniform_spanning_tree(g: &Graph, rng: &mut impl Rng) -> HashSet<(usize, usize)> {
    let n = g.node_count();
    let mut in_tree = vec![false; n];
    let mut next = vec![usize::MAX; n];
    let root = 0;
    in_tree[root] = true;
    for start in 1..n {
        let mut u = start;
        while !in_tree[u] {
            let nbrs = g.neighbors(u);
            let (v, _) = nbrs[rng.gen_range(0..nbrs.len())];
            next[u] = v;
            u = v;
        }
        let mut u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            u = next[u];
        }
    }
    let mut tree = HashSet::with_capacity(n.saturating_sub(1));
    for u in 1..n {
        let v = next[u];
        if v != usize::MAX {
            tree.insert((u.min(v), u.max(v)));
        }
    }
    tree
}

/// Uniform sample of `count` distinct non-adjacent unordered pairs.
pub fn sample_negative_edges(g: &Graph, count: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    sample_negatives_excluding(g, count, seed, &HashSet::new())
}

/// As [`sample_negative_edges`], additionally avoiding `exclude` pairs
/// (stored as `u < v`).
pub fn sample_negatives_excluding(
    g: &Graph,
    count: usize,
    seed: u64,
    exclude: &HashSet<(usize, usize)>,
) -> Result<Vec<(usize, usize)>> {
    let n = g.node_count();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let edge_pairs = count_unordered_edges(g);
    let population = total_pairs
        .saturating_sub(edge_pairs)
        .saturating_sub(exclude.len());
    if count > population {
        return Err(Error::validation(format!(
            "requested {count} negative pairs but only {population} non-edges exist"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Dense graphs (or large requests) enumerate the population; otherwise
    // rejection-sample.
    if population <= 4 * count || total_pairs <= 100_000 {
        let mut candidates: Vec<(usize, usize)> = Vec::with_capacity(population);
        for u in 0..n {
            for v in (u + 1)..n {
                if !g.connected_pair(u, v) && !exclude.contains(&(u, v)) {
                    candidates.push((u, v));
                }
            }
        }
        let (picked, _) = candidates.partial_shuffle(&mut rng, count);
        let mut out = picked.to_vec();
        out.sort_unstable();
        Ok(out)
    } else {
        let mut chosen: HashSet<(usize, usize)> = HashSet::with_capacity(count);
        while chosen.len() < count {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a == b {
                continue;
            }
            let pair = (a.min(b), a.max(b));
            if g.connected_pair(pair.0, pair.1) || exclude.contains(&pair) {
                continue;
            }
            chosen.insert(pair);
        }
        let mut out: Vec<(usize, usize)> = chosen.into_iter().collect();
        out.sort_unstable();
        Ok(out)
    }
}

fn count_unordered_edges(g: &Graph) -> usize {
    if !g.is_directed() {
        return g.edge_count();
    }
    let mut seen = HashSet::new();
    for (u, v, _) in g.edges() {
        seen.insert((u.min(v), u.max(v)));
    }
    seen.len()
}

/// Node labels: one list per dense node id. Singleton lists for multiclass
/// data, several entries per node for multi-label data, empty = unlabeled.
#[derive(Debug, Clone)]
pub struct LabelSet {
    pub labels: Vec<Vec<usize>>,
    pub label_names: Vec<String>,
}

impl LabelSet {
    /// Loads `node label` lines (one line per (node, label) pair). Node
    /// tokens must exist in the graph's remapping table.
    pub fn load(path: impl AsRef<Path>, g: &Graph) -> Result<LabelSet> {
        let file = File::open(path.as_ref())?;
        Self::parse(BufReader::new(file), g)
    }

    pub fn parse(reader: impl BufRead, g: &Graph) -> Result<LabelSet> {
        let mut labels: Vec<Vec<usize>> = vec![Vec::new(); g.node_count()];
        let mut label_names: Vec<String> = Vec::new();
        let mut label_index: HashMap<String, usize> = HashMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = trimmed.split_whitespace().collect();
            if tokens.len() != 2 {
                return Err(Error::parse(
                    lineno,
                    format!("expected `node label`, got {} token(s)", tokens.len()),
                ));
            }
            let node = g.node_id(tokens[0]).ok_or_else(|| {
                Error::parse(lineno, format!("unknown node token `{}`", tokens[0]))
            })?;
            let label = *label_index.entry(tokens[1].to_string()).or_insert_with(|| {
                label_names.push(tokens[1].to_string());
                label_names.len() - 1
            });
            if !labels[node].contains(&label) {
                labels[node].push(label);
            }
        }
        for list in &mut labels {
            list.sort_unstable();
        }
        Ok(LabelSet {
            labels,
            label_names,
        })
    }

    /// Wraps a dense class assignment (one label per node).
    pub fn from_classes(classes: &[usize]) -> LabelSet {
        let num = classes.iter().copied().max().map_or(0, |m| m + 1);
        LabelSet {
            labels: classes.iter().map(|&c| vec![c]).collect(),
            label_names: (0..num).map(|c| c.to_string()).collect(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    /// True when any node carries more than one label.
    pub fn is_multilabel(&self) -> bool {
        self.labels.iter().any(|l| l.len() > 1)
    }

    /// Dense ids of nodes that carry at least one label.
    pub fn labeled_nodes(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| !self.labels[i].is_empty())
            .collect()
    }
}
