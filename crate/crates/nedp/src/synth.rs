//! Synthetic benchmark graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::Graph;

/// Planted-partition (stochastic block model) graph: each unordered pair
/// inside a block is an edge with probability `p_in`, pairs across blocks
/// with probability `p_out`. Returns the graph and the block label per node.
pub fn planted_partition(
    block_sizes: &[usize],
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(Graph, Vec<usize>)> {
    let n: usize = block_sizes.iter().sum();
    let mut labels = Vec::with_capacity(n);
    for (block, &size) in block_sizes.iter().enumerate() {
        labels.extend(std::iter::repeat(block).take(size));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let g = Graph::from_edges(n, &edges, false)?;
    Ok((g, labels))
}

/// Erdos-Renyi G(n, p) graph.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges, false)
}
