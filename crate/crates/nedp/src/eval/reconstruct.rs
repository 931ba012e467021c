//! Network reconstruction: rank node pairs by embedding similarity and score
//! how well the top of the ranking recovers the true edges.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::graph::Graph;
use crate::model::EmbeddingMatrix;
use crate::par;
use crate::util::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Similarity {
    InnerProduct,
    Cosine,
}

impl std::str::FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inner" | "inner-product" | "dot" => Ok(Similarity::InnerProduct),
            "cosine" => Ok(Similarity::Cosine),
            other => Err(Error::validation(format!(
                "unknown similarity `{other}` (expected inner or cosine)"
            ))),
        }
    }
}

/// Rows of the embedding, L2-normalized when cosine similarity is requested.
fn prepared_rows(emb: &EmbeddingMatrix, similarity: Similarity) -> Array2<f64> {
    match similarity {
        Similarity::InnerProduct => emb.values.clone(),
        Similarity::Cosine => {
            let mut values = emb.values.clone();
            for mut row in values.rows_mut() {
                let norm = row.dot(&row).sqrt();
                if norm > 0.0 {
                    row /= norm;
                }
            }
            values
        }
    }
}

/// Precision@K over ranked candidate pairs and per-node mean average
/// precision. Candidate pairs are exhaustive (`u < v`, no self-pairs) unless
/// `pair_cap` forces a seeded uniform sample of that many pairs; MAP always
/// ranks every node against all others.
pub fn reconstruction_eval(
    emb: &EmbeddingMatrix,
    g: &Graph,
    k_list: &[usize],
    similarity: Similarity,
    pair_cap: Option<usize>,
    seed: u64,
) -> Result<EvalReport> {
    let n = g.node_count();
    if emb.node_count() != n {
        return Err(Error::dimension(format!(
            "embedding has {} rows for a {n}-node graph",
            emb.node_count()
        )));
    }
    let values = prepared_rows(emb, similarity);

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            pairs.push((u, v));
        }
    }
    if let Some(cap) = pair_cap {
        if pairs.len() > cap {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 31));
            let (sampled, _) = pairs.partial_shuffle(&mut rng, cap);
            let mut sampled = sampled.to_vec();
            sampled.sort_unstable();
            pairs = sampled;
        }
    }
    for &k in k_list {
        if k == 0 || k > pairs.len() {
            return Err(Error::validation(format!(
                "precision@K needs 0 < K <= {} candidate pairs, got {k}",
                pairs.len()
            )));
        }
    }

    let mut scored: Vec<(f64, usize, usize)> = par::map_slice(&pairs, |&(u, v)| {
        (values.row(u).dot(&values.row(v)), u, v)
    });
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite similarities")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut report = EvalReport::new("reconstruct");
    report.push_config("seed", seed.to_string());
    report.push_config(
        "similarity",
        match similarity {
            Similarity::InnerProduct => "inner".to_string(),
            Similarity::Cosine => "cosine".to_string(),
        },
    );

    let mut sorted_k: Vec<usize> = k_list.to_vec();
    sorted_k.sort_unstable();
    sorted_k.dedup();
    let mut hits = 0usize;
    let mut next_k = 0usize;
    let mut precisions: Vec<(usize, f64)> = Vec::with_capacity(sorted_k.len());
    for (rank, &(_, u, v)) in scored.iter().enumerate() {
        if g.connected_pair(u, v) {
            hits += 1;
        }
        while next_k < sorted_k.len() && rank + 1 == sorted_k[next_k] {
            precisions.push((sorted_k[next_k], hits as f64 / sorted_k[next_k] as f64));
            next_k += 1;
        }
        if next_k == sorted_k.len() {
            break;
        }
    }
    for (k, p) in precisions {
        report.push_metric(&format!("precision@{k}"), p)?;
    }

    report.push_metric("map", mean_average_precision(&values, g)?)?;
    Ok(report)
}

/// Mean over nodes with at least one neighbor of the average precision of
/// that node's ranking of all other nodes against its true neighbors.
pub fn mean_average_precision(values: &Array2<f64>, g: &Graph) -> Result<f64> {
    let n = g.node_count();
    let per_node: Vec<Option<f64>> = par::map_indexed(n, |u| {
        let truth: Vec<usize> = g.neighbors(u).iter().map(|&(v, _)| v).collect();
        if truth.is_empty() {
            return None;
        }
        let row = values.row(u);
        let mut scored: Vec<(f64, usize)> = (0..n)
            .filter(|&v| v != u)
            .map(|v| (row.dot(&values.row(v)), v))
            .collect();
        scored.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .expect("finite similarities")
                .then(a.1.cmp(&b.1))
        });
        let mut hits = 0usize;
        let mut ap = 0.0;
        for (rank, &(_, v)) in scored.iter().enumerate() {
            if g.connected_pair(u, v) {
                hits += 1;
                ap += hits as f64 / (rank + 1) as f64;
            }
        }
        Some(ap / truth.len() as f64)
    });
    let aps: Vec<f64> = per_node.into_iter().flatten().collect();
    if aps.is_empty() {
        return Err(Error::validation("graph has no edges to reconstruct"));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adjacency rows as embeddings recover the graph exactly on graphs
    /// where every adjacency row-pair inner product separates edges.
    #[test]
    fn adjacency_embedding_reconstructs_dense_graph() {
        // K5 minus one edge
        let mut edges = Vec::new();
        for u in 0..5 {
            for v in (u + 1)..5 {
                if !(u == 0 && v == 1) {
                    edges.push((u, v));
                }
            }
        }
        let g = Graph::from_edges(5, &edges, false).unwrap();
        let mut values = Array2::zeros((5, 5));
        for (u, v, w) in g.edges() {
            values[[u, v]] = w;
            values[[v, u]] = w;
        }
        // self-similarity boost so edges rank above non-edges
        for u in 0..5 {
            values[[u, u]] = 2.0;
        }
        let emb = EmbeddingMatrix { values };
        let report = reconstruction_eval(
            &emb,
            &g,
            &[g.edge_count()],
            Similarity::InnerProduct,
            None,
            0,
        )
        .unwrap();
        assert_eq!(report.metric(&format!("precision@{}", g.edge_count())), Some(1.0));
        assert_eq!(report.metric("map"), Some(1.0));
    }

    #[test]
    fn single_edge_ideal_embedding() {
        let g = Graph::from_edges(3, &[(0, 1)], false).unwrap();
        let emb = EmbeddingMatrix {
            values: ndarray::arr2(&[[1.0, 0.0], [1.0, 0.0], [0.0, -1.0]]),
        };
        let report =
            reconstruction_eval(&emb, &g, &[1], Similarity::InnerProduct, None, 0).unwrap();
        assert_eq!(report.metric("precision@1"), Some(1.0));
    }

    #[test]
    fn random_embeddings_track_density() {
        use rand::{Rng, SeedableRng};
        let g = crate::synth::erdos_renyi(50, 0.1, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut values = Array2::zeros((50, 8));
        for v in values.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let emb = EmbeddingMatrix { values };
        let pairs = 50 * 49 / 2;
        let density = g.edge_count() as f64 / pairs as f64;
        let k = 200;
        let report =
            reconstruction_eval(&emb, &g, &[k], Similarity::InnerProduct, None, 0).unwrap();
        let p = report.metric(&format!("precision@{k}")).unwrap();
        assert!((p - density).abs() < 0.08, "p@{k} = {p}, density {density}");
    }

    #[test]
    fn precision_at_k_decays_past_edge_count_on_perfect_ranking() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)], false).unwrap();
        let emb = EmbeddingMatrix {
            values: ndarray::arr2(&[
                [5.0, 0.0],
                [5.0, 0.0],
                [0.0, 5.0],
                [0.0, 5.0],
            ]),
        };
        let report = reconstruction_eval(
            &emb,
            &g,
            &[2, 4, 6],
            Similarity::InnerProduct,
            None,
            0,
        )
        .unwrap();
        let p2 = report.metric("precision@2").unwrap();
        let p4 = report.metric("precision@4").unwrap();
        let p6 = report.metric("precision@6").unwrap();
        assert_eq!(p2, 1.0);
        assert!(p4 <= p2 && p6 <= p4);
    }

    #[test]
    fn k_larger_than_pair_count_errors() {
        let g = Graph::from_edges(3, &[(0, 1)], false).unwrap();
        let emb = EmbeddingMatrix {
            values: Array2::zeros((3, 2)),
        };
        assert!(
            reconstruction_eval(&emb, &g, &[10], Similarity::InnerProduct, None, 0).is_err()
        );
    }
}
