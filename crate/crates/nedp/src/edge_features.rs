//! Edge representations built from node-pair embeddings.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::model::EmbeddingMatrix;

/// The five pairwise operators. All except `Cascade` are symmetric and keep
/// the node dimension; `Cascade` concatenates to 2d.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeOperator {
    Cascade,
    Average,
    Hadamard,
    L1,
    L2,
}

impl EdgeOperator {
    pub const ALL: [EdgeOperator; 5] = [
        EdgeOperator::Cascade,
        EdgeOperator::Average,
        EdgeOperator::Hadamard,
        EdgeOperator::L1,
        EdgeOperator::L2,
    ];

    /// Output dimension for node embeddings of dimension `d`.
    pub fn output_dim(&self, d: usize) -> usize {
        match self {
            EdgeOperator::Cascade => 2 * d,
            _ => d,
        }
    }
}

impl std::str::FromStr for EdgeOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cascade" => Ok(EdgeOperator::Cascade),
            "average" => Ok(EdgeOperator::Average),
            "hadamard" => Ok(EdgeOperator::Hadamard),
            "l1" => Ok(EdgeOperator::L1),
            "l2" => Ok(EdgeOperator::L2),
            other => Err(Error::validation(format!(
                "unknown edge operator `{other}` (expected cascade, average, hadamard, l1, or l2)"
            ))),
        }
    }
}

impl std::fmt::Display for EdgeOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EdgeOperator::Cascade => "cascade",
            EdgeOperator::Average => "average",
            EdgeOperator::Hadamard => "hadamard",
            EdgeOperator::L1 => "l1",
            EdgeOperator::L2 => "l2",
        })
    }
}

/// Combines the embeddings of `u` and `v` into one edge vector. The pair
/// need not be an edge of any graph.
pub fn edge_features(
    emb: &EmbeddingMatrix,
    u: usize,
    v: usize,
    op: EdgeOperator,
) -> Result<Array1<f64>> {
    let n = emb.node_count();
    if u >= n || v >= n {
        return Err(Error::validation(format!(
            "node pair ({u}, {v}) out of range (|V| = {n})"
        )));
    }
    let yu = emb.values.row(u);
    let yv = emb.values.row(v);
    Ok(match op {
        EdgeOperator::Cascade => {
            let mut out = Array1::zeros(2 * emb.dim());
            out.slice_mut(ndarray::s![..emb.dim()]).assign(&yu);
            out.slice_mut(ndarray::s![emb.dim()..]).assign(&yv);
            out
        }
        EdgeOperator::Average => (&yu + &yv) * 0.5,
        EdgeOperator::Hadamard => (&yu * &yv).to_owned(),
        EdgeOperator::L1 => (&yu - &yv).mapv(f64::abs),
        EdgeOperator::L2 => (&yu - &yv).mapv(|d| d * d),
    })
}
