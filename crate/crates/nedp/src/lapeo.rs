//! Laplacian embedding-space optimization.
//!
//! Minimizes `sum_ij A_ij ||y_i - y_j||^2 = 2 Tr(Y^T L Y)` with plain
//! gradient descent (gradient `4 L Y`), pulling connected nodes together in
//! the shared embedding. Interleaved with prediction-model epochs; run to
//! convergence it would collapse the embedding to a constant, so each round
//! takes only a few steps.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{EmbeddingMatrix, Model, TrainConfig};
use crate::par;
use crate::walk::WalkCorpus;

/// Sparse symmetric Laplacian L = D - A. Directed input is symmetrized as
/// (A + A^T) / 2 before L is formed.
#[derive(Debug, Clone)]
pub struct LaplacianOperator {
    /// Per-row adjacency of the symmetrized weight matrix.
    rows: Vec<Vec<(usize, f64)>>,
    /// Diagonal degree-weight sums D_ii.
    degree_weight: Vec<f64>,
}

impl LaplacianOperator {
    pub fn from_graph(g: &Graph) -> LaplacianOperator {
        let n = g.node_count();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        if g.is_directed() {
            let mut weights: std::collections::HashMap<(usize, usize), f64> =
                std::collections::HashMap::new();
            for (u, v, w) in g.edges() {
                let key = (u.min(v), u.max(v));
                *weights.entry(key).or_insert(0.0) += w / 2.0;
            }
            for (&(u, v), &w) in &weights {
                rows[u].push((v, w));
                rows[v].push((u, w));
            }
            for row in &mut rows {
                row.sort_unstable_by_key(|&(v, _)| v);
            }
        } else {
            for u in 0..n {
                rows[u] = g.neighbors(u).to_vec();
            }
        }
        let degree_weight = rows
            .iter()
            .map(|row| row.iter().map(|&(_, w)| w).sum())
            .collect();
        LaplacianOperator {
            rows,
            degree_weight,
        }
    }

    pub fn node_count(&self) -> usize {
        self.rows.len()
    }

    fn check_dims(&self, y: &Array2<f64>) -> Result<()> {
        if y.nrows() != self.node_count() {
            return Err(Error::dimension(format!(
                "embedding has {} rows, Laplacian expects {}",
                y.nrows(),
                self.node_count()
            )));
        }
        Ok(())
    }

    /// `sum_ij A_ij ||y_i - y_j||^2` over ordered pairs (equal to
    /// `2 Tr(Y^T L Y)`), computed by sparse traversal.
    pub fn loss(&self, y: &Array2<f64>) -> Result<f64> {
        self.check_dims(y)?;
        let terms = par::map_indexed(self.node_count(), |u| {
            let yu = y.row(u);
            let mut acc = 0.0;
            for &(v, w) in &self.rows[u] {
                let yv = y.row(v);
                let mut dist = 0.0;
                for (a, b) in yu.iter().zip(yv.iter()) {
                    let d = a - b;
                    dist += d * d;
                }
                acc += w * dist;
            }
            acc
        });
        Ok(terms.iter().sum())
    }

    /// L applied to Y: row u is `D_uu y_u - sum_v A_uv y_v`.
    pub fn apply(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_dims(y)?;
        let dim = y.ncols();
        let rows = par::map_indexed(self.node_count(), |u| {
            let mut out = y.row(u).to_owned();
            out *= self.degree_weight[u];
            for &(v, w) in &self.rows[u] {
                out.scaled_add(-w, &y.row(v));
            }
            out
        });
        let mut flat = Vec::with_capacity(self.node_count() * dim);
        for row in rows {
            flat.extend(row.into_iter());
        }
        Ok(Array2::from_shape_vec((self.node_count(), dim), flat)
            .expect("row count and dim are consistent"))
    }

    /// Gradient of the loss: `4 L Y`.
    pub fn grad(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
        let mut g = self.apply(y)?;
        g *= 4.0;
        Ok(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LapSchedule {
    /// Optimize after every prediction-model epoch.
    AfterEachEpoch,
    /// Optimize once, after training finishes.
    FinalOnly,
}

impl std::str::FromStr for LapSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "after-each-epoch" | "after_each_epoch" => Ok(LapSchedule::AfterEachEpoch),
            "final-only" | "final_only" => Ok(LapSchedule::FinalOnly),
            other => Err(Error::validation(format!(
                "unknown schedule `{other}` (expected after-each-epoch or final-only)"
            ))),
        }
    }
}

impl std::fmt::Display for LapSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LapSchedule::AfterEachEpoch => "after-each-epoch",
            LapSchedule::FinalOnly => "final-only",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LapConfig {
    /// Gradient-descent step size.
    pub eta: f64,
    /// Descent steps per invocation; 0 disables the stage.
    pub steps_per_epoch: usize,
    pub schedule: LapSchedule,
}

impl Default for LapConfig {
    fn default() -> Self {
        LapConfig {
            eta: 0.01,
            steps_per_epoch: 5,
            schedule: LapSchedule::AfterEachEpoch,
        }
    }
}

impl LapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eta <= 0.0 || !self.eta.is_finite() {
            return Err(Error::validation("lap eta must be finite and > 0"));
        }
        Ok(())
    }
}

const BACKTRACK_LIMIT: u32 = 10;

/// Runs `steps_per_epoch` descent steps on Y in place. Each step starts from
/// the configured eta and halves it (up to 10 times) until the loss stops
/// increasing, so the loss is non-increasing across every step. Returns the
/// loss after the final step.
pub fn lapeo_step(
    lap: &LaplacianOperator,
    y: &mut EmbeddingMatrix,
    cfg: &LapConfig,
) -> Result<f64> {
    cfg.validate()?;
    let mut loss = lap.loss(&y.values)?;
    for _ in 0..cfg.steps_per_epoch {
        let grad = lap.grad(&y.values)?;
        let mut eta = cfg.eta;
        let mut accepted = false;
        for _ in 0..=BACKTRACK_LIMIT {
            let mut candidate = y.values.clone();
            candidate.scaled_add(-eta, &grad);
            let candidate_loss = lap.loss(&candidate)?;
            if candidate_loss <= loss {
                y.values = candidate;
                loss = candidate_loss;
                accepted = true;
                break;
            }
            eta /= 2.0;
        }
        if !accepted {
            return Err(Error::validation(format!(
                "laplacian loss increased even after {BACKTRACK_LIMIT} step-size halvings"
            )));
        }
    }
    Ok(loss)
}

/// Per-epoch losses recorded by [`alternating_train`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub pred_loss: f64,
    pub lap_loss: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub embedding: EmbeddingMatrix,
    pub history: Vec<EpochRecord>,
}

const CONVERGENCE_REL_TOL: f64 = 1e-4;
const CONVERGENCE_EPOCHS: usize = 3;

/// Alternates prediction-model epochs with Laplacian optimization on the
/// shared embedding, stopping at the epoch budget or once both losses'
/// relative change stays below 1e-4 for three consecutive epochs.
pub fn alternating_train(
    graph: &Graph,
    corpus: &WalkCorpus,
    train_cfg: TrainConfig,
    lap_cfg: &LapConfig,
) -> Result<TrainOutcome> {
    lap_cfg.validate()?;
    let lap = LaplacianOperator::from_graph(graph);
    let (mut model, mut emb) = Model::new(graph.node_count(), train_cfg)?;
    let epochs = model.cfg.epochs;
    let mut history = Vec::with_capacity(epochs);
    let mut stable_epochs = 0usize;
    let lap_enabled = lap_cfg.steps_per_epoch > 0;

    for epoch in 0..epochs {
        let pred_loss = model.train_epoch(&mut emb, corpus)?;
        let lap_loss = if lap_enabled && lap_cfg.schedule == LapSchedule::AfterEachEpoch {
            lapeo_step(&lap, &mut emb, lap_cfg)?
        } else {
            lap.loss(&emb.values)?
        };
        history.push(EpochRecord {
            epoch,
            pred_loss,
            lap_loss,
        });

        if let Some(prev) = history.len().checked_sub(2).map(|i| history[i]) {
            let pred_change = rel_change(prev.pred_loss, pred_loss);
            let lap_change = rel_change(prev.lap_loss, lap_loss);
            if pred_change < CONVERGENCE_REL_TOL && lap_change < CONVERGENCE_REL_TOL {
                stable_epochs += 1;
            } else {
                stable_epochs = 0;
            }
            if stable_epochs >= CONVERGENCE_EPOCHS {
                break;
            }
        }
    }

    if lap_enabled && lap_cfg.schedule == LapSchedule::FinalOnly {
        let lap_loss = lapeo_step(&lap, &mut emb, lap_cfg)?;
        if let Some(last) = history.last_mut() {
            last.lap_loss = lap_loss;
        }
    }

    Ok(TrainOutcome {
        model,
        embedding: emb,
        history,
    })
}

fn rel_change(prev: f64, current: f64) -> f64 {
    (current - prev).abs() / prev.abs().max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_node_graph() -> Graph {
        Graph::from_edges(2, &[(0, 1)], false).unwrap()
    }

    #[test]
    fn identical_rows_have_zero_loss() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)], false).unwrap();
        let lap = LaplacianOperator::from_graph(&g);
        let y = Array2::from_elem((4, 3), 0.7);
        assert_eq!(lap.loss(&y).unwrap(), 0.0);
    }

    #[test]
    fn two_node_hand_case_matches_trace_form() {
        // Y = [[0], [1]], A_01 = 1: ordered-pair sum = 2 = 2 Tr(Y^T L Y).
        let g = two_node_graph();
        let lap = LaplacianOperator::from_graph(&g);
        let y = arr2(&[[0.0], [1.0]]);
        assert_eq!(lap.loss(&y).unwrap(), 2.0);
        // L = [[1, -1], [-1, 1]]; L y = [-1, 1]
        let ly = lap.apply(&y).unwrap();
        assert_eq!(ly, arr2(&[[-1.0], [1.0]]));
    }

    #[test]
    fn sparse_loss_matches_dense_trace_on_random_graph() {
        let g = Graph::from_weighted_edges(
            6,
            &[
                (0, 1, 0.5),
                (1, 2, 2.0),
                (2, 3, 1.0),
                (3, 4, 0.25),
                (4, 5, 1.5),
                (5, 0, 3.0),
                (1, 4, 0.75),
            ],
            false,
        )
        .unwrap();
        let lap = LaplacianOperator::from_graph(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut y = Array2::zeros((6, 3));
        for v in y.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }

        // dense 2 Tr(Y^T L Y)
        let mut dense_l = Array2::zeros((6, 6));
        for u in 0..6 {
            for &(v, w) in g.neighbors(u) {
                dense_l[[u, v]] = -w;
                dense_l[[u, u]] += w;
            }
        }
        let trace = (y.t().dot(&dense_l).dot(&y)).diag().sum();
        assert!((lap.loss(&y).unwrap() - 2.0 * trace).abs() < 1e-10);
    }

    #[test]
    fn directed_graphs_are_symmetrized() {
        let g = Graph::from_weighted_edges(2, &[(0, 1, 2.0)], true).unwrap();
        let lap = LaplacianOperator::from_graph(&g);
        let y = arr2(&[[0.0], [1.0]]);
        // symmetrized weight is 1.0 on both orientations
        assert_eq!(lap.loss(&y).unwrap(), 2.0);
    }

    #[test]
    fn gradient_rows_sum_to_zero_and_identical_rows_are_stationary() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)], false).unwrap();
        let lap = LaplacianOperator::from_graph(&g);

        let constant = Array2::from_elem((5, 2), -1.3);
        let grad = lap.grad(&constant).unwrap();
        assert!(grad.iter().all(|&v| v.abs() < 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut y = Array2::zeros((5, 2));
        for v in y.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let grad = lap.grad(&y).unwrap();
        for k in 0..2 {
            let col_sum: f64 = grad.column(k).sum();
            assert!(col_sum.abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = Graph::from_weighted_edges(
            4,
            &[(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (3, 0, 1.5)],
            false,
        )
        .unwrap();
        let lap = LaplacianOperator::from_graph(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut y = Array2::zeros((4, 3));
        for v in y.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let grad = lap.grad(&y).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            for k in 0..3 {
                let mut plus = y.clone();
                plus[[i, k]] += h;
                let mut minus = y.clone();
                minus[[i, k]] -= h;
                let fd =
                    (lap.loss(&plus).unwrap() - lap.loss(&minus).unwrap()) / (2.0 * h);
                let rel = (fd - grad[[i, k]]).abs() / grad[[i, k]].abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-6, "({i},{k}): fd {fd} vs {}", grad[[i, k]]);
            }
        }
    }

    #[test]
    fn steps_never_increase_loss_and_keep_centroid() {
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (0, 3)], false)
            .unwrap();
        let lap = LaplacianOperator::from_graph(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut y = EmbeddingMatrix {
            values: Array2::zeros((6, 2)),
        };
        for v in y.values.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let centroid_before = y.values.sum_axis(ndarray::Axis(0));
        let cfg = LapConfig {
            eta: 0.05,
            steps_per_epoch: 1,
            ..LapConfig::default()
        };
        let mut prev = lap.loss(&y.values).unwrap();
        for _ in 0..20 {
            let loss = lapeo_step(&lap, &mut y, &cfg).unwrap();
            assert!(loss <= prev + 1e-12);
            prev = loss;
        }
        let centroid_after = y.values.sum_axis(ndarray::Axis(0));
        for k in 0..2 {
            assert!((centroid_before[k] - centroid_after[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn one_call_with_two_steps_equals_two_single_step_calls() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], false).unwrap();
        let lap = LaplacianOperator::from_graph(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut init = Array2::zeros((4, 2));
        for v in init.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let mut a = EmbeddingMatrix {
            values: init.clone(),
        };
        let mut b = EmbeddingMatrix { values: init };

        let two = LapConfig {
            eta: 0.01,
            steps_per_epoch: 2,
            ..LapConfig::default()
        };
        let one = LapConfig {
            eta: 0.01,
            steps_per_epoch: 1,
            ..LapConfig::default()
        };
        lapeo_step(&lap, &mut a, &two).unwrap();
        lapeo_step(&lap, &mut b, &one).unwrap();
        lapeo_step(&lap, &mut b, &one).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn disabled_stage_matches_pure_training_bit_for_bit() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)], false).unwrap();
        let corpus = crate::walk::generate_corpus(
            &g,
            &crate::walk::WalkConfig {
                walks_per_node: 3,
                walk_length: 8,
                seed: 5,
                ..crate::walk::WalkConfig::default()
            },
        )
        .unwrap();
        let tcfg = TrainConfig {
            dim: 4,
            hidden: 4,
            epochs: 5,
            seed: 17,
            ..TrainConfig::default()
        };
        let lap_off = LapConfig {
            steps_per_epoch: 0,
            ..LapConfig::default()
        };
        let outcome = alternating_train(&g, &corpus, tcfg.clone(), &lap_off).unwrap();
        assert_eq!(outcome.history.len(), 5);

        let (mut model, mut emb) = Model::new(g.node_count(), tcfg).unwrap();
        let mut losses = Vec::new();
        for _ in 0..5 {
            losses.push(model.train_epoch(&mut emb, &corpus).unwrap());
        }
        assert_eq!(emb.values, outcome.embedding.values);
        let outcome_losses: Vec<f64> = outcome.history.iter().map(|r| r.pred_loss).collect();
        assert_eq!(losses, outcome_losses);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let g = two_node_graph();
        let corpus = WalkCorpus {
            walks: vec![vec![0, 1], vec![1, 0]],
        };
        let tcfg = TrainConfig {
            dim: 2,
            hidden: 2,
            epochs: 0,
            seed: 9,
            ..TrainConfig::default()
        };
        let outcome = alternating_train(&g, &corpus, tcfg.clone(), &LapConfig::default()).unwrap();
        let (_, emb) = Model::new(2, tcfg).unwrap();
        assert_eq!(outcome.embedding.values, emb.values);
        assert!(outcome.history.is_empty());
    }
}
