//! Node classification with a one-vs-rest logistic regression over the
//! embeddings: accuracy for single-label data, micro/macro F1 with the
//! known-label-count protocol for multi-label data.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::logreg::{logreg_fit, LogRegConfig};
use crate::eval::EvalReport;
use crate::graph::LabelSet;
use crate::model::EmbeddingMatrix;
use crate::util::mix_seed;

/// Per-class confusion counts for F1 aggregation.
#[derive(Debug, Clone, Copy, Default)]
struct Confusion {
    tp: usize,
    fp: usize,
    fn_: usize,
}

fn f1(c: &Confusion) -> f64 {
    if c.tp == 0 {
        return 0.0;
    }
    let precision = c.tp as f64 / (c.tp + c.fp) as f64;
    let recall = c.tp as f64 / (c.tp + c.fn_) as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Micro- and macro-averaged F1 over per-class confusions.
fn micro_macro(confusions: &[Confusion]) -> (f64, f64) {
    let total = confusions.iter().fold(Confusion::default(), |acc, c| Confusion {
        tp: acc.tp + c.tp,
        fp: acc.fp + c.fp,
        fn_: acc.fn_ + c.fn_,
    });
    let micro = f1(&total);
    let macro_ = if confusions.is_empty() {
        0.0
    } else {
        confusions.iter().map(f1).sum::<f64>() / confusions.len() as f64
    };
    (micro, macro_)
}

/// Splits labeled nodes into train/test by `train_ratio`, fits one-vs-rest
/// logistic regression on the training embeddings, and scores the held-out
/// nodes. Multi-label data uses the standard protocol where each test node's
/// true label count k_i is known and its top-k_i scored labels are predicted.
pub fn classify_eval(
    emb: &EmbeddingMatrix,
    labels: &LabelSet,
    train_ratio: f64,
    seed: u64,
    logreg_cfg: &LogRegConfig,
) -> Result<EvalReport> {
    if !(0.0 < train_ratio && train_ratio < 1.0) {
        return Err(Error::validation(format!(
            "train ratio must lie in (0, 1), got {train_ratio}"
        )));
    }
    let mut nodes = labels.labeled_nodes();
    if nodes.len() < 2 {
        return Err(Error::validation("need at least two labeled nodes"));
    }
    if nodes.len() < labels.labels.len() {
        eprintln!(
            "warning: {} of {} nodes are unlabeled and excluded from classification",
            labels.labels.len() - nodes.len(),
            labels.labels.len()
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 7));
    nodes.shuffle(&mut rng);
    let n_train = ((train_ratio * nodes.len() as f64).round() as usize)
        .clamp(1, nodes.len() - 1);
    let (train_nodes, test_nodes) = nodes.split_at(n_train);

    let gather = |ids: &[usize]| -> Array2<f64> {
        let mut out = Array2::zeros((ids.len(), emb.dim()));
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).assign(&emb.values.row(id));
        }
        out
    };
    let x_train = gather(train_nodes);
    let x_test = gather(test_nodes);
    let y_train: Vec<Vec<usize>> = train_nodes.iter().map(|&v| labels.labels[v].clone()).collect();

    let ovr = logreg_fit(
        &x_train.view(),
        &y_train,
        labels.num_classes(),
        logreg_cfg,
    )?;

    let mut report = EvalReport::new("classify");
    report.push_config("train-ratio", format!("{train_ratio}"));
    report.push_config("seed", seed.to_string());
    report.push_config("multilabel", labels.is_multilabel().to_string());

    let scores = ovr.scores(&x_test.view());
    let mut confusions = vec![Confusion::default(); ovr.classes.len()];
    let class_slot: std::collections::HashMap<usize, usize> = ovr
        .classes
        .iter()
        .enumerate()
        .map(|(slot, &c)| (c, slot))
        .collect();

    if labels.is_multilabel() {
        for (r, &node) in test_nodes.iter().enumerate() {
            let truth = &labels.labels[node];
            let predicted = ovr.top_k_row(&scores.row(r), truth.len());
            for &c in &predicted {
                let slot = class_slot[&c];
                if truth.contains(&c) {
                    confusions[slot].tp += 1;
                } else {
                    confusions[slot].fp += 1;
                }
            }
            for &c in truth {
                if let Some(&slot) = class_slot.get(&c) {
                    if !predicted.contains(&c) {
                        confusions[slot].fn_ += 1;
                    }
                }
            }
        }
        let (micro, macro_) = micro_macro(&confusions);
        report.push_metric("micro_f1", micro)?;
        report.push_metric("macro_f1", macro_)?;
    } else {
        let mut correct = 0usize;
        for (r, &node) in test_nodes.iter().enumerate() {
            let truth = labels.labels[node][0];
            let row = scores.row(r);
            let mut best = 0;
            for (slot, &s) in row.iter().enumerate() {
                if s > row[best] {
                    best = slot;
                }
            }
            let predicted = ovr.classes[best];
            if predicted == truth {
                correct += 1;
            }
            if let Some(&slot) = class_slot.get(&predicted) {
                if predicted == truth {
                    confusions[slot].tp += 1;
                } else {
                    confusions[slot].fp += 1;
                }
            }
            if predicted != truth {
                if let Some(&slot) = class_slot.get(&truth) {
                    confusions[slot].fn_ += 1;
                }
            }
        }
        let accuracy = correct as f64 / test_nodes.len() as f64;
        let (micro, macro_) = micro_macro(&confusions);
        report.push_metric("accuracy", accuracy)?;
        report.push_metric("micro_f1", micro)?;
        report.push_metric("macro_f1", macro_)?;
    }

    let _ = scores.len_of(Axis(0));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn separated_embedding(per_class: usize, classes: usize) -> (EmbeddingMatrix, LabelSet) {
        let n = per_class * classes;
        let mut values = Array2::zeros((n, classes));
        let mut truth = Vec::with_capacity(n);
        for i in 0..n {
            let c = i / per_class;
            values[[i, c]] = 10.0;
            truth.push(c);
        }
        (
            EmbeddingMatrix { values },
            LabelSet::from_classes(&truth),
        )
    }

    #[test]
    fn separable_classes_reach_full_accuracy() {
        let (emb, labels) = separated_embedding(10, 3);
        for ratio in [0.3, 0.5, 0.7] {
            let report =
                classify_eval(&emb, &labels, ratio, 4, &LogRegConfig::default()).unwrap();
            assert_eq!(report.metric("accuracy"), Some(1.0));
            // micro-F1 equals accuracy on single-label data
            assert_eq!(report.metric("micro_f1"), Some(1.0));
        }
    }

    #[test]
    fn perfect_multilabel_predictions_score_one() {
        // two informative dims; nodes carry one or two labels
        let values = ndarray::arr2(&[
            [10.0, 0.0],
            [10.0, 0.0],
            [0.0, 10.0],
            [0.0, 10.0],
            [10.0, 10.0],
            [10.0, 10.0],
            [10.0, 0.0],
            [0.0, 10.0],
            [10.0, 10.0],
            [10.0, 0.0],
        ]);
        let emb = EmbeddingMatrix { values };
        let labels = LabelSet {
            labels: vec![
                vec![0],
                vec![0],
                vec![1],
                vec![1],
                vec![0, 1],
                vec![0, 1],
                vec![0],
                vec![1],
                vec![0, 1],
                vec![0],
            ],
            label_names: vec!["a".into(), "b".into()],
        };
        let report = classify_eval(&emb, &labels, 0.6, 2, &LogRegConfig::default()).unwrap();
        assert_eq!(report.metric("micro_f1"), Some(1.0));
        assert_eq!(report.metric("macro_f1"), Some(1.0));
    }

    #[test]
    fn shuffled_labels_sit_near_chance() {
        use rand::seq::SliceRandom;
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200;
        let mut values = Array2::zeros((n, 4));
        for v in values.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let mut truth: Vec<usize> = (0..n).map(|i| i % 2).collect();
        truth.shuffle(&mut rng);
        let emb = EmbeddingMatrix { values };
        let labels = LabelSet::from_classes(&truth);
        let mut accs = Vec::new();
        for seed in 0..5 {
            let report =
                classify_eval(&emb, &labels, 0.5, seed, &LogRegConfig::default()).unwrap();
            accs.push(report.metric("accuracy").unwrap());
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        assert!((mean - 0.5).abs() < 0.1, "mean accuracy {mean}");
    }

    #[test]
    fn rejects_bad_ratio() {
        let (emb, labels) = separated_embedding(5, 2);
        assert!(classify_eval(&emb, &labels, 0.0, 0, &LogRegConfig::default()).is_err());
        assert!(classify_eval(&emb, &labels, 1.0, 0, &LogRegConfig::default()).is_err());
    }
}
