//! Binary ranking metrics: AUC (midrank statistic) and average precision.

use crate::error::{Error, Result};

/// AUC via the rank-sum statistic with midranks for ties, and AP as
/// precision-weighted recall increments over descending score thresholds.
pub fn rank_metrics(scores: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::validation(
            "ranking metrics need at least one positive and one negative",
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .expect("scores must not be NaN")
    });

    // ascending midranks; sum over positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum += midrank;
            }
        }
        i = j + 1;
    }
    let p = positives as f64;
    let n = negatives as f64;
    let auc = (rank_sum - p * (p + 1.0) / 2.0) / (p * n);

    // descending threshold sweep, tied scores processed as one group
    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_recall = 0.0;
    let mut i = order.len();
    while i > 0 {
        let mut j = i;
        while j > 1 && scores[order[j - 2]] == scores[order[i - 1]] {
            j -= 1;
        }
        for &idx in &order[j - 1..i] {
            if labels[idx] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let recall = tp as f64 / p;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j - 1;
    }

    Ok((auc, ap))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation_scores_one() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        let (auc, ap) = rank_metrics(&scores, &labels).unwrap();
        assert_eq!(auc, 1.0);
        assert_eq!(ap, 1.0);
    }

    #[test]
    fn all_equal_scores_give_half_auc() {
        let scores = [0.5; 6];
        let labels = [true, false, true, false, true, false];
        let (auc, ap) = rank_metrics(&scores, &labels).unwrap();
        assert!((auc - 0.5).abs() < 1e-12);
        assert!((ap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn interleaved_hand_case() {
        let scores = [0.9, 0.8, 0.7, 0.6];
        let labels = [true, false, true, false];
        let (auc, ap) = rank_metrics(&scores, &labels).unwrap();
        assert!((auc - 0.75).abs() < 1e-12);
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_label_sets_error() {
        assert!(rank_metrics(&[0.1, 0.2], &[true, true]).is_err());
        assert!(rank_metrics(&[0.1, 0.2], &[false, false]).is_err());
        assert!(rank_metrics(&[0.1], &[true, false]).is_err());
    }
}
