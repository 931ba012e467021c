//! Binary and one-vs-rest logistic regression trained by full-batch gradient
//! descent with an adaptive step size.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone)]
pub struct LogRegConfig {
    /// L2 penalty on the weights (the intercept is unpenalized).
    pub l2: f64,
    pub max_iter: usize,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2: 1e-4,
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BinaryLogReg {
    pub weights: Array1<f64>,
    pub bias: f64,
}

impl BinaryLogReg {
    /// Decision value (logit) for one feature row.
    pub fn score_row(&self, x: &ArrayView1<'_, f64>) -> f64 {
        self.weights.dot(x) + self.bias
    }

    /// Logits for every row.
    pub fn scores(&self, x: &ArrayView2<'_, f64>) -> Array1<f64> {
        x.dot(&self.weights) + self.bias
    }

    pub fn prob_row(&self, x: &ArrayView1<'_, f64>) -> f64 {
        sigmoid(self.score_row(x))
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Numerically stable mean negative log-likelihood plus L2 penalty.
fn nll(z: &Array1<f64>, y: &[f64], weights: &Array1<f64>, l2: f64) -> f64 {
    let n = y.len() as f64;
    let data: f64 = z
        .iter()
        .zip(y)
        .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
        .sum();
    data / n + 0.5 * l2 * weights.dot(weights)
}

/// Fits a binary classifier on 0/1 targets. Deterministic: full-batch
/// gradient descent from zero weights, halving the step on any loss increase
/// and stopping at `tol` gradient norm or the iteration cap.
pub fn fit_binary(x: &ArrayView2<'_, f64>, y: &[f64], cfg: &LogRegConfig) -> Result<BinaryLogReg> {
    let n = x.nrows();
    if n == 0 || n != y.len() {
        return Err(Error::dimension(format!(
            "{} feature rows for {} targets",
            n,
            y.len()
        )));
    }
    let p = x.ncols();
    let mut weights = Array1::zeros(p);
    let mut bias = 0.0;
    let mut lr = 1.0;
    let inv_n = 1.0 / n as f64;

    let mut z = x.dot(&weights) + bias;
    let mut loss = nll(&z, y, &weights, cfg.l2);
    for _ in 0..cfg.max_iter {
        let residual: Array1<f64> =
            z.iter().zip(y).map(|(&z, &y)| sigmoid(z) - y).collect();
        let mut grad_w = x.t().dot(&residual);
        grad_w.mapv_inplace(|g| g * inv_n);
        grad_w.scaled_add(cfg.l2, &weights);
        let grad_b = residual.sum() * inv_n;

        let norm = (grad_w.dot(&grad_w) + grad_b * grad_b).sqrt();
        if norm < cfg.tol {
            break;
        }

        let mut accepted = false;
        for _ in 0..60 {
            let mut w_try = weights.clone();
            w_try.scaled_add(-lr, &grad_w);
            let b_try = bias - lr * grad_b;
            let z_try = x.dot(&w_try) + b_try;
            let loss_try = nll(&z_try, y, &w_try, cfg.l2);
            if loss_try <= loss {
                weights = w_try;
                bias = b_try;
                z = z_try;
                loss = loss_try;
                lr = (lr * 1.1).min(1e3);
                accepted = true;
                break;
            }
            lr /= 2.0;
        }
        if !accepted {
            break;
        }
    }

    Ok(BinaryLogReg { weights, bias })
}

/// One-vs-rest wrapper. `classes` are the class ids that had positive
/// examples at fit time, parallel to `models`.
#[derive(Debug, Clone)]
pub struct OneVsRest {
    pub classes: Vec<usize>,
    pub models: Vec<BinaryLogReg>,
}

impl OneVsRest {
    /// Per-class logits, one column per trained class.
    pub fn scores(&self, x: &ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.models.len()));
        for (c, model) in self.models.iter().enumerate() {
            out.column_mut(c).assign(&model.scores(x));
        }
        out
    }

    /// Highest-scoring class id per row.
    pub fn predict(&self, x: &ArrayView2<'_, f64>) -> Vec<usize> {
        self.scores(x)
            .axis_iter(Axis(0))
            .map(|row| {
                let mut best = 0;
                for (c, &s) in row.iter().enumerate() {
                    if s > row[best] {
                        best = c;
                    }
                }
                self.classes[best]
            })
            .collect()
    }

    /// Class ids of the `k` highest-scoring classes for one row.
    pub fn top_k_row(&self, scores_row: &ArrayView1<'_, f64>, k: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..scores_row.len()).collect();
        order.sort_by(|&a, &b| {
            scores_row[b]
                .partial_cmp(&scores_row[a])
                .expect("finite scores")
                .then(a.cmp(&b))
        });
        order
            .into_iter()
            .take(k)
            .map(|c| self.classes[c])
            .collect()
    }
}

/// Fits one binary model per class that has at least one positive example in
/// the training data. Classes without positives are dropped with a warning;
/// a single-class fit degenerates to a constant classifier.
pub fn logreg_fit(
    x: &ArrayView2<'_, f64>,
    targets: &[Vec<usize>],
    num_classes: usize,
    cfg: &LogRegConfig,
) -> Result<OneVsRest> {
    if x.nrows() != targets.len() {
        return Err(Error::dimension(format!(
            "{} feature rows for {} target lists",
            x.nrows(),
            targets.len()
        )));
    }
    let mut present: Vec<usize> = Vec::new();
    for c in 0..num_classes {
        if targets.iter().any(|t| t.contains(&c)) {
            present.push(c);
        }
    }
    if present.len() < num_classes {
        eprintln!(
            "warning: {} of {num_classes} classes have no training examples and were dropped",
            num_classes - present.len()
        );
    }
    if present.is_empty() {
        return Err(Error::validation("no class has training examples"));
    }
    if present.len() == 1 {
        eprintln!("warning: single-class training data; fitting a constant classifier");
    }

    let results = par::map_slice(&present, |&class| {
        let y: Vec<f64> = targets
            .iter()
            .map(|t| if t.contains(&class) { 1.0 } else { 0.0 })
            .collect();
        fit_binary(x, &y, cfg)
    });
    let mut models = Vec::with_capacity(present.len());
    for r in results {
        models.push(r?);
    }
    Ok(OneVsRest {
        classes: present,
        models,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn linearly_separable_data_reaches_full_accuracy() {
        let x = arr2(&[
            [0.0, 0.1],
            [0.2, 0.0],
            [0.1, 0.3],
            [5.0, 5.2],
            [5.1, 4.9],
            [4.8, 5.0],
        ]);
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let model = fit_binary(&x.view(), &y, &LogRegConfig::default()).unwrap();
        for (i, &target) in y.iter().enumerate() {
            let pred = if model.score_row(&x.row(i)) > 0.0 { 1.0 } else { 0.0 };
            assert_eq!(pred, target, "row {i}");
        }
    }

    #[test]
    fn zero_features_recover_class_prior() {
        let x = Array2::zeros((10, 3));
        let y = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let model = fit_binary(&x.view(), &y, &LogRegConfig::default()).unwrap();
        let prior = 0.7;
        assert!((model.prob_row(&x.row(0)) - prior).abs() < 1e-4);
        assert!(model.weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn duplicated_columns_split_weight_and_keep_predictions() {
        let base = arr2(&[[0.1], [0.4], [2.0], [2.3], [0.2], [1.9]]);
        let y = [0.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let cfg = LogRegConfig {
            l2: 0.1,
            ..LogRegConfig::default()
        };
        let single = fit_binary(&base.view(), &y, &cfg).unwrap();

        let mut doubled = Array2::zeros((6, 2));
        doubled.column_mut(0).assign(&base.column(0));
        doubled.column_mut(1).assign(&base.column(0));
        let dup = fit_binary(&doubled.view(), &y, &cfg).unwrap();
        // symmetry: the two duplicated columns carry identical weight
        assert!((dup.weights[0] - dup.weights[1]).abs() < 1e-12);
        // predictions agree in sign with the single-column fit
        for i in 0..6 {
            let a = single.score_row(&base.row(i)) > 0.0;
            let b = dup.score_row(&doubled.row(i)) > 0.0;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn one_vs_rest_predicts_three_classes() {
        let x = arr2(&[
            [0.0, 0.0],
            [0.2, 0.1],
            [10.0, 0.0],
            [9.8, 0.3],
            [0.0, 10.0],
            [0.2, 9.7],
        ]);
        let targets: Vec<Vec<usize>> =
            vec![vec![0], vec![0], vec![1], vec![1], vec![2], vec![2]];
        let ovr = logreg_fit(&x.view(), &targets, 3, &LogRegConfig::default()).unwrap();
        assert_eq!(ovr.classes, vec![0, 1, 2]);
        assert_eq!(ovr.predict(&x.view()), vec![0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn missing_classes_are_dropped() {
        let x = arr2(&[[0.0], [1.0], [2.0], [3.0]]);
        let targets: Vec<Vec<usize>> = vec![vec![0], vec![0], vec![2], vec![2]];
        let ovr = logreg_fit(&x.view(), &targets, 3, &LogRegConfig::default()).unwrap();
        assert_eq!(ovr.classes, vec![0, 2]);
    }
}
