//! Downstream evaluation: clustering, classification, reconstruction, and
//! link prediction, with a shared report type.

pub mod classify;
pub mod kmeans;
pub mod linkpred;
pub mod logreg;
pub mod nmi;
pub mod ranking;
pub mod reconstruct;

pub use classify::classify_eval;
pub use kmeans::{kmeans, KMEANS_RESTARTS};
pub use linkpred::link_prediction_eval;
pub use logreg::{fit_binary, logreg_fit, BinaryLogReg, LogRegConfig, OneVsRest};
pub use nmi::nmi;
pub use ranking::rank_metrics;
pub use reconstruct::{mean_average_precision, reconstruction_eval, Similarity};

use crate::error::{Error, Result};
use crate::graph::LabelSet;
use crate::model::EmbeddingMatrix;

/// Named metric values plus an echo of the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub task: String,
    pub metrics: Vec<(String, f64)>,
    pub config: Vec<(String, String)>,
}

impl EvalReport {
    pub fn new(task: impl Into<String>) -> EvalReport {
        EvalReport {
            task: task.into(),
            metrics: Vec::new(),
            config: Vec::new(),
        }
    }

    pub fn push_metric(&mut self, name: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::validation(format!(
                "metric `{name}` is not finite: {value}"
            )));
        }
        self.metrics.push((name.to_string(), value));
        Ok(())
    }

    pub fn push_config(&mut self, key: &str, value: impl Into<String>) {
        self.config.push((key.to_string(), value.into()));
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
    }

    /// CSV with the configuration embedded as comment lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# task={}\n", self.task));
        for (k, v) in &self.config {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out.push_str("metric,value\n");
        for (name, value) in &self.metrics {
            out.push_str(&format!("{name},{value}\n"));
        }
        out
    }
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "task: {}", self.task)?;
        for (k, v) in &self.config {
            writeln!(f, "  {k} = {v}")?;
        }
        let width = self
            .metrics
            .iter()
            .map(|(n, _)| n.len())
            .max()
            .unwrap_or(0);
        for (name, value) in &self.metrics {
            writeln!(f, "  {name:width$}  {value:.4}")?;
        }
        Ok(())
    }
}

/// K-means over the embeddings followed by NMI against the labeled nodes.
pub fn cluster_eval(
    emb: &EmbeddingMatrix,
    labels: &LabelSet,
    k: usize,
    seed: u64,
) -> Result<EvalReport> {
    if labels.is_multilabel() {
        return Err(Error::validation(
            "clustering evaluation needs single-label ground truth",
        ));
    }
    let labeled = labels.labeled_nodes();
    if labeled.is_empty() {
        return Err(Error::validation("no labeled nodes for clustering"));
    }
    let assignment = kmeans(&emb.values.view(), k, seed)?;
    let truth: Vec<usize> = labeled.iter().map(|&v| labels.labels[v][0]).collect();
    let found: Vec<usize> = labeled.iter().map(|&v| assignment[v]).collect();
    let score = nmi(&found, &truth)?;

    let mut report = EvalReport::new("cluster");
    report.push_config("k", k.to_string());
    report.push_config("seed", seed.to_string());
    report.push_metric("nmi", score)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn report_rejects_non_finite_metrics() {
        let mut report = EvalReport::new("test");
        assert!(report.push_metric("bad", f64::NAN).is_err());
        assert!(report.push_metric("good", 0.5).is_ok());
        assert_eq!(report.metric("good"), Some(0.5));
    }

    #[test]
    fn csv_embeds_config() {
        let mut report = EvalReport::new("cluster");
        report.push_config("seed", "7");
        report.push_metric("nmi", 0.25).unwrap();
        let csv = report.to_csv();
        assert!(csv.contains("# task=cluster"));
        assert!(csv.contains("# seed=7"));
        assert!(csv.contains("nmi,0.25"));
    }

    #[test]
    fn cluster_eval_on_separated_blobs() {
        let mut values = Array2::zeros((40, 2));
        let mut truth = Vec::new();
        for i in 0..40 {
            let c = i / 20;
            truth.push(c);
            values[[i, 0]] = c as f64 * 50.0;
        }
        let emb = EmbeddingMatrix { values };
        let labels = LabelSet::from_classes(&truth);
        let report = cluster_eval(&emb, &labels, 2, 3).unwrap();
        assert_eq!(report.metric("nmi"), Some(1.0));
    }
}
