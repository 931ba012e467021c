//! Normalized mutual information between two partitions.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Mutual information normalized by the arithmetic mean of the two
/// entropies. A zero-entropy side (single cluster) yields 0 by convention.
pub fn nmi(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::dimension(format!(
            "{} vs {} labels",
            labels_a.len(),
            labels_b.len()
        )));
    }
    if labels_a.is_empty() {
        return Err(Error::validation("nmi needs at least one sample"));
    }
    let n = labels_a.len() as f64;

    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut count_a: HashMap<usize, f64> = HashMap::new();
    let mut count_b: HashMap<usize, f64> = HashMap::new();
    for (&a, &b) in labels_a.iter().zip(labels_b) {
        *joint.entry((a, b)).or_insert(0.0) += 1.0;
        *count_a.entry(a).or_insert(0.0) += 1.0;
        *count_b.entry(b).or_insert(0.0) += 1.0;
    }

    let entropy = |counts: &HashMap<usize, f64>| -> f64 {
        counts
            .values()
            .map(|&c| {
                let p = c / n;
                -p * p.ln()
            })
            .sum()
    };
    let h_a = entropy(&count_a);
    let h_b = entropy(&count_b);
    if h_a == 0.0 || h_b == 0.0 {
        return Ok(0.0);
    }

    let mut mi = 0.0;
    for (&(a, b), &c) in &joint {
        let p_ab = c / n;
        let p_a = count_a[&a] / n;
        let p_b = count_b[&b] / n;
        mi += p_ab * (p_ab / (p_a * p_b)).ln();
    }

    Ok((mi / ((h_a + h_b) / 2.0)).clamp(0.0, 1.0))
}
