use std::fmt::Write as _;

use crate::error::{shape_err, Error, Result};

/// `(false positive rate, true positive rate)` points, one per distinct
/// score threshold, from `(0, 0)` to `(1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for (x, y) in &self.points {
            let _ = writeln!(out, "{x},{y}");
        }
        out
    }

    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum()
    }
}

/// Sweeps thresholds from the highest score down, grouping tied scores into
/// one step, and integrates with the trapezoid rule.
pub fn roc_auc(scores: &[f64], labels: &[usize]) -> Result<(RocCurve, f64)> {
    if scores.len() != labels.len() {
        return shape_err(
            "roc_auc",
            format!("{} scores for {} labels", scores.len(), labels.len()),
        );
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite { op: "roc_auc" });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidLabels(format!("non-binary label {bad}")));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Undefined(
            "ROC needs at least one positive and one negative sample",
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }
    let curve = RocCurve { points };
    let auc = curve.area();
    Ok((curve, auc))
}
