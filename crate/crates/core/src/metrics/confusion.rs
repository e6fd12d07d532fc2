use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

/// Binary confusion counts with Pneumonia (label 1) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    pub const fn new(tn: u64, fp: u64, fn_: u64, tp: u64) -> Self {
        Self { tn, fp, fn_, tp }
    }

    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    /// The matrix obtained by swapping predictions and ground truth.
    pub fn transposed(&self) -> Self {
        Self::new(self.tn, self.fn_, self.fp, self.tp)
    }
}

/// Counts each `(prediction, truth)` pair into its quadrant.
pub fn confusion(predicted: &[usize], truth: &[usize]) -> Result<ConfusionMatrix> {
    if predicted.len() != truth.len() {
        return shape_err(
            "confusion",
            format!("{} predictions for {} labels", predicted.len(), truth.len()),
        );
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (0, 0) => cm.tn += 1,
            (1, 0) => cm.fp += 1,
            (0, 1) => cm.fn_ += 1,
            (1, 1) => cm.tp += 1,
            _ => return Err(Error::InvalidLabels(format!("non-binary label pair ({p}, {t})"))),
        }
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `(tp + tn) / total`; `None` for an empty matrix.
pub fn accuracy(cm: &ConfusionMatrix) -> Option<f64> {
    ratio(cm.tp + cm.tn, cm.total())
}

/// `tp / (tp + fp)`; `None` when nothing was predicted positive.
pub fn precision(cm: &ConfusionMatrix) -> Option<f64> {
    ratio(cm.tp, cm.tp + cm.fp)
}

/// `tp / (tp + fn)`; `None` when there are no positive samples.
pub fn recall(cm: &ConfusionMatrix) -> Option<f64> {
    ratio(cm.tp, cm.tp + cm.fn_)
}

/// Harmonic mean of precision and recall; `None` if either is undefined.
pub fn f1(cm: &ConfusionMatrix) -> Option<f64> {
    let p = precision(cm)?;
    let r = recall(cm)?;
    Some(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
}
