use crate::data::dataset::validate_one_hot;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Floor applied to predicted probabilities before taking the log.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Predicted class probabilities and one-hot targets, both `[M, K]`.
#[derive(Debug, Clone, Copy)]
pub struct LossInput<'a> {
    predictions: &'a Tensor,
    targets: &'a Tensor,
}

impl<'a> LossInput<'a> {
    pub fn new(predictions: &'a Tensor, targets: &'a Tensor) -> Result<Self> {
        if predictions.rank() != 2 || predictions.shape() != targets.shape() {
            return Err(Error::InvalidLossInput(format!(
                "predictions {:?} vs targets {:?}",
                predictions.shape(),
                targets.shape()
            )));
        }
        validate_one_hot(targets)?;
        if predictions.data().iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidLossInput(
                "predictions must be finite and non-negative".into(),
            ));
        }
        Ok(Self { predictions, targets })
    }

    pub fn rows(&self) -> usize {
        self.predictions.shape()[0]
    }

    pub fn classes(&self) -> usize {
        self.predictions.shape()[1]
    }
}

/// Mean categorical cross-entropy and its gradient with respect to the
/// predictions.
pub fn categorical_cross_entropy(input: &LossInput) -> Result<(f64, Tensor)> {
    let m = input.rows() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; input.predictions.len()];
    for ((g, &h), &y) in grad.iter_mut().zip(input.predictions.data()).zip(input.targets.data()) {
        if y != 0.0 {
            let h = h.max(PROBABILITY_FLOOR);
            loss += -y * h.ln();
            *g = -y / (m * h);
        }
    }
    let grad = Tensor::new(input.predictions.shape().to_vec(), grad)?;
    Ok((loss / m, grad))
}

/// Fraction of rows whose arg-max prediction hits the hot target.
pub fn accuracy(predictions: &Tensor, targets: &Tensor) -> f64 {
    let k = predictions.shape()[1];
    let hits = predictions
        .data()
        .chunks_exact(k)
        .zip(targets.data().chunks_exact(k))
        .filter(|(p, t)| argmax(p) == argmax(t))
        .count();
    hits as f64 / (predictions.len() / k) as f64
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
