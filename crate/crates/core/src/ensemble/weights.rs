use log::debug;

use crate::error::{shape_err, Error, Result};
use crate::optim::{categorical_cross_entropy, AdamConfig, AdamState, LossInput};
use crate::tensor::kernels::softmax;
use crate::tensor::{ParamStore, Tensor};

/// Tolerance on `sum(w) == 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Member weights `w = softmax(z)` over unconstrained logits `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleWeights {
    logits: Vec<f64>,
}

impl EnsembleWeights {
    /// Equal weights (`z = 0`).
    pub fn uniform(members: usize) -> Result<Self> {
        Self::from_logits(vec![0.0; members])
    }

    pub fn from_logits(logits: Vec<f64>) -> Result<Self> {
        if logits.len() < 2 {
            return Err(Error::Ensemble(format!(
                "ensemble requires ≥ 2 members, got {}",
                logits.len()
            )));
        }
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite { op: "ensemble_weights" });
        }
        Ok(Self { logits })
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn weights(&self) -> Vec<f64> {
        let max = self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = self.logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        exp.into_iter().map(|e| e / total).collect()
    }
}

/// Fails unless every weight is non-negative and they sum to one.
pub fn check_simplex(weights: &[f64]) -> Result<()> {
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| w.is_nan() || *w < 0.0) || (total - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::Ensemble(format!(
            "weights {weights:?} are off the simplex (sum {total})"
        )));
    }
    Ok(())
}

fn check_members(scores: &[Tensor], count: usize) -> Result<()> {
    if scores.len() != count {
        return Err(Error::Ensemble(format!(
            "{} member outputs for {count} weights",
            scores.len()
        )));
    }
    let first = scores
        .first()
        .ok_or_else(|| Error::Ensemble("no member outputs".into()))?;
    if first.rank() != 2 {
        return shape_err(
            "ensemble_forward",
            format!("member scores must be [N, K], got {:?}", first.shape()),
        );
    }
    if let Some(bad) = scores.iter().find(|s| s.shape() != first.shape()) {
        return shape_err(
            "ensemble_forward",
            format!("member shapes differ: {:?} vs {:?}", first.shape(), bad.shape()),
        );
    }
    Ok(())
}

/// `sum_i w_i * scores_i` without the final softmax.
pub fn combine_scores(scores: &[Tensor], weights: &[f64]) -> Result<Tensor> {
    check_members(scores, weights.len())?;
    check_simplex(weights)?;
    let mut out = vec![0.0; scores[0].len()];
    for (s, &w) in scores.iter().zip(weights) {
        for (o, v) in out.iter_mut().zip(s.data()) {
            *o += w * v;
        }
    }
    Tensor::new(scores[0].shape().to_vec(), out)
}

/// `softmax(sum_i w_i * scores_i)` over pre-softmax member scores `[N, K]`.
pub fn ensemble_forward(scores: &[Tensor], weights: &[f64]) -> Result<Tensor> {
    softmax(&combine_scores(scores, weights)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub adam: AdamConfig,
    pub steps: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig {
                learning_rate: 0.05,
                ..AdamConfig::default()
            },
            steps: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub weights: EnsembleWeights,
    /// Cross-entropy before each step, then after the last one.
    pub loss_history: Vec<f64>,
}

/// Loss and gradient with respect to the weight logits.
pub fn weight_loss_and_gradient(
    scores: &[Tensor],
    labels: &Tensor,
    weights: &EnsembleWeights,
) -> Result<(f64, Vec<f64>)> {
    let w = weights.weights();
    let probs = ensemble_forward(scores, &w)?;
    let (loss, _) = categorical_cross_entropy(&LossInput::new(&probs, labels)?)?;
    let m = probs.shape()[0] as f64;
    let dw: Vec<f64> = scores
        .iter()
        .map(|s| {
            s.data()
                .iter()
                .zip(probs.data().iter().zip(labels.data()))
                .map(|(v, (p, y))| v * (p - y) / m)
                .sum()
        })
        .collect();
    let mean: f64 = w.iter().zip(&dw).map(|(wi, gi)| wi * gi).sum();
    let dz = w.iter().zip(&dw).map(|(wi, gi)| wi * (gi - mean)).collect();
    Ok((loss, dz))
}

/// Trains the weight logits with full-batch Adam on the cross-entropy of the
/// ensemble output. Only the logits change; member scores are read-only.
pub fn fit_weights(scores: &[Tensor], labels: &Tensor, config: &FitConfig) -> Result<FitOutcome> {
    let mut weights = EnsembleWeights::uniform(scores.len())?;
    let mut store = ParamStore::new();
    let z = store.add("ensemble.logits", Tensor::zeros([scores.len()])?, true)?;
    let mut adam = AdamState::new(&store, config.adam);
    let mut loss_history = Vec::with_capacity(config.steps + 1);
    for step in 0..config.steps {
        let (loss, grad) = weight_loss_and_gradient(scores, labels, &weights)?;
        loss_history.push(loss);
        store.zero_grads();
        store.get_mut(z).value.accumulate_grad(&grad)?;
        adam.step(&mut store)?;
        weights = EnsembleWeights::from_logits(store.value(z).data().to_vec())?;
        check_simplex(&weights.weights())?;
        if step % 100 == 0 {
            debug!("ensemble step {step}: loss {loss:.6}");
        }
    }
    let (loss, _) = weight_loss_and_gradient(scores, labels, &weights)?;
    loss_history.push(loss);
    Ok(FitOutcome { weights, loss_history })
}
