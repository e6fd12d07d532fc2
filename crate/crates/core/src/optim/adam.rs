use crate::error::{Error, Result};
use crate::tensor::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// Bias-corrected Adam moments for every trainable entry of a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    /// Indexed by parameter position; `None` for frozen parameters.
    moments: Vec<Option<(Vec<f64>, Vec<f64>)>>,
}

impl AdamState {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Self {
        let moments = params
            .iter()
            .map(|p| {
                p.trainable
                    .then(|| (vec![0.0; p.value.len()], vec![0.0; p.value.len()]))
            })
            .collect();
        Self {
            config,
            step: 0,
            moments,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.learning_rate = lr;
    }

    pub fn first_moment(&self, index: usize) -> Option<&[f64]> {
        self.moments.get(index)?.as_ref().map(|(m, _)| m.as_slice())
    }

    pub fn second_moment(&self, index: usize) -> Option<&[f64]> {
        self.moments.get(index)?.as_ref().map(|(_, v)| v.as_slice())
    }

    /// Applies one update from the gradients accumulated on `params`.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<()> {
        if params.len() != self.moments.len() {
            return Err(Error::UnknownParameter(format!(
                "optimizer tracks {} parameters, store has {}",
                self.moments.len(),
                params.len()
            )));
        }
        for (p, slot) in params.iter().zip(&self.moments) {
            if slot.is_some() && p.value.grad().is_none() {
                return Err(Error::MissingGradient(p.name.clone()));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (p, slot) in params.iter_mut().zip(&mut self.moments) {
            let Some((m, v)) = slot else { continue };
            let grad = p.value.grad().map(|g| g.to_vec()).unwrap_or_default();
            for (((theta, g), m), v) in p.value.data_mut().iter_mut().zip(&grad).zip(m).zip(v) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *theta -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
            p.value.ensure_finite("adam")?;
        }
        Ok(())
    }
}
