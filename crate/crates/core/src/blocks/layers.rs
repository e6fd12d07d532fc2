//! Parameterized layers shared by the block implementations.

use rand::Rng;

use crate::error::Result;
use crate::tensor::{
    BatchNormArgs, BatchNormConfig, Mode, Padding, ParamId, ParamStore, RunningStats, Tape, Tensor, Var,
};

/// Running-statistics update produced by a train-mode batch norm.
#[derive(Debug, Clone)]
pub struct StatUpdate {
    pub mean: ParamId,
    pub var: ParamId,
    pub stats: RunningStats,
}

/// State threaded through one forward pass.
pub struct Forward<'a> {
    pub tape: &'a mut Tape,
    pub params: &'a ParamStore,
    pub mode: Mode,
    pub bn: BatchNormConfig,
    updates: Vec<StatUpdate>,
}

impl<'a> Forward<'a> {
    pub fn new(tape: &'a mut Tape, params: &'a ParamStore, mode: Mode) -> Self {
        Self {
            tape,
            params,
            mode,
            bn: BatchNormConfig::default(),
            updates: Vec::new(),
        }
    }

    pub fn with_bn(mut self, bn: BatchNormConfig) -> Self {
        self.bn = bn;
        self
    }

    pub fn param(&mut self, id: ParamId) -> Result<Var> {
        self.tape.param(self.params, id)
    }

    /// Running-statistics updates recorded so far (train mode only).
    pub fn into_updates(self) -> Vec<StatUpdate> {
        self.updates
    }
}

/// Writes train-mode running statistics back into the parameter table.
pub fn apply_stat_updates(params: &mut ParamStore, updates: Vec<StatUpdate>) {
    for u in updates {
        params.get_mut(u.mean).value.data_mut().copy_from_slice(&u.stats.mean);
        params.get_mut(u.var).value.data_mut().copy_from_slice(&u.stats.var);
    }
}

fn he_normal<R: Rng + ?Sized>(shape: Vec<usize>, fan_in: usize, rng: &mut R) -> Result<Tensor> {
    Tensor::randn(shape, (2.0 / fan_in as f64).sqrt(), rng)
}

/// Full `k x k` convolution with optional bias.
#[derive(Debug, Clone)]
pub struct Conv {
    pub kernel: ParamId,
    pub bias: Option<ParamId>,
    pub stride: usize,
    pub padding: Padding,
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamStore,
        name: &str,
        k: usize,
        cin: usize,
        cout: usize,
        stride: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let kernel = params.add(
            format!("{name}.kernel"),
            he_normal(vec![k, k, cin, cout], k * k * cin, rng)?,
            true,
        )?;
        let bias = if bias {
            Some(params.add(format!("{name}.bias"), Tensor::zeros([cout])?, true)?)
        } else {
            None
        };
        Ok(Self {
            kernel,
            bias,
            stride,
            padding: Padding::Same,
        })
    }

    pub fn forward(&self, f: &mut Forward, x: Var) -> Result<Var> {
        let k = f.param(self.kernel)?;
        let y = f.tape.conv2d(x, k, self.stride, self.padding)?;
        match self.bias {
            Some(b) => {
                let b = f.param(b)?;
                f.tape.bias_add(y, b)
            }
            None => Ok(y),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DepthwiseConv {
    pub kernel: ParamId,
    pub stride: usize,
}

impl DepthwiseConv {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamStore,
        name: &str,
        k: usize,
        channels: usize,
        stride: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let kernel = params.add(
            format!("{name}.kernel"),
            he_normal(vec![k, k, channels], k * k, rng)?,
            true,
        )?;
        Ok(Self { kernel, stride })
    }

    pub fn forward(&self, f: &mut Forward, x: Var) -> Result<Var> {
        let k = f.param(self.kernel)?;
        f.tape.depthwise_conv2d(x, k, self.stride, Padding::Same)
    }
}

/// `1 x 1` convolution (or dense layer on `[N, C]` input) with optional bias.
#[derive(Debug, Clone)]
pub struct Pointwise {
    pub kernel: ParamId,
    pub bias: Option<ParamId>,
}

impl Pointwise {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let kernel = params.add(format!("{name}.kernel"), he_normal(vec![cin, cout], cin, rng)?, true)?;
        let bias = if bias {
            Some(params.add(format!("{name}.bias"), Tensor::zeros([cout])?, true)?)
        } else {
            None
        };
        Ok(Self { kernel, bias })
    }

    pub fn forward(&self, f: &mut Forward, x: Var) -> Result<Var> {
        let k = f.param(self.kernel)?;
        let y = f.tape.pointwise_conv2d(x, k)?;
        match self.bias {
            Some(b) => {
                let b = f.param(b)?;
                f.tape.bias_add(y, b)
            }
            None => Ok(y),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
}

impl BatchNorm {
    pub fn new(params: &mut ParamStore, name: &str, channels: usize) -> Result<Self> {
        Ok(Self {
            gamma: params.add(format!("{name}.gamma"), Tensor::ones([channels])?, true)?,
            beta: params.add(format!("{name}.beta"), Tensor::zeros([channels])?, true)?,
            running_mean: params.add(format!("{name}.running_mean"), Tensor::zeros([channels])?, false)?,
            running_var: params.add(format!("{name}.running_var"), Tensor::ones([channels])?, false)?,
        })
    }

    pub fn forward(&self, f: &mut Forward, x: Var) -> Result<Var> {
        let gamma = f.param(self.gamma)?;
        let beta = f.param(self.beta)?;
        let mut stats = RunningStats {
            mean: f.params.value(self.running_mean).data().to_vec(),
            var: f.params.value(self.running_var).data().to_vec(),
        };
        let mode = f.mode;
        let y = f.tape.batch_norm(
            x,
            BatchNormArgs {
                gamma,
                beta,
                stats: &mut stats,
                mode,
                config: f.bn,
            },
        )?;
        if mode == Mode::Train {
            f.updates.push(StatUpdate {
                mean: self.running_mean,
                var: self.running_var,
                stats,
            });
        }
        Ok(y)
    }

    /// `relu(bn(x))`, the pre-activation used before every convolution.
    pub fn forward_relu(&self, f: &mut Forward, x: Var) -> Result<Var> {
        let y = self.forward(f, x)?;
        f.tape.relu(y)
    }
}
