use super::kernels::{self, BatchNormConfig, Mode, Padding, PoolKind, RunningStats};
use super::{ParamId, ParamStore, Scalar, Tensor};
use crate::error::{shape_err, Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Conv2d {
        x: Var,
        k: Var,
        stride: usize,
        padding: Padding,
    },
    Depthwise {
        x: Var,
        k: Var,
        stride: usize,
        padding: Padding,
    },
    Pointwise {
        x: Var,
        k: Var,
    },
    Pool {
        x: Var,
        kind: PoolKind,
        kernel: (usize, usize),
        stride: usize,
        padding: Padding,
    },
    GlobalAvgPool {
        x: Var,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        normalized: Vec<Scalar>,
        inv_std: Vec<Scalar>,
        mode: Mode,
    },
    Relu {
        x: Var,
    },
    Relu6 {
        x: Var,
    },
    Softmax {
        x: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        factor: Scalar,
    },
    BiasAdd {
        x: Var,
        b: Var,
    },
    Concat {
        parts: Vec<Var>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Arguments for [`Tape::batch_norm`].
pub struct BatchNormArgs<'a> {
    pub gamma: Var,
    pub beta: Var,
    pub stats: &'a mut RunningStats,
    pub mode: Mode,
    pub config: BatchNormConfig,
}

/// Records a forward pass so gradients can be propagated back through it.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of the backward seed with respect to every recorded value.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op) -> Result<Var> {
        value.ensure_finite(op_name)?;
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a constant input. Its gradient is still available from [`Gradients`].
    pub fn input(&mut self, value: Tensor) -> Result<Var> {
        self.push("input", value, Op::Input)
    }

    /// Records the current value of a parameter.
    pub fn param(&mut self, params: &ParamStore, id: ParamId) -> Result<Var> {
        let mut value = params.value(id).clone();
        value.zero_grad();
        self.push("param", value, Op::Param(id))
    }

    pub fn conv2d(&mut self, x: Var, k: Var, stride: usize, padding: Padding) -> Result<Var> {
        let out = kernels::conv2d(self.value(x), self.value(k), stride, padding)?;
        self.push("conv2d", out, Op::Conv2d { x, k, stride, padding })
    }

    pub fn depthwise_conv2d(&mut self, x: Var, k: Var, stride: usize, padding: Padding) -> Result<Var> {
        let out = kernels::depthwise_conv2d(self.value(x), self.value(k), stride, padding)?;
        self.push("depthwise_conv2d", out, Op::Depthwise { x, k, stride, padding })
    }

    pub fn pointwise_conv2d(&mut self, x: Var, k: Var) -> Result<Var> {
        let out = kernels::pointwise_conv2d(self.value(x), self.value(k))?;
        self.push("pointwise_conv2d", out, Op::Pointwise { x, k })
    }

    pub fn pool2d(
        &mut self,
        x: Var,
        kind: PoolKind,
        kernel: (usize, usize),
        stride: usize,
        padding: Padding,
    ) -> Result<Var> {
        let out = kernels::pool2d(self.value(x), kind, kernel, stride, padding)?;
        self.push(
            "pool2d",
            out,
            Op::Pool {
                x,
                kind,
                kernel,
                stride,
                padding,
            },
        )
    }

    pub fn global_average_pool(&mut self, x: Var) -> Result<Var> {
        let out = kernels::global_average_pool(self.value(x))?;
        self.push("global_average_pool", out, Op::GlobalAvgPool { x })
    }

    pub fn batch_norm(&mut self, x: Var, args: BatchNormArgs<'_>) -> Result<Var> {
        let out = kernels::batch_norm(
            self.value(x),
            self.value(args.gamma),
            self.value(args.beta),
            args.stats,
            args.mode,
            args.config,
        )?;
        self.push(
            "batch_norm",
            out.output,
            Op::BatchNorm {
                x,
                gamma: args.gamma,
                beta: args.beta,
                normalized: out.normalized,
                inv_std: out.inv_std,
                mode: args.mode,
            },
        )
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = kernels::relu(self.value(x));
        self.push("relu", out, Op::Relu { x })
    }

    pub fn relu6(&mut self, x: Var) -> Result<Var> {
        let out = kernels::relu6(self.value(x));
        self.push("relu6", out, Op::Relu6 { x })
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let out = kernels::softmax(self.value(x))?;
        self.push("softmax", out, Op::Softmax { x })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = kernels::add(self.value(a), self.value(b))?;
        self.push("add", out, Op::Add { a, b })
    }

    pub fn scale(&mut self, x: Var, factor: Scalar) -> Result<Var> {
        let out = kernels::scale(self.value(x), factor);
        self.push("scale", out, Op::Scale { x, factor })
    }

    pub fn bias_add(&mut self, x: Var, b: Var) -> Result<Var> {
        let out = kernels::bias_add(self.value(x), self.value(b))?;
        self.push("bias_add", out, Op::BiasAdd { x, b })
    }

    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let out = kernels::concat_channels(&values)?;
        self.push("concat_channels", out, Op::Concat { parts: parts.to_vec() })
    }

    /// Propagates `seed` (the gradient of some scalar loss with respect to
    /// `output`) back through the tape.
    ///
    /// Gradients of trainable parameters are accumulated into their
    /// [`Tensor::grad`] slot in `params`; non-trainable parameters are skipped.
    pub fn backward(&self, output: Var, seed: &Tensor, params: &mut ParamStore) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::EmptyTape);
        }
        if output.0 >= self.nodes.len() {
            return shape_err("backward", "output variable is not on this tape");
        }
        if seed.shape() != self.value(output).shape() {
            return shape_err(
                "backward",
                format!("seed {:?} for output {:?}", seed.shape(), self.value(output).shape()),
            );
        }
        let mut grads: Vec<Option<Vec<Scalar>>> = vec![None; output.0 + 1];
        grads[output.0] = Some(seed.data().to_vec());

        fn acc(grads: &mut [Option<Vec<Scalar>>], v: Var, delta: Vec<Scalar>) {
            match &mut grads[v.0] {
                Some(g) => g.iter_mut().zip(&delta).for_each(|(a, b)| *a += b),
                slot @ None => *slot = Some(delta),
            }
        }

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].as_ref() else { continue };
            let node = &self.nodes[i];
            let gt = Tensor::from_parts(node.value.shape().to_vec(), g.clone());
            gt.ensure_finite("backward")?;
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    let p = params.get_mut(*id);
                    if p.trainable {
                        p.value.accumulate_grad(gt.data())?;
                    }
                }
                Op::Conv2d { x, k, stride, padding } => {
                    let (gx, gk) = kernels::conv2d_backward(self.value(*x), self.value(*k), *stride, *padding, &gt)?;
                    acc(&mut grads, *x, gx);
                    acc(&mut grads, *k, gk);
                }
                Op::Depthwise { x, k, stride, padding } => {
                    let (gx, gk) =
                        kernels::depthwise_conv2d_backward(self.value(*x), self.value(*k), *stride, *padding, &gt)?;
                    acc(&mut grads, *x, gx);
                    acc(&mut grads, *k, gk);
                }
                Op::Pointwise { x, k } => {
                    let (gx, gk) = kernels::pointwise_conv2d_backward(self.value(*x), self.value(*k), &gt);
                    acc(&mut grads, *x, gx);
                    acc(&mut grads, *k, gk);
                }
                Op::Pool {
                    x,
                    kind,
                    kernel,
                    stride,
                    padding,
                } => {
                    let gx = kernels::pool2d_backward(self.value(*x), *kind, *kernel, *stride, *padding, &gt)?;
                    acc(&mut grads, *x, gx);
                }
                Op::GlobalAvgPool { x } => {
                    let gx = kernels::global_average_pool_backward(self.value(*x).shape(), &gt);
                    acc(&mut grads, *x, gx);
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    normalized,
                    inv_std,
                    mode,
                } => {
                    let (gx, gg, gb) =
                        kernels::batch_norm_backward(self.value(*gamma), normalized, inv_std, *mode, &gt);
                    acc(&mut grads, *x, gx);
                    acc(&mut grads, *gamma, gg);
                    acc(&mut grads, *beta, gb);
                }
                Op::Relu { x } => {
                    let gx = kernels::relu_backward(self.value(*x), &gt);
                    acc(&mut grads, *x, gx);
                }
                Op::Relu6 { x } => {
                    let gx = kernels::relu6_backward(self.value(*x), &gt);
                    acc(&mut grads, *x, gx);
                }
                Op::Softmax { x } => {
                    let gx = kernels::softmax_backward(&node.value, &gt);
                    acc(&mut grads, *x, gx);
                }
                Op::Add { a, b } => {
                    acc(&mut grads, *a, gt.data().to_vec());
                    acc(&mut grads, *b, gt.into_data());
                }
                Op::Scale { x, factor } => {
                    acc(&mut grads, *x, kernels::scale(&gt, *factor).into_data());
                }
                Op::BiasAdd { x, b } => {
                    let gb = kernels::bias_add_backward(self.value(*b).len(), &gt);
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *x, gt.into_data());
                }
                Op::Concat { parts } => {
                    let widths: Vec<usize> = parts.iter().map(|&p| *self.value(p).shape().last().unwrap()).collect();
                    for (&p, gp) in parts.iter().zip(kernels::concat_channels_backward(&widths, &gt)) {
                        acc(&mut grads, p, gp);
                    }
                }
            }
        }

        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| g.map(|g| Tensor::from_parts(self.nodes[i].value.shape().to_vec(), g)))
            .collect();
        Ok(Gradients { grads })
    }
}
