//! The five block families plus the DenseNet transition layer.

use log::info;
use rand::Rng;

use super::layers::{BatchNorm, Conv, DepthwiseConv, Forward, Pointwise};
use super::spec::{BlockKind, BlockSpec};
use crate::error::{Error, Result};
use crate::tensor::{Padding, ParamStore, PoolKind, Var};

/// Skip path of a residual block.
#[derive(Debug, Clone)]
pub enum Shortcut {
    None,
    Identity,
    Projection(Conv),
}

impl Shortcut {
    fn build<R: Rng + ?Sized>(spec: &BlockSpec, params: &mut ParamStore, name: &str, rng: &mut R) -> Result<Self> {
        if !spec.residual {
            return Ok(Shortcut::None);
        }
        if spec.skip_shapes_match() {
            return Ok(Shortcut::Identity);
        }
        info!(
            "{name}: inserting 1x1 projection on skip path ({} -> {} channels, stride {})",
            spec.channels_in, spec.channels_out, spec.stride
        );
        let conv = Conv::new(
            params,
            &format!("{name}.shortcut"),
            1,
            spec.channels_in,
            spec.channels_out,
            spec.stride,
            false,
            rng,
        )?;
        Ok(Shortcut::Projection(conv))
    }

    /// `branch + skip(x)`, or `branch` when there is no skip.
    fn merge(&self, f: &mut Forward, x: Var, branch: Var) -> Result<Var> {
        match self {
            Shortcut::None => Ok(branch),
            Shortcut::Identity => f.tape.add(branch, x),
            Shortcut::Projection(conv) => {
                let s = conv.forward(f, x)?;
                f.tape.add(branch, s)
            }
        }
    }

    pub fn is_projection(&self) -> bool {
        matches!(self, Shortcut::Projection(_))
    }
}

/// Depthwise then pointwise convolution, no non-linearity in between, with a
/// linear skip connection.
#[derive(Debug, Clone)]
pub struct XceptionSepBlock {
    pub depthwise: DepthwiseConv,
    pub pointwise: Pointwise,
    pub shortcut: Shortcut,
}

impl XceptionSepBlock {
    pub fn new<R: Rng + ?Sized>(spec: &BlockSpec, params: &mut ParamStore, name: &str, rng: &mut R) -> Result<Self> {
        Ok(Self {
            depthwise: DepthwiseConv::new(
                params,
                &format!("{name}.depthwise"),
                3,
                spec.channels_in,
                spec.stride,
                rng,
            )?,
            pointwise: Pointwise::new(
                params,
                &format!("{name}.pointwise"),
                spec.channels_in,
                spec.channels_out,
                true,
                rng,
            )?,
            shortcut: Shortcut::build(spec, params, name, rng)?,
        })
    }

    /// Output of the depthwise stage alone.
    pub fn depthwise_stage(&self, f: &mut Forward, x: Var) -> Result<Var> {
        self.depthwise.forward(f, x)
    }

    pub fn forward(&self, f: &mut Forward, x: Var) -> Result<Var> {
        let d = self.depthwise_stage(f, x)?;
        let p = self.pointwise.forward(f, d)?;
        self.shortcut.merge(f, x, p)
    }
}

/// Expand (ReLU6) -> depthwise (ReLU6) -> linear projection, skip at stride 1.
#[derive(Debug, Clone)]
pub struct InvertedResidualBlock {
    pub expand: Pointwise,
    pub depthwise: DepthwiseConv,
    pub project: Pointwise,
    pub residual: bool,
}

impl InvertedResidualBlock {
    pub fn new<R: Rng + ?Sized>(spec: &BlockSpec, params: &mut ParamStore, name: &str, rng: &mut R) -> Result<Self> {
        let t = spec.expansion_factor.unwrap_or(1.0);
        let hidden = ((spec.channels_in as f64 * t).round() as usize).max(1);
        Ok(Self {
            expand: Pointwise::new(params, &format!("{name}.expand"), spec.channels_in, hidden, true, rng)?,
            depthwise: DepthwiseConv::new(params, &format!("{name}.depthwise"), 3, hidden, spec.stride, rng)?,
            project: Pointwise::new(params, &format!("{name}.project"), hidden, spec.channels_out, true, rng)?,
            residual: spec.residual,
        })
    }

    pub fn forward(&self, f: &mut Forward, x: Var) -> Result<Var> {
        let h = self.expand.forward(f, x)?;
        let h = f.tape.relu6(h)?;
        let h = self.depthwise.forward(f, h)?;
        let h = f.tape.relu6(h)?;
        let y = self.project.forward(f, h)?;
        if self.residual {
            f.tape.add(y, x)
        } else {
            Ok(y)
        }
    }
}

/// BN-ReLU-conv three times (1x1, 3x3, 1x1) with an identity skip.
#[derive(Debug, Clone)]
pub struct PreactResidualUnit {
    pub norms: [BatchNorm; 3],
    pub convs: [Conv; 3],
    pub shortcut: Shortcut,
}

impl PreactResidualUnit {
    pub fn new<R: Rng + ?Sized>(spec: &BlockSpec, params: &mut ParamStore, name: &str, rng: &mut R) -> Result<Self> {
        let mid = spec.hidden(spec.channels_out.div_ceil(2));
        let norms = [
            BatchNorm::new(params, &format!("{name}.bn1"), spec.channels_in)?,
            BatchNorm::new(params, &format!("{name}.bn2"), mid)?,
            BatchNorm::new(params, &format!("{name}.bn3"), mid)?,
        ];
        let convs = [
            Conv::new(
                params,
                &format!("{name}.conv1"),
                1,
                spec.channels_in,
                mid,
                1,
                false,
                rng,
            )?,
            Conv::new(params, &format!("{name}.conv2"), 3, mid, mid, spec.stride, false, rng)?,
            Conv::new(
                params,
                &format!("{name}.conv3"),
                1,
                mid,
                spec.channels_out,
                1,
                false,
                rng,
            )?,
        ];
        Ok(Self {
            norms,
            convs,
            shortcut: Shortcut::build(spec, params, name, rng)?,
        })
    }

    pub fn forward(&self, f: &mut Forward, x: Var) -> Result<Var> {
        let mut h = x;
        for (bn, conv) in self.norms.iter().zip(&self.convs) {
            let a = bn.forward_relu(f, h)?;
            h = conv.forward(f, a)?;
        }
        self.shortcut.merge(f, x, h)
    }
}

/// One BN-ReLU-1x1, BN-ReLU-3x3 layer of a dense block.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub bn1: BatchNorm,
    pub conv1: Conv,
    pub bn2: BatchNorm,
    pub conv2: Conv,
}

impl DenseLayer {
    fn forward(&self, f: &mut Forward, x: Var) -> Result<Var> {
        let a = self.bn1.forward_relu(f, x)?;
        let h = self.conv1.forward(f, a)?;
        let a = self.bn2.forward_relu(f, h)?;
        self.conv2.forward(f, a)
    }
}

/// Every layer consumes the concatenation of the block input and all earlier
/// layer outputs; the block emits the full concatenation.
#[derive(Debug, Clone)]
pub struct DenseBlock {
    pub layers: Vec<DenseLayer>,
}

impl DenseBlock {
    pub fn new<R: Rng + ?Sized>(spec: &BlockSpec, params: &mut ParamStore, name: &str, rng: &mut R) -> Result<Self> {
        let growth = spec.growth_rate.unwrap_or(1);
        let count = spec.layer_count.unwrap_or(0);
        if count == 0 {
            return Err(Error::InvalidSpec("dense block needs layer_count >= 1".into()));
        }
        let bottleneck = 4 * growth;
        let mut layers = Vec::with_capacity(count);
        for i in 0..count {
            let cin = spec.channels_in + i * growth;
            let ln = format!("{name}.layer{i}");
            layers.push(DenseLayer {
                bn1: BatchNorm::new(params, &format!("{ln}.bn1"), cin)?,
                conv1: Conv::new(params, &format!("{ln}.conv1"), 1, cin, bottleneck, 1, false, rng)?,
                bn2: BatchNorm::new(params, &format!("{ln}.bn2"), bottleneck)?,
                conv2: Conv::new(params, &format!("{ln}.conv2"), 3, bottleneck, growth, 1, false, rng)?,
            });
        }
        Ok(Self { layers })
    }

    /// Returns the block output and the input seen by each inner layer.
    pub fn forward_traced(&self, f: &mut Forward, x: Var) -> Result<(Var, Vec<Var>)> {
        let mut features = vec![x];
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = x;
        for layer in &self.layers {
            inputs.push(current);
            let out = layer.forward(f, current)?;
            features.push(out);
            current = f.tape.concat_channels(&features)?;
        }
        Ok((current, inputs))
    }

    pub fn forward(&self, f: &mut Forward, x: Var) -> Result<Var> {
        self.forward_traced(f, x).map(|(y, _)| y)
    }
}

/// BN-ReLU-1x1 convolution followed by 2x2 average pooling.
#[derive(Debug, Clone)]
pub struct TransitionLayer {
    pub bn: BatchNorm,
    pub conv: Conv,
}

impl TransitionLayer {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            bn: BatchNorm::new(params, &format!("{name}.bn"), cin)?,
            conv: Conv::new(params, &format!("{name}.conv"), 1, cin, cout, 1, false, rng)?,
        })
    }

    pub fn forward(&self, f: &mut Forward, x: Var) -> Result<Var> {
        let a = self.bn.forward_relu(f, x)?;
        let h = self.conv.forward(f, a)?;
        f.tape.pool2d(h, PoolKind::Average, (2, 2), 2, Padding::Same)
    }
}

/// Two parallel branches (1x1, and 1x1 -> 3x3), concatenated, projected back
/// to the input width, scaled, and added to the input.
#[derive(Debug, Clone)]
pub struct InceptionResnetModule {
    pub branch_1x1: Pointwise,
    pub branch_3x3_reduce: Pointwise,
    pub branch_3x3: Conv,
    pub project: Pointwise,
    pub residual_scale: f64,
}

impl InceptionResnetModule {
    pub fn new<R: Rng + ?Sized>(spec: &BlockSpec, params: &mut ParamStore, name: &str, rng: &mut R) -> Result<Self> {
        let c = spec.channels_in;
        let b = spec.hidden(c.div_ceil(2));
        Ok(Self {
            branch_1x1: Pointwise::new(params, &format!("{name}.branch0"), c, b, true, rng)?,
            branch_3x3_reduce: Pointwise::new(params, &format!("{name}.branch1a"), c, b, true, rng)?,
            branch_3x3: Conv::new(params, &format!("{name}.branch1b"), 3, b, b, 1, true, rng)?,
            project: Pointwise::new(params, &format!("{name}.project"), 2 * b, c, true, rng)?,
            residual_scale: spec.residual_scale.unwrap_or(0.2),
        })
    }

    /// The unscaled residual branch.
    pub fn branch(&self, f: &mut Forward, x: Var) -> Result<Var> {
        let a = self.branch_1x1.forward(f, x)?;
        let a = f.tape.relu(a)?;
        let b = self.branch_3x3_reduce.forward(f, x)?;
        let b = f.tape.relu(b)?;
        let b = self.branch_3x3.forward(f, b)?;
        let b = f.tape.relu(b)?;
        let cat = f.tape.concat_channels(&[a, b])?;
        self.project.forward(f, cat)
    }

    pub fn forward(&self, f: &mut Forward, x: Var) -> Result<Var> {
        let r = self.branch(f, x)?;
        let r = f.tape.scale(r, self.residual_scale)?;
        f.tape.add(x, r)
    }
}

/// Any of the five block families.
#[derive(Debug, Clone)]
pub enum Block {
    XceptionSep(XceptionSepBlock),
    InvertedResidual(InvertedResidualBlock),
    PreactResidual(PreactResidualUnit),
    Dense(DenseBlock),
    InceptionResnet(InceptionResnetModule),
}

impl Block {
    /// Validates `spec` and registers the block's parameters under `name`.
    pub fn new<R: Rng + ?Sized>(spec: &BlockSpec, params: &mut ParamStore, name: &str, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        Ok(match spec.kind {
            BlockKind::XceptionSep => Block::XceptionSep(XceptionSepBlock::new(spec, params, name, rng)?),
            BlockKind::MobilenetInvertedResidual => {
                Block::InvertedResidual(InvertedResidualBlock::new(spec, params, name, rng)?)
            }
            BlockKind::ResnetV2Preact => Block::PreactResidual(PreactResidualUnit::new(spec, params, name, rng)?),
            BlockKind::DensenetDense => Block::Dense(DenseBlock::new(spec, params, name, rng)?),
            BlockKind::InceptionResnetHybrid => {
                Block::InceptionResnet(InceptionResnetModule::new(spec, params, name, rng)?)
            }
        })
    }

    pub fn forward(&self, f: &mut Forward, x: Var) -> Result<Var> {
        match self {
            Block::XceptionSep(b) => b.forward(f, x),
            Block::InvertedResidual(b) => b.forward(f, x),
            Block::PreactResidual(b) => b.forward(f, x),
            Block::Dense(b) => b.forward(f, x),
            Block::InceptionResnet(b) => b.forward(f, x),
        }
    }
}
