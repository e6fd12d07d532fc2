use std::collections::BTreeMap;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{apply_stat_updates, BatchNorm, Conv, Forward, Pointwise};
use super::spec::{BlockKind, BlockSpec};
use super::units::{Block, TransitionLayer};
use crate::error::{shape_err, Error, Result};
use crate::tensor::{Mode, ParamStore, Tape, Tensor, Var};

/// Everything needed to rebuild a toy model's structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub arch: BlockKind,
    pub depth: usize,
    /// Stem width; every block keeps this width except inside dense blocks.
    pub width: usize,
    pub num_classes: usize,
    pub input_channels: usize,
    pub stem_stride: usize,
    pub expansion_factor: f64,
    pub growth_rate: usize,
    pub dense_layers: usize,
    pub residual_scale: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(arch: BlockKind) -> Self {
        Self {
            arch,
            depth: 3,
            width: 8,
            num_classes: 2,
            input_channels: 3,
            stem_stride: 2,
            expansion_factor: 4.0,
            growth_rate: 4,
            dense_layers: 2,
            residual_scale: 0.2,
            seed: 0,
        }
    }

    pub fn to_kv(&self) -> String {
        format!(
            "arch={}\ndepth={}\nwidth={}\nnum_classes={}\ninput_channels={}\nstem_stride={}\n\
             expansion_factor={}\ngrowth_rate={}\ndense_layers={}\nresidual_scale={}\nseed={}\n",
            self.arch,
            self.depth,
            self.width,
            self.num_classes,
            self.input_channels,
            self.stem_stride,
            self.expansion_factor,
            self.growth_rate,
            self.dense_layers,
            self.residual_scale,
            self.seed
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let map: BTreeMap<&str, &str> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_once('=')
                    .map(|(k, v)| (k.trim(), v.trim()))
                    .ok_or_else(|| Error::Parse(format!("expected key=value, got `{l}`")))
            })
            .collect::<Result<_>>()?;
        fn field<T: std::str::FromStr>(map: &BTreeMap<&str, &str>, key: &str) -> Result<T> {
            map.get(key)
                .ok_or_else(|| Error::Parse(format!("missing `{key}`")))?
                .parse()
                .map_err(|_| Error::Parse(format!("bad value for `{key}`")))
        }
        Ok(Self {
            arch: map
                .get("arch")
                .ok_or_else(|| Error::Parse("missing `arch`".into()))?
                .parse()?,
            depth: field(&map, "depth")?,
            width: field(&map, "width")?,
            num_classes: field(&map, "num_classes")?,
            input_channels: field(&map, "input_channels")?,
            stem_stride: field(&map, "stem_stride")?,
            expansion_factor: field(&map, "expansion_factor")?,
            growth_rate: field(&map, "growth_rate")?,
            dense_layers: field(&map, "dense_layers")?,
            residual_scale: field(&map, "residual_scale")?,
            seed: field(&map, "seed")?,
        })
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    Block(Block),
    Relu,
    Transition(TransitionLayer),
}

/// Stem convolution, a stack of blocks, global average pooling and a fully
/// connected classifier. [`ModelGraph::forward`] ends in a softmax.
#[derive(Debug, Clone)]
pub struct ModelGraph {
    config: ModelConfig,
    params: ParamStore,
    stem: Conv,
    layers: Vec<Layer>,
    head_norm: Option<BatchNorm>,
    classifier: Pointwise,
}

impl ModelGraph {
    pub fn build(config: ModelConfig) -> Result<Self> {
        if config.depth == 0 {
            return Err(Error::InvalidSpec("depth must be at least 1".into()));
        }
        if config.width == 0 || config.num_classes < 2 || config.input_channels == 0 {
            return Err(Error::InvalidSpec(
                "width and input channels must be positive, num_classes >= 2".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        let w = config.width;
        let stem = Conv::new(
            &mut params,
            "stem",
            3,
            config.input_channels,
            w,
            config.stem_stride,
            true,
            &mut rng,
        )?;
        let mut layers = Vec::new();
        let mut channels = w;
        let mut head_norm = None;
        for i in 0..config.depth {
            let name = format!("block{i}");
            let spec = match config.arch {
                BlockKind::MobilenetInvertedResidual => {
                    BlockSpec::new(config.arch, channels, w).with_expansion(config.expansion_factor)
                }
                BlockKind::DensenetDense => {
                    BlockSpec::new(config.arch, channels, w).with_growth(config.growth_rate, config.dense_layers)
                }
                BlockKind::InceptionResnetHybrid => {
                    BlockSpec::new(config.arch, channels, channels).with_residual_scale(config.residual_scale)
                }
                BlockKind::XceptionSep | BlockKind::ResnetV2Preact => BlockSpec::new(config.arch, channels, w),
            };
            layers.push(Layer::Block(Block::new(&spec, &mut params, &name, &mut rng)?));
            channels = spec.output_channels();
            match config.arch {
                BlockKind::XceptionSep | BlockKind::InceptionResnetHybrid => layers.push(Layer::Relu),
                BlockKind::DensenetDense if i + 1 < config.depth => {
                    layers.push(Layer::Transition(TransitionLayer::new(
                        &mut params,
                        &format!("transition{i}"),
                        channels,
                        w,
                        &mut rng,
                    )?));
                    channels = w;
                }
                _ => {}
            }
        }
        if matches!(config.arch, BlockKind::ResnetV2Preact | BlockKind::DensenetDense) {
            head_norm = Some(BatchNorm::new(&mut params, "head.bn", channels)?);
        }
        let classifier = Pointwise::new(&mut params, "classifier", channels, config.num_classes, true, &mut rng)?;
        info!(
            "built {} model: depth {}, width {}, {} trainable scalars",
            config.arch,
            config.depth,
            config.width,
            params.trainable_count()
        );
        Ok(Self {
            config,
            params,
            stem,
            layers,
            head_norm,
            classifier,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    /// Pre-softmax class scores `[N, K]`.
    pub fn forward_logits(&self, f: &mut Forward, x: Var) -> Result<Var> {
        let shape = f.tape.value(x).shape();
        if shape.len() != 4 || shape[3] != self.config.input_channels {
            return shape_err(
                "model",
                format!("expected [N,H,W,{}] input, got {shape:?}", self.config.input_channels),
            );
        }
        let h = self.stem.forward(f, x)?;
        let mut h = f.tape.relu(h)?;
        for layer in &self.layers {
            h = match layer {
                Layer::Block(b) => b.forward(f, h)?,
                Layer::Relu => f.tape.relu(h)?,
                Layer::Transition(t) => t.forward(f, h)?,
            };
        }
        if let Some(bn) = &self.head_norm {
            h = bn.forward_relu(f, h)?;
        }
        let pooled = f.tape.global_average_pool(h)?;
        self.classifier.forward(f, pooled)
    }

    /// Class probabilities `[N, K]`.
    pub fn forward(&self, f: &mut Forward, x: Var) -> Result<Var> {
        let logits = self.forward_logits(f, x)?;
        f.tape.softmax(logits)
    }

    /// Inference-mode logits, evaluated in chunks of rows.
    pub fn predict_logits(&self, images: &Tensor) -> Result<Tensor> {
        const CHUNK: usize = 64;
        let n = images.shape()[0];
        let mut out = Vec::with_capacity(n * self.config.num_classes);
        let mut tape = Tape::new();
        for start in (0..n).step_by(CHUNK) {
            let rows = images.slice_rows(start, CHUNK.min(n - start))?;
            tape.clear();
            let mut f = Forward::new(&mut tape, &self.params, Mode::Infer);
            let x = f.tape.input(rows)?;
            let y = self.forward_logits(&mut f, x)?;
            out.extend_from_slice(tape.value(y).data());
        }
        Tensor::new([n, self.config.num_classes], out)
    }

    pub fn predict_proba(&self, images: &Tensor) -> Result<Tensor> {
        crate::tensor::kernels::softmax(&self.predict_logits(images)?)
    }

    /// Train-mode forward pass that also writes batch-norm running statistics.
    pub fn forward_train(&mut self, tape: &mut Tape, images: Tensor) -> Result<Var> {
        let mut f = Forward::new(tape, &self.params, Mode::Train);
        let x = f.tape.input(images)?;
        let y = self.forward(&mut f, x)?;
        let updates = f.into_updates();
        apply_stat_updates(&mut self.params, updates);
        Ok(y)
    }
}

/// Builds a toy classifier of the given block family with default
/// hyper-parameters (3-channel input, stride-2 stem) and seeded He-normal
/// initialization.
pub fn build_toy_model(
    architecture: &str,
    depth: usize,
    width: usize,
    num_classes: usize,
    seed: u64,
) -> Result<ModelGraph> {
    let arch: BlockKind = architecture.parse()?;
    ModelGraph::build(ModelConfig {
        depth,
        width,
        num_classes,
        seed,
        ..ModelConfig::new(arch)
    })
}
