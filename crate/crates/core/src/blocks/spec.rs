use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The five block families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    XceptionSep,
    MobilenetInvertedResidual,
    ResnetV2Preact,
    DensenetDense,
    InceptionResnetHybrid,
}

impl BlockKind {
    pub const ALL: [BlockKind; 5] = [
        BlockKind::DensenetDense,
        BlockKind::XceptionSep,
        BlockKind::InceptionResnetHybrid,
        BlockKind::ResnetV2Preact,
        BlockKind::MobilenetInvertedResidual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BlockKind::XceptionSep => "xception_sep",
            BlockKind::MobilenetInvertedResidual => "mobilenet_inverted_residual",
            BlockKind::ResnetV2Preact => "resnetv2_preact",
            BlockKind::DensenetDense => "densenet_dense",
            BlockKind::InceptionResnetHybrid => "inception_resnet_hybrid",
        }
    }

    /// Name of the full-scale network this block family comes from.
    pub fn network_name(self) -> &'static str {
        match self {
            BlockKind::XceptionSep => "Xception",
            BlockKind::MobilenetInvertedResidual => "MobileNetV2",
            BlockKind::ResnetV2Preact => "ResNet152V2",
            BlockKind::DensenetDense => "DenseNet201",
            BlockKind::InceptionResnetHybrid => "InceptionResNet",
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BlockKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BlockKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownArchitecture(s.to_string()))
    }
}

/// What to do when a residual add sees mismatched shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionPolicy {
    /// Insert a strided `1 x 1` projection on the skip path.
    #[default]
    Auto,
    /// Reject the spec.
    Forbid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub kind: BlockKind,
    pub channels_in: usize,
    pub channels_out: usize,
    pub stride: usize,
    /// Whether the block carries a skip connection (ignored by dense blocks).
    pub residual: bool,
    pub projection: ProjectionPolicy,
    /// Inverted residual only.
    pub expansion_factor: Option<f64>,
    /// Dense block only.
    pub growth_rate: Option<usize>,
    /// Dense block only.
    pub layer_count: Option<usize>,
    /// Inception-ResNet only, in `[0, 1]`.
    pub residual_scale: Option<f64>,
    /// Bottleneck width (pre-activation unit) or branch width (Inception-ResNet).
    pub hidden_width: Option<usize>,
}

impl BlockSpec {
    pub fn new(kind: BlockKind, channels_in: usize, channels_out: usize) -> Self {
        let mut spec = Self {
            kind,
            channels_in,
            channels_out,
            stride: 1,
            residual: true,
            projection: ProjectionPolicy::Auto,
            expansion_factor: None,
            growth_rate: None,
            layer_count: None,
            residual_scale: None,
            hidden_width: None,
        };
        match kind {
            BlockKind::MobilenetInvertedResidual => spec.expansion_factor = Some(4.0),
            BlockKind::DensenetDense => {
                spec.growth_rate = Some(4);
                spec.layer_count = Some(2);
                spec.residual = false;
            }
            BlockKind::InceptionResnetHybrid => spec.residual_scale = Some(0.2),
            BlockKind::XceptionSep | BlockKind::ResnetV2Preact => {}
        }
        spec
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_residual(mut self, residual: bool) -> Self {
        self.residual = residual;
        self
    }

    pub fn with_projection(mut self, projection: ProjectionPolicy) -> Self {
        self.projection = projection;
        self
    }

    pub fn with_expansion(mut self, t: f64) -> Self {
        self.expansion_factor = Some(t);
        self
    }

    pub fn with_growth(mut self, growth_rate: usize, layer_count: usize) -> Self {
        self.growth_rate = Some(growth_rate);
        self.layer_count = Some(layer_count);
        self
    }

    pub fn with_residual_scale(mut self, scale: f64) -> Self {
        self.residual_scale = Some(scale);
        self
    }

    pub fn with_hidden_width(mut self, width: usize) -> Self {
        self.hidden_width = Some(width);
        self
    }

    /// Channels the block emits.
    pub fn output_channels(&self) -> usize {
        match self.kind {
            BlockKind::DensenetDense => {
                self.channels_in + self.layer_count.unwrap_or(0) * self.growth_rate.unwrap_or(0)
            }
            BlockKind::InceptionResnetHybrid => self.channels_in,
            _ => self.channels_out,
        }
    }

    /// True when a residual add sees identical input and output shapes.
    pub fn skip_shapes_match(&self) -> bool {
        self.stride == 1 && self.channels_in == self.channels_out
    }

    pub(crate) fn hidden(&self, default: usize) -> usize {
        self.hidden_width.unwrap_or(default).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.channels_in == 0 || self.channels_out == 0 {
            return bad("channel counts must be positive".into());
        }
        if !matches!(self.stride, 1 | 2) {
            return bad(format!("stride must be 1 or 2, got {}", self.stride));
        }
        match self.kind {
            BlockKind::XceptionSep | BlockKind::ResnetV2Preact => {
                if self.residual && !self.skip_shapes_match() && self.projection == ProjectionPolicy::Forbid {
                    return bad(format!(
                        "residual shape mismatch without projection ({} -> {}, stride {})",
                        self.channels_in, self.channels_out, self.stride
                    ));
                }
            }
            BlockKind::MobilenetInvertedResidual => {
                match self.expansion_factor {
                    Some(t) if t > 0.0 && t.is_finite() => {}
                    other => return bad(format!("expansion_factor must be positive, got {other:?}")),
                }
                if self.residual && self.stride != 1 {
                    return bad("stride-2 inverted residual cannot carry a residual connection".into());
                }
                if self.residual && self.channels_in != self.channels_out {
                    return bad(format!(
                        "inverted residual skip needs matching channels ({} vs {})",
                        self.channels_in, self.channels_out
                    ));
                }
            }
            BlockKind::DensenetDense => {
                match self.layer_count {
                    Some(0) | None => return bad("dense block needs layer_count >= 1".into()),
                    Some(_) => {}
                }
                match self.growth_rate {
                    Some(0) | None => return bad("dense block needs growth_rate >= 1".into()),
                    Some(_) => {}
                }
                if self.stride != 1 {
                    return bad("dense block is stride 1; downsample with a transition layer".into());
                }
            }
            BlockKind::InceptionResnetHybrid => {
                match self.residual_scale {
                    Some(s) if (0.0..=1.0).contains(&s) => {}
                    other => return bad(format!("residual_scale must lie in [0, 1], got {other:?}")),
                }
                if self.stride != 1 || self.channels_in != self.channels_out {
                    return bad(
                        "inception-resnet module preserves shape (stride 1, channels_out == channels_in)".into(),
                    );
                }
            }
        }
        Ok(())
    }
}
