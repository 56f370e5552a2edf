use serde::{Deserialize, Serialize};

use super::NnError;

/// Per-sample shape `(channels, electrodes, time)`.
pub type FeatureShape = [usize; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Valid,
    /// Output keeps the input extent; the odd sample of padding goes last.
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `(electrodes, time)`
    pub kernel: (usize, usize),
    pub groups: usize,
    pub bias: bool,
    pub padding: Padding,
}

impl ConvSpec {
    pub(crate) fn pads(&self) -> (usize, usize, usize, usize) {
        match self.padding {
            Padding::Valid => (0, 0, 0, 0),
            Padding::Same => {
                let (th, tw) = (self.kernel.0 - 1, self.kernel.1 - 1);
                (th / 2, th - th / 2, tw / 2, tw - tw / 2)
            }
        }
    }

    fn fan_in(&self) -> usize {
        self.in_channels / self.groups * self.kernel.0 * self.kernel.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Elu,
    Relu,
    Square,
    SafeLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv2d(ConvSpec),
    BatchNorm { channels: usize },
    Activation(Activation),
    MaxPool(PoolSpec),
    AvgPool(PoolSpec),
    Dropout { rate: f64 },
    Flatten,
    Dense {
        in_features: usize,
        out_features: usize,
        bias: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }

    /// Ungrouped convolution.
    pub fn conv(
        name: impl Into<String>,
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        bias: bool,
    ) -> Self {
        Self::new(
            name,
            LayerKind::Conv2d(ConvSpec {
                in_channels,
                out_channels,
                kernel,
                groups: 1,
                bias,
                padding: Padding::Valid,
            }),
        )
    }

    pub fn batch_norm(name: impl Into<String>, channels: usize) -> Self {
        Self::new(name, LayerKind::BatchNorm { channels })
    }

    pub fn activation(name: impl Into<String>, a: Activation) -> Self {
        Self::new(name, LayerKind::Activation(a))
    }

    pub fn max_pool(name: impl Into<String>, kernel: (usize, usize), stride: (usize, usize)) -> Self {
        Self::new(name, LayerKind::MaxPool(PoolSpec { kernel, stride }))
    }

    pub fn avg_pool(name: impl Into<String>, kernel: (usize, usize), stride: (usize, usize)) -> Self {
        Self::new(name, LayerKind::AvgPool(PoolSpec { kernel, stride }))
    }

    pub fn dropout(name: impl Into<String>, rate: f64) -> Self {
        Self::new(name, LayerKind::Dropout { rate })
    }

    pub fn flatten(name: impl Into<String>) -> Self {
        Self::new(name, LayerKind::Flatten)
    }

    pub fn dense(name: impl Into<String>, in_features: usize, out_features: usize, bias: bool) -> Self {
        Self::new(
            name,
            LayerKind::Dense {
                in_features,
                out_features,
                bias,
            },
        )
    }

    /// Hyperparameter sanity, independent of the input shape.
    pub fn validate(&self) -> Result<(), String> {
        match &self.kind {
            LayerKind::Conv2d(c) => {
                if c.kernel.0 == 0 || c.kernel.1 == 0 {
                    return Err("kernel dimensions must be positive".into());
                }
                if c.in_channels == 0 || c.out_channels == 0 || c.groups == 0 {
                    return Err("channel counts and groups must be positive".into());
                }
                if c.in_channels % c.groups != 0 || c.out_channels % c.groups != 0 {
                    return Err(format!(
                        "groups {} must divide in {} and out {}",
                        c.groups, c.in_channels, c.out_channels
                    ));
                }
                Ok(())
            }
            LayerKind::BatchNorm { channels } if *channels == 0 => Err("zero channels".into()),
            LayerKind::MaxPool(p) | LayerKind::AvgPool(p) => {
                if p.kernel.0 == 0 || p.kernel.1 == 0 || p.stride.0 == 0 || p.stride.1 == 0 {
                    Err("pool kernel and stride must be positive".into())
                } else {
                    Ok(())
                }
            }
            LayerKind::Dropout { rate } if !(0.0..1.0).contains(rate) => {
                Err(format!("dropout rate {rate} outside [0, 1)"))
            }
            LayerKind::Dense {
                in_features,
                out_features,
                ..
            } if *in_features == 0 || *out_features == 0 => Err("zero features".into()),
            _ => Ok(()),
        }
    }

    /// Expected input description for error messages.
    fn expected_input(&self) -> String {
        match &self.kind {
            LayerKind::Conv2d(c) => format!(
                "{} channels with extent >= {}x{}",
                c.in_channels, c.kernel.0, c.kernel.1
            ),
            LayerKind::BatchNorm { channels } => format!("{channels} channels"),
            LayerKind::MaxPool(p) | LayerKind::AvgPool(p) => {
                format!("extent >= {}x{}", p.kernel.0, p.kernel.1)
            }
            LayerKind::Dense { in_features, .. } => format!("{in_features} features"),
            _ => "any shape".into(),
        }
    }

    /// Output shape for one sample of shape `input`, or `None` when the
    /// input does not fit.
    fn try_output_shape(&self, [c, h, w]: FeatureShape) -> Option<FeatureShape> {
        match &self.kind {
            LayerKind::Conv2d(spec) => {
                if c != spec.in_channels {
                    return None;
                }
                let (pt, pb, pl, pr) = spec.pads();
                let (hp, wp) = (h + pt + pb, w + pl + pr);
                if hp < spec.kernel.0 || wp < spec.kernel.1 {
                    return None;
                }
                Some([spec.out_channels, hp - spec.kernel.0 + 1, wp - spec.kernel.1 + 1])
            }
            LayerKind::BatchNorm { channels } => (c == *channels).then_some([c, h, w]),
            LayerKind::Activation(_) | LayerKind::Dropout { .. } => Some([c, h, w]),
            LayerKind::MaxPool(p) | LayerKind::AvgPool(p) => {
                if h < p.kernel.0 || w < p.kernel.1 {
                    return None;
                }
                Some([
                    c,
                    (h - p.kernel.0) / p.stride.0 + 1,
                    (w - p.kernel.1) / p.stride.1 + 1,
                ])
            }
            LayerKind::Flatten => Some([c * h * w, 1, 1]),
            LayerKind::Dense {
                in_features,
                out_features,
                ..
            } => (c * h * w == *in_features).then_some([*out_features, 1, 1]),
        }
    }

    pub fn output_shape(&self, index: usize, input: FeatureShape) -> Result<FeatureShape, NnError> {
        self.validate().map_err(|reason| NnError::InvalidLayer {
            index,
            name: self.name.clone(),
            reason,
        })?;
        self.try_output_shape(input)
            .ok_or_else(|| NnError::ShapeMismatch {
                index,
                name: self.name.clone(),
                expected: self.expected_input(),
                actual: format!("{input:?}"),
            })
    }

    /// `(weight_len, bias_len)` of the trainable arrays.
    pub fn param_lens(&self) -> (usize, usize) {
        match &self.kind {
            LayerKind::Conv2d(c) => (
                c.out_channels * c.fan_in(),
                if c.bias { c.out_channels } else { 0 },
            ),
            LayerKind::BatchNorm { channels } => (*channels, *channels),
            LayerKind::Dense {
                in_features,
                out_features,
                bias,
            } => (
                in_features * out_features,
                if *bias { *out_features } else { 0 },
            ),
            _ => (0, 0),
        }
    }

    /// Human-readable weight shape, e.g. `25x1x1x10`.
    pub fn weight_shape(&self) -> Vec<usize> {
        match &self.kind {
            LayerKind::Conv2d(c) => vec![
                c.out_channels,
                c.in_channels / c.groups,
                c.kernel.0,
                c.kernel.1,
            ],
            LayerKind::BatchNorm { channels } => vec![2, *channels],
            LayerKind::Dense {
                in_features,
                out_features,
                ..
            } => vec![*out_features, *in_features],
            _ => vec![],
        }
    }

    pub(crate) fn fan_in(&self) -> usize {
        match &self.kind {
            LayerKind::Conv2d(c) => c.fan_in(),
            LayerKind::Dense { in_features, .. } => *in_features,
            _ => 0,
        }
    }

    pub fn param_count(&self) -> usize {
        let (w, b) = self.param_lens();
        w + b
    }
}

/// Shapes before the first layer and after every layer (`stack.len() + 1` entries).
pub fn infer_shapes(stack: &[LayerSpec], input: FeatureShape) -> Result<Vec<FeatureShape>, NnError> {
    let mut shapes = Vec::with_capacity(stack.len() + 1);
    shapes.push(input);
    let mut cur = input;
    for (i, layer) in stack.iter().enumerate() {
        cur = layer.output_shape(i, cur)?;
        shapes.push(cur);
    }
    Ok(shapes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub per_layer: Vec<(String, usize)>,
    pub total: usize,
}

/// Trainable parameters per layer; batch-norm running statistics excluded.
pub fn count_params(stack: &[LayerSpec]) -> ParamCount {
    let per_layer: Vec<(String, usize)> = stack
        .iter()
        .map(|l| (l.name.clone(), l.param_count()))
        .collect();
    let total = per_layer.iter().map(|(_, n)| n).sum();
    ParamCount { per_layer, total }
}
