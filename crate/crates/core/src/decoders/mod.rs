//! Layer stacks for the three backbones and the SEFE attachment.
//!
//! Builders return the backbone alone; [`build_model`] appends SEFE when
//! `with_sefe` is set. Convolutions followed by batch norm carry no bias.

mod audit;

pub use audit::{audit_parameters, LayerAudit, ParameterAudit, TableReference};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{
    infer_shapes, Activation, ConvSpec, FeatureShape, LayerKind, LayerSpec, NnError, Padding,
};

#[derive(Debug, Error, PartialEq)]
pub enum DecoderError {
    #[error("invalid architecture: {0}")]
    InvalidConfig(String),
    #[error("{backbone} needs at least {minimum} samples per epoch, got {n_samples}")]
    TooShort {
        backbone: Backbone,
        n_samples: usize,
        minimum: usize,
    },
    #[error("cannot attach SEFE: {0}")]
    NoClassifierTail(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    Deep,
    Shallow,
    EegNet,
}

impl Backbone {
    pub const ALL: [Backbone; 3] = [Backbone::Deep, Backbone::Shallow, Backbone::EegNet];

    pub fn as_str(self) -> &'static str {
        match self {
            Backbone::Deep => "deep",
            Backbone::Shallow => "shallow",
            Backbone::EegNet => "eegnet",
        }
    }
}

impl fmt::Display for Backbone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Backbone {
    type Err = DecoderError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "deep" => Ok(Backbone::Deep),
            "shallow" => Ok(Backbone::Shallow),
            "eegnet" => Ok(Backbone::EegNet),
            other => Err(DecoderError::InvalidConfig(format!(
                "unknown backbone '{other}' (expected deep, shallow or eegnet)"
            ))),
        }
    }
}

/// A backbone with or without SEFE, written `deep-sefe`, `eegnet-nosefe`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelVariant {
    pub backbone: Backbone,
    pub with_sefe: bool,
}

impl ModelVariant {
    pub fn all() -> Vec<ModelVariant> {
        Backbone::ALL
            .iter()
            .flat_map(|&backbone| {
                [false, true].map(|with_sefe| ModelVariant {
                    backbone,
                    with_sefe,
                })
            })
            .collect()
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.with_sefe { "sefe" } else { "nosefe" };
        write!(f, "{}-{tag}", self.backbone)
    }
}

impl FromStr for ModelVariant {
    type Err = DecoderError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (b, tag) = s.trim().rsplit_once(['-', '_']).ok_or_else(|| {
            DecoderError::InvalidConfig(format!(
                "model '{s}' must look like <backbone>-sefe or <backbone>-nosefe"
            ))
        })?;
        let with_sefe = match tag.to_ascii_lowercase().as_str() {
            "sefe" => true,
            "nosefe" => false,
            _ => {
                return Err(DecoderError::InvalidConfig(format!(
                    "model '{s}': suffix must be sefe or nosefe"
                )))
            }
        };
        Ok(ModelVariant {
            backbone: b.parse()?,
            with_sefe,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeepConfig {
    /// Filters of the four blocks; the spatial conv of block 1 reuses the first.
    pub n_filters: [usize; 4],
    pub kernel_len: usize,
    pub pool_len: usize,
    pub pool_stride: usize,
    pub dropout: f64,
}

impl Default for DeepConfig {
    fn default() -> Self {
        Self {
            n_filters: [25, 50, 100, 200],
            kernel_len: 10,
            pool_len: 3,
            pool_stride: 3,
            dropout: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShallowConfig {
    pub n_filters: usize,
    pub kernel_len: usize,
    pub pool_len: usize,
    pub pool_stride: usize,
    pub dropout: f64,
}

impl Default for ShallowConfig {
    fn default() -> Self {
        Self {
            n_filters: 40,
            kernel_len: 25,
            pool_len: 75,
            pool_stride: 15,
            dropout: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EegNetConfig {
    pub f1: usize,
    /// Depth multiplier of the spatial depthwise conv.
    pub d: usize,
    pub f2: usize,
    pub kernel_len: usize,
    pub separable_kernel_len: usize,
    pub pool1: usize,
    pub pool2: usize,
    pub dropout: f64,
}

impl Default for EegNetConfig {
    fn default() -> Self {
        Self {
            f1: 8,
            d: 2,
            f2: 16,
            kernel_len: 125,
            separable_kernel_len: 16,
            pool1: 4,
            pool2: 8,
            dropout: 0.25,
        }
    }
}

/// Pointwise block between the feature extractor and the classifier.
/// Kernels are always 1×1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SefeConfig {
    pub hidden_channels: usize,
    pub output_channels: usize,
}

impl Default for SefeConfig {
    fn default() -> Self {
        Self {
            hidden_channels: 64,
            output_channels: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchitectureConfig {
    pub backbone: Backbone,
    pub n_channels: usize,
    pub n_samples: usize,
    pub n_classes: usize,
    pub with_sefe: bool,
    pub deep: DeepConfig,
    pub shallow: ShallowConfig,
    pub eegnet: EegNetConfig,
    pub sefe: SefeConfig,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self {
            backbone: Backbone::Deep,
            n_channels: 64,
            n_samples: 1000,
            n_classes: 3,
            with_sefe: false,
            deep: DeepConfig::default(),
            shallow: ShallowConfig::default(),
            eegnet: EegNetConfig::default(),
            sefe: SefeConfig::default(),
        }
    }
}

impl ArchitectureConfig {
    pub fn for_variant(&self, v: ModelVariant) -> Self {
        Self {
            backbone: v.backbone,
            with_sefe: v.with_sefe,
            ..self.clone()
        }
    }

    pub fn variant(&self) -> ModelVariant {
        ModelVariant {
            backbone: self.backbone,
            with_sefe: self.with_sefe,
        }
    }

    pub fn input_shape(&self) -> FeatureShape {
        [1, self.n_channels, self.n_samples]
    }

    pub fn validate(&self) -> Result<(), DecoderError> {
        let bad = |m: &str| Err(DecoderError::InvalidConfig(m.to_string()));
        if self.n_channels == 0 || self.n_samples == 0 {
            return bad("n_channels and n_samples must be positive");
        }
        if self.n_classes < 2 {
            return bad("n_classes must be at least 2");
        }
        let rate_ok = |r: f64| (0.0..1.0).contains(&r);
        let d = &self.deep;
        if d.n_filters.contains(&0) || d.kernel_len == 0 || d.pool_len == 0 || d.pool_stride == 0 {
            return bad("deep filter counts, kernel and pool sizes must be positive");
        }
        let s = &self.shallow;
        if s.n_filters == 0 || s.kernel_len == 0 || s.pool_len == 0 || s.pool_stride == 0 {
            return bad("shallow filter count, kernel and pool sizes must be positive");
        }
        let e = &self.eegnet;
        if [e.f1, e.d, e.f2, e.kernel_len, e.separable_kernel_len, e.pool1, e.pool2].contains(&0) {
            return bad("eegnet sizes must be positive");
        }
        if !(rate_ok(d.dropout) && rate_ok(s.dropout) && rate_ok(e.dropout)) {
            return bad("dropout rates must lie in [0, 1)");
        }
        if self.sefe.hidden_channels == 0 || self.sefe.output_channels == 0 {
            return bad("SEFE channel counts must be positive");
        }
        Ok(())
    }
}

fn expect_backbone(cfg: &ArchitectureConfig, b: Backbone) -> Result<(), DecoderError> {
    cfg.validate()?;
    if cfg.backbone != b {
        return Err(DecoderError::InvalidConfig(format!(
            "config is for {}, builder is for {b}",
            cfg.backbone
        )));
    }
    Ok(())
}

/// Shape-checks `stack` for `cfg`; when the epoch is too short, scans for
/// the shortest length that passes.
fn check_length(cfg: &ArchitectureConfig, stack: &[LayerSpec]) -> Result<(), DecoderError> {
    if infer_shapes(stack, cfg.input_shape()).is_ok() {
        return Ok(());
    }
    let rebuild = |n_samples| {
        let c = ArchitectureConfig {
            n_samples,
            ..cfg.clone()
        };
        let s = backbone_layers(&c);
        infer_shapes(&s, c.input_shape()).is_ok()
    };
    // The first layer that fails decides; a too-short input is the only
    // failure a valid config can produce.
    let minimum = (cfg.n_samples + 1..=1 << 20).find(|&n| rebuild(n));
    match minimum {
        Some(minimum) => Err(DecoderError::TooShort {
            backbone: cfg.backbone,
            n_samples: cfg.n_samples,
            minimum,
        }),
        None => Err(infer_shapes(stack, cfg.input_shape())
            .map(|_| ())
            .unwrap_err()
            .into()),
    }
}

fn backbone_layers(cfg: &ArchitectureConfig) -> Vec<LayerSpec> {
    match cfg.backbone {
        Backbone::Deep => deep_layers(cfg),
        Backbone::Shallow => shallow_layers(cfg),
        Backbone::EegNet => eegnet_layers(cfg),
    }
}

/// Dense input size given the stack up to (and including) flatten.
fn with_dense(cfg: &ArchitectureConfig, mut stack: Vec<LayerSpec>) -> Vec<LayerSpec> {
    let in_features = infer_shapes(&stack, cfg.input_shape())
        .map(|s| s.last().map_or(1, |f| f[0]))
        .unwrap_or(1);
    stack.push(LayerSpec::dense("classifier", in_features, cfg.n_classes, true));
    stack
}

fn deep_layers(cfg: &ArchitectureConfig) -> Vec<LayerSpec> {
    let d = &cfg.deep;
    let pool = (1, d.pool_len);
    let stride = (1, d.pool_stride);
    let f = d.n_filters;
    let mut s = vec![
        LayerSpec::conv("conv_time", 1, f[0], (1, d.kernel_len), true),
        LayerSpec::conv("conv_spat", f[0], f[0], (cfg.n_channels, 1), false),
        LayerSpec::batch_norm("bn_1", f[0]),
        LayerSpec::activation("elu_1", Activation::Elu),
        LayerSpec::max_pool("pool_1", pool, stride),
        LayerSpec::dropout("drop_1", d.dropout),
    ];
    for b in 1..4 {
        let n = b + 1;
        s.extend([
            LayerSpec::conv(format!("conv_{n}"), f[b - 1], f[b], (1, d.kernel_len), false),
            LayerSpec::batch_norm(format!("bn_{n}"), f[b]),
            LayerSpec::activation(format!("elu_{n}"), Activation::Elu),
            LayerSpec::max_pool(format!("pool_{n}"), pool, stride),
            LayerSpec::dropout(format!("drop_{n}"), d.dropout),
        ]);
    }
    s.push(LayerSpec::flatten("flatten"));
    with_dense(cfg, s)
}

fn shallow_layers(cfg: &ArchitectureConfig) -> Vec<LayerSpec> {
    let sh = &cfg.shallow;
    let f = sh.n_filters;
    let s = vec![
        LayerSpec::conv("conv_time", 1, f, (1, sh.kernel_len), true),
        LayerSpec::conv("conv_spat", f, f, (cfg.n_channels, 1), false),
        LayerSpec::batch_norm("bn", f),
        LayerSpec::activation("square", Activation::Square),
        LayerSpec::avg_pool("pool", (1, sh.pool_len), (1, sh.pool_stride)),
        LayerSpec::activation("safelog", Activation::SafeLog),
        LayerSpec::dropout("drop", sh.dropout),
        LayerSpec::flatten("flatten"),
    ];
    with_dense(cfg, s)
}

fn eegnet_layers(cfg: &ArchitectureConfig) -> Vec<LayerSpec> {
    let e = &cfg.eegnet;
    let f1d = e.f1 * e.d;
    let conv = |name: &str, cin, cout, kernel, groups, padding| {
        LayerSpec::new(
            name,
            LayerKind::Conv2d(ConvSpec {
                in_channels: cin,
                out_channels: cout,
                kernel,
                groups,
                bias: false,
                padding,
            }),
        )
    };
    let s = vec![
        conv("conv_time", 1, e.f1, (1, e.kernel_len), 1, Padding::Same),
        LayerSpec::batch_norm("bn_1", e.f1),
        conv("conv_depth", e.f1, f1d, (cfg.n_channels, 1), e.f1, Padding::Valid),
        LayerSpec::batch_norm("bn_2", f1d),
        LayerSpec::activation("elu_1", Activation::Elu),
        LayerSpec::avg_pool("pool_1", (1, e.pool1), (1, e.pool1)),
        LayerSpec::dropout("drop_1", e.dropout),
        conv("conv_sep_depth", f1d, f1d, (1, e.separable_kernel_len), f1d, Padding::Same),
        conv("conv_sep_point", f1d, e.f2, (1, 1), 1, Padding::Valid),
        LayerSpec::batch_norm("bn_3", e.f2),
        LayerSpec::activation("elu_2", Activation::Elu),
        LayerSpec::avg_pool("pool_2", (1, e.pool2), (1, e.pool2)),
        LayerSpec::dropout("drop_2", e.dropout),
        LayerSpec::flatten("flatten"),
    ];
    with_dense(cfg, s)
}

fn build_checked(cfg: &ArchitectureConfig, b: Backbone) -> Result<Vec<LayerSpec>, DecoderError> {
    expect_backbone(cfg, b)?;
    let s = backbone_layers(cfg);
    check_length(cfg, &s)?;
    Ok(s)
}

pub fn build_deepconvnet(cfg: &ArchitectureConfig) -> Result<Vec<LayerSpec>, DecoderError> {
    build_checked(cfg, Backbone::Deep)
}

pub fn build_shallowconvnet(cfg: &ArchitectureConfig) -> Result<Vec<LayerSpec>, DecoderError> {
    build_checked(cfg, Backbone::Shallow)
}

pub fn build_eegnet(cfg: &ArchitectureConfig) -> Result<Vec<LayerSpec>, DecoderError> {
    build_checked(cfg, Backbone::EegNet)
}

/// Backbone for `cfg.backbone`, with SEFE attached when `cfg.with_sefe`.
pub fn build_model(cfg: &ArchitectureConfig) -> Result<Vec<LayerSpec>, DecoderError> {
    let s = build_checked(cfg, cfg.backbone)?;
    if cfg.with_sefe {
        attach_sefe(&s, cfg.input_shape(), &cfg.sefe)
    } else {
        Ok(s)
    }
}

/// Shape of the feature map entering the flatten layer.
pub fn pre_flatten_shape(stack: &[LayerSpec], input: FeatureShape) -> Result<FeatureShape, DecoderError> {
    let flat = classifier_tail(stack)?;
    Ok(infer_shapes(&stack[..flat], input)?[flat])
}

/// Index of the flatten layer of a trailing flatten + dense pair.
fn classifier_tail(stack: &[LayerSpec]) -> Result<usize, DecoderError> {
    let n = stack.len();
    if n < 2
        || !matches!(stack[n - 2].kind, LayerKind::Flatten)
        || !matches!(stack[n - 1].kind, LayerKind::Dense { .. })
    {
        return Err(DecoderError::NoClassifierTail(
            "stack does not end with flatten followed by dense".into(),
        ));
    }
    Ok(n - 2)
}

/// Inserts conv 1×1 (C_f → hidden, bias), ReLU, conv 1×1 (hidden → output, bias)
/// before the flatten layer and resizes the dense input. Upstream layers are
/// untouched.
pub fn attach_sefe(
    stack: &[LayerSpec],
    input: FeatureShape,
    sefe: &SefeConfig,
) -> Result<Vec<LayerSpec>, DecoderError> {
    let flat = classifier_tail(stack)?;
    let [c_f, h, t_f] = pre_flatten_shape(stack, input)?;
    let (out_features, bias) = match stack[flat + 1].kind {
        LayerKind::Dense {
            out_features, bias, ..
        } => (out_features, bias),
        _ => unreachable!("checked by classifier_tail"),
    };
    let mut s = stack[..flat].to_vec();
    s.extend([
        LayerSpec::conv("sefe_conv_1", c_f, sefe.hidden_channels, (1, 1), true),
        LayerSpec::activation("sefe_relu", Activation::Relu),
        LayerSpec::conv("sefe_conv_2", sefe.hidden_channels, sefe.output_channels, (1, 1), true),
        stack[flat].clone(),
        LayerSpec::new(
            stack[flat + 1].name.clone(),
            LayerKind::Dense {
                in_features: sefe.output_channels * h * t_f,
                out_features,
                bias,
            },
        ),
    ]);
    infer_shapes(&s, input)?;
    Ok(s)
}

/// Closed-form parameter increment of SEFE for a `c_f × 1 × t_f` feature map.
pub fn sefe_delta(c_f: usize, t_f: usize, n_classes: usize, sefe: &SefeConfig) -> i64 {
    let (hid, out) = (sefe.hidden_channels as i64, sefe.output_channels as i64);
    let (c_f, t_f, k) = (c_f as i64, t_f as i64, n_classes as i64);
    (c_f * hid + hid) + (hid * out + out) + (out - c_f) * t_f * k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{count_params, forward, init_params, Mode, Tensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(b: Backbone) -> ArchitectureConfig {
        ArchitectureConfig {
            backbone: b,
            ..Default::default()
        }
    }

    #[test]
    fn deep_default_shapes_and_ledger() {
        let c = cfg(Backbone::Deep);
        let s = build_deepconvnet(&c).unwrap();
        assert_eq!(pre_flatten_shape(&s, c.input_shape()).unwrap(), [200, 1, 7]);
        // 1000 -> conv 991 -> pool 330 -> 321 -> 107 -> 98 -> 32 -> 23 -> 7
        let ledger = (25 * 10 + 25)
            + 25 * 25 * 64
            + 2 * 25
            + (50 * 25 * 10 + 2 * 50)
            + (100 * 50 * 10 + 2 * 100)
            + (200 * 100 * 10 + 2 * 200)
            + (200 * 7 * 3 + 3);
        assert_eq!(count_params(&s).total, ledger);
        let shapes = infer_shapes(&s, c.input_shape()).unwrap();
        assert_eq!(*shapes.last().unwrap(), [3, 1, 1]);
    }

    #[test]
    fn shallow_default_shapes_and_ledger() {
        let c = cfg(Backbone::Shallow);
        let s = build_shallowconvnet(&c).unwrap();
        let convs = s
            .iter()
            .take_while(|l| !matches!(l.kind, LayerKind::AvgPool(_)))
            .filter(|l| matches!(l.kind, LayerKind::Conv2d(_)))
            .count();
        assert_eq!(convs, 2);
        // (1000 - 24 - 75) / 15 + 1 = 61
        assert_eq!(pre_flatten_shape(&s, c.input_shape()).unwrap(), [40, 1, 61]);
        let ledger = (40 * 25 + 40) + 40 * 40 * 64 + 80 + (40 * 61 * 3 + 3);
        assert_eq!(count_params(&s).total, ledger);
    }

    #[test]
    fn eegnet_default_shapes_and_ledger() {
        let c = cfg(Backbone::EegNet);
        let s = build_eegnet(&c).unwrap();
        assert_eq!(pre_flatten_shape(&s, c.input_shape()).unwrap(), [16, 1, 31]);
        let depth = s.iter().find(|l| l.name == "conv_depth").unwrap();
        assert_eq!(depth.param_count(), 2 * 8 * 64);
        let ledger = 8 * 125 + 16 + 1024 + 32 + 16 * 16 + 16 * 16 + 32 + (16 * 31 * 3 + 3);
        assert_eq!(count_params(&s).total, ledger);
        let with = build_model(&ArchitectureConfig {
            with_sefe: true,
            ..c
        })
        .unwrap();
        assert!(count_params(&with).total < 10_000);
    }

    #[test]
    fn too_short_reports_minimum() {
        for b in Backbone::ALL {
            let c = ArchitectureConfig {
                n_samples: 20,
                ..cfg(b)
            };
            let err = build_model(&c).unwrap_err();
            let DecoderError::TooShort { minimum, .. } = err else {
                panic!("{err}");
            };
            let ok = ArchitectureConfig {
                n_samples: minimum,
                ..c.clone()
            };
            assert!(build_model(&ok).is_ok());
            let short = ArchitectureConfig {
                n_samples: minimum - 1,
                ..c
            };
            assert!(build_model(&short).is_err());
        }
    }

    #[test]
    fn wrong_backbone_and_bad_config() {
        assert!(build_eegnet(&cfg(Backbone::Deep)).is_err());
        let c = ArchitectureConfig {
            n_classes: 1,
            ..cfg(Backbone::Deep)
        };
        assert!(matches!(build_model(&c), Err(DecoderError::InvalidConfig(_))));
    }

    #[test]
    fn sefe_increment_and_layout() {
        let c = cfg(Backbone::EegNet);
        let base = build_eegnet(&c).unwrap();
        let with = attach_sefe(&base, c.input_shape(), &SefeConfig::default()).unwrap();
        let added: usize = with
            .iter()
            .filter(|l| l.name.starts_with("sefe_"))
            .map(LayerSpec::param_count)
            .sum();
        assert_eq!(added, 3168);
        assert_eq!(with.last().unwrap().param_count(), 32 * 31 * 3 + 3);
        assert_eq!(&with[..base.len() - 2], &base[..base.len() - 2]);
        let shapes = infer_shapes(&with, c.input_shape()).unwrap();
        let n = base.len() - 2;
        assert_eq!(shapes[n], [16, 1, 31]);
        assert_eq!(shapes[n + 1], [64, 1, 31]);
        assert_eq!(shapes[n + 3], [32, 1, 31]);
        assert!(attach_sefe(&base[..n], c.input_shape(), &SefeConfig::default()).is_err());
    }

    #[test]
    fn sefe_adds_capacity_and_matches_closed_form() {
        for b in Backbone::ALL {
            let c = cfg(b);
            let without = build_model(&c).unwrap();
            let with = build_model(&ArchitectureConfig {
                with_sefe: true,
                ..c.clone()
            })
            .unwrap();
            let (a, w) = (count_params(&without).total, count_params(&with).total);
            assert!(w > a, "{b}");
            let [c_f, _, t_f] = pre_flatten_shape(&without, c.input_shape()).unwrap();
            assert_eq!(w as i64 - a as i64, sefe_delta(c_f, t_f, 3, &c.sefe));
        }
    }

    #[test]
    fn sefe_is_pointwise_in_time() {
        let sefe = SefeConfig::default();
        let (c_f, t_f) = (6, 9);
        let stack = vec![
            LayerSpec::flatten("flatten"),
            LayerSpec::dense("classifier", c_f * t_f, 3, true),
        ];
        let with = attach_sefe(&stack, [c_f, 1, t_f], &sefe).unwrap();
        let block = &with[..3];
        let params = init_params(block, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..2 * c_f * t_f).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Tensor::from_vec([2, c_f, 1, t_f], x).unwrap();
        let mut perm: Vec<usize> = (0..t_f).collect();
        perm.reverse();
        perm.swap(0, 4);
        let mut xp = x.clone();
        #[allow(clippy::needless_range_loop)]
        for b in 0..2 {
            for c in 0..c_f {
                for t in 0..t_f {
                    xp.set([b, c, 0, t], x.get([b, c, 0, perm[t]]));
                }
            }
        }
        let (y, _) = forward(block, &params, &x, Mode::Eval, 0).unwrap();
        let (yp, _) = forward(block, &params, &xp, Mode::Eval, 0).unwrap();
        #[allow(clippy::needless_range_loop)]
        for b in 0..2 {
            for c in 0..32 {
                for t in 0..t_f {
                    assert_eq!(yp.get([b, c, 0, t]), y.get([b, c, 0, perm[t]]));
                }
            }
        }
    }

    #[test]
    fn identical_seed_identical_init() {
        let c = cfg(Backbone::Shallow);
        let s = build_model(&c).unwrap();
        assert_eq!(init_params(&s, 3), init_params(&s, 3));
    }

    #[test]
    fn variant_names_round_trip() {
        let all = ModelVariant::all();
        assert_eq!(all.len(), 6);
        for v in all {
            assert_eq!(v.to_string().parse::<ModelVariant>().unwrap(), v);
        }
        assert!("deep".parse::<ModelVariant>().is_err());
        assert!("lstm-sefe".parse::<ModelVariant>().is_err());
    }

    #[test]
    fn default_models_map_to_logits() {
        for v in ModelVariant::all() {
            let c = ArchitectureConfig {
                n_channels: 4,
                ..cfg(v.backbone)
            }
            .for_variant(v);
            let s = build_model(&c).unwrap();
            let p = init_params(&s, 0);
            let x = Tensor::from_vec([2, 1, 4, 1000], vec![0.1; 8000]).unwrap();
            let (y, _) = forward(&s, &p, &x, Mode::Eval, 0).unwrap();
            assert_eq!(y.shape(), [2, 3, 1, 1], "{v}");
        }
    }
}
