use serde::{Deserialize, Serialize};

use super::{build_model, pre_flatten_shape, sefe_delta, ArchitectureConfig, Backbone, DecoderError};
use crate::nn::LayerSpec;

/// Published totals for the default 64-channel, 1000-sample, 3-class setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableReference {
    pub without_sefe: usize,
    pub with_sefe: usize,
}

impl TableReference {
    pub fn for_backbone(b: Backbone) -> Self {
        let (without_sefe, with_sefe) = match b {
            Backbone::Deep => (108_485, 318_669),
            Backbone::Shallow => (103_520, 108_224),
            Backbone::EegNet => (3_400, 9_832),
        };
        Self {
            without_sefe,
            with_sefe,
        }
    }

    pub fn delta(&self) -> i64 {
        self.with_sefe as i64 - self.without_sefe as i64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerAudit {
    pub name: String,
    pub shape: Vec<usize>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterAudit {
    pub backbone: Backbone,
    pub layers_without: Vec<LayerAudit>,
    pub layers_with: Vec<LayerAudit>,
    pub total_without: usize,
    pub total_with: usize,
    pub delta: i64,
    /// SEFE increment from the closed form on the pre-flatten feature map.
    pub closed_form_delta: i64,
    /// `(C_f, T_f)` of the backbone's final feature map.
    pub feature_map: (usize, usize),
    pub reference: TableReference,
    /// `(computed − reference) / reference`; informational.
    pub deviation_without: f64,
    pub deviation_with: f64,
}

fn ledger(stack: &[LayerSpec]) -> Vec<LayerAudit> {
    stack
        .iter()
        .filter(|l| l.param_count() > 0)
        .map(|l| LayerAudit {
            name: l.name.clone(),
            shape: l.weight_shape(),
            count: l.param_count(),
        })
        .collect()
}

/// Parameter counts of `cfg.backbone` with and without SEFE.
pub fn audit_parameters(cfg: &ArchitectureConfig) -> Result<ParameterAudit, DecoderError> {
    let without = build_model(&ArchitectureConfig {
        with_sefe: false,
        ..cfg.clone()
    })?;
    let with = build_model(&ArchitectureConfig {
        with_sefe: true,
        ..cfg.clone()
    })?;
    let [c_f, _, t_f] = pre_flatten_shape(&without, cfg.input_shape())?;
    let layers_without = ledger(&without);
    let layers_with = ledger(&with);
    let total_without: usize = layers_without.iter().map(|l| l.count).sum();
    let total_with: usize = layers_with.iter().map(|l| l.count).sum();
    let reference = TableReference::for_backbone(cfg.backbone);
    let dev = |c: usize, r: usize| (c as f64 - r as f64) / r as f64;
    Ok(ParameterAudit {
        backbone: cfg.backbone,
        total_without,
        total_with,
        delta: total_with as i64 - total_without as i64,
        closed_form_delta: sefe_delta(c_f, t_f, cfg.n_classes, &cfg.sefe),
        feature_map: (c_f, t_f),
        reference,
        deviation_without: dev(total_without, reference.without_sefe),
        deviation_with: dev(total_with, reference.with_sefe),
        layers_without,
        layers_with,
    })
}

impl ParameterAudit {
    /// Plain-text table: one line per layer, then totals beside the references.
    pub fn render(&self) -> String {
        let mut out = format!("{} (C_f = {}, T_f = {})\n", self.backbone, self.feature_map.0, self.feature_map.1);
        for (tag, layers) in [("without SEFE", &self.layers_without), ("with SEFE", &self.layers_with)] {
            out.push_str(&format!("  {tag}\n"));
            for l in layers {
                let shape: Vec<String> = l.shape.iter().map(usize::to_string).collect();
                out.push_str(&format!("    {:<16} {:<16} {:>9}\n", l.name, shape.join("x"), l.count));
            }
        }
        out.push_str(&format!(
            "  total without SEFE {:>9}  reference {:>9}  deviation {:+.3}\n",
            self.total_without, self.reference.without_sefe, self.deviation_without
        ));
        out.push_str(&format!(
            "  total with SEFE    {:>9}  reference {:>9}  deviation {:+.3}\n",
            self.total_with, self.reference.with_sefe, self.deviation_with
        ));
        out.push_str(&format!(
            "  delta {} (closed form {}, reference {})\n",
            self.delta,
            self.closed_form_delta,
            self.reference.delta()
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_matches_closed_form_for_all_backbones() {
        for b in Backbone::ALL {
            let a = audit_parameters(&ArchitectureConfig {
                backbone: b,
                ..Default::default()
            })
            .unwrap();
            assert_eq!(a.delta, a.closed_form_delta, "{b}");
            assert!(a.render().contains(&a.reference.with_sefe.to_string()));
        }
    }

    #[test]
    fn references_verbatim() {
        assert_eq!(TableReference::for_backbone(Backbone::Deep).without_sefe, 108_485);
        assert_eq!(TableReference::for_backbone(Backbone::Shallow).delta(), 4_704);
        assert_eq!(TableReference::for_backbone(Backbone::EegNet).with_sefe, 9_832);
    }
}
