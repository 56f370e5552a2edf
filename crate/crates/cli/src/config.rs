//! Run configuration: one TOML file with a section per pipeline stage.

use std::path::Path;

use serde::{Deserialize, Serialize};

use sefe_core::dataset::SynthConfig;
use sefe_core::decoders::{ArchitectureConfig, ModelVariant};
use sefe_core::signal::PreprocessConfig;
use sefe_core::train::TrainConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LosoSection {
    /// Shuffle-order repetitions per held-out subject.
    pub repetitions: usize,
    /// `all` or `<backbone>-<sefe|nosefe>` names.
    pub models: Vec<String>,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
}

impl Default for LosoSection {
    fn default() -> Self {
        Self {
            repetitions: 4,
            models: vec!["all".into()],
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldSection {
    /// Held-out subject of `train`; the first subject when unset.
    pub test_subject: Option<String>,
    /// 1-based; selects the same seeds as that LOSO repetition.
    pub repetition: usize,
}

impl Default for FoldSection {
    fn default() -> Self {
        Self {
            test_subject: None,
            repetition: 1,
        }
    }
}

/// The master `seed` drives every stochastic stage; the sections carry no
/// seeds of their own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub preprocess: PreprocessConfig,
    pub architecture: ArchitectureConfig,
    pub train: TrainConfig,
    pub loso: LosoSection,
    pub fold: FoldSection,
}


/// Section-level seeds are replaced by the master seed, so they are refused
/// on input and hidden on output.
const SEEDED_SECTIONS: [&str; 2] = ["synth", "train"];

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(one_line(&e.to_string())))?;
        for s in SEEDED_SECTIONS {
            if table.get(s).and_then(|v| v.get("seed")).is_some() {
                return Err(CliError::Config(format!(
                    "[{s}] seed is not configurable; set the top-level seed instead"
                )));
            }
        }
        let mut cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(one_line(&e.to_string())))?;
        cfg.set_seed(cfg.seed);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| e.context(format!("config {}", path.display())))
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.synth.seed = seed;
        self.train.seed = seed;
    }

    /// Defaults as TOML, without the section seeds.
    pub fn default_toml() -> String {
        let mut table = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
        strip_section_seeds(&mut table);
        toml::to_string(&table).expect("defaults serialize")
    }

    /// Effective configuration as JSON for run manifests.
    pub fn manifest_value(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        for s in SEEDED_SECTIONS {
            if let Some(section) = v.get_mut(s).and_then(|x| x.as_object_mut()) {
                section.remove("seed");
            }
        }
        v
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.loso.repetitions == 0 {
            return Err(CliError::Config("loso.repetitions must be at least 1".into()));
        }
        if self.fold.repetition == 0 {
            return Err(CliError::Config("fold.repetition is 1-based".into()));
        }
        let bad = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        self.train.validate().map_err(|e| bad(&e))?;
        self.synth.validate().map_err(|e| bad(&e))?;
        Ok(())
    }
}

fn strip_section_seeds(table: &mut toml::Table) {
    for s in SEEDED_SECTIONS {
        if let Some(toml::Value::Table(t)) = table.get_mut(s) {
            t.remove("seed");
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Expands `all` and parses `<backbone>-<sefe|nosefe>` names, keeping order
/// and dropping repeats.
pub fn parse_models(names: &[String]) -> Result<Vec<ModelVariant>, CliError> {
    let mut out: Vec<ModelVariant> = Vec::new();
    for name in names.iter().map(|n| n.trim()).filter(|n| !n.is_empty()) {
        let batch = if name.eq_ignore_ascii_case("all") {
            ModelVariant::all()
        } else {
            vec![name
                .parse::<ModelVariant>()
                .map_err(|e| CliError::Config(format!("model {name:?}: {e}")))?]
        };
        for v in batch {
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::Config("no models selected".into()));
    }
    Ok(out)
}
