//! Bundled per-subject accuracy tables and the three with/without-SEFE
//! comparisons run on them.

use serde::{Deserialize, Serialize};

use super::{compare_pairs, Sample, StatReport, StatsError, SIGNIFICANCE_ALPHA};
use crate::train::LosoReport;

/// Model names of the bundled tables, baseline before treatment per backbone.
pub const BUNDLED_MODELS: [&str; 6] = [
    "deep-nosefe",
    "deep-sefe",
    "shallow-nosefe",
    "shallow-sefe",
    "eegnet-nosefe",
    "eegnet-sefe",
];

const SOURCES: [&str; 6] = [
    include_str!("../../fixtures/deep-nosefe.csv"),
    include_str!("../../fixtures/deep-sefe.csv"),
    include_str!("../../fixtures/shallow-nosefe.csv"),
    include_str!("../../fixtures/shallow-sefe.csv"),
    include_str!("../../fixtures/eegnet-nosefe.csv"),
    include_str!("../../fixtures/eegnet-sefe.csv"),
];

/// A rounded accuracy table. Summary values are kept exactly as printed;
/// they are not recomputed from the rounded cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundledTable {
    pub model: String,
    pub subjects: Vec<String>,
    pub cells: Vec<Vec<f64>>,
    pub averages: Vec<f64>,
    pub average_row: Vec<f64>,
    pub std_row: Vec<f64>,
}

impl BundledTable {
    pub fn parse(model: &str, text: &str) -> Result<Self, StatsError> {
        let bad = |reason: String| StatsError::Fixture {
            name: model.to_string(),
            reason,
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let width = reader.headers().map_err(|e| bad(e.to_string()))?.len();
        if width < 3 {
            return Err(bad("expected subject, repetitions, average".into()));
        }
        let mut t = BundledTable {
            model: model.to_string(),
            subjects: vec![],
            cells: vec![],
            averages: vec![],
            average_row: vec![],
            std_row: vec![],
        };
        for rec in reader.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let vals: Vec<f64> = rec
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<f64>().map_err(|e| bad(format!("'{v}': {e}"))))
                .collect::<Result<_, _>>()?;
            match rec[0].trim() {
                "Average" => t.average_row = vals,
                "Std" | "Std." => t.std_row = vals,
                subject => {
                    t.subjects.push(subject.to_string());
                    t.averages.push(vals[width - 2]);
                    t.cells.push(vals[..width - 2].to_vec());
                }
            }
        }
        if t.subjects.is_empty() {
            return Err(bad("no subject rows".into()));
        }
        Ok(t)
    }

    /// Per-subject averages as printed.
    pub fn sample(&self) -> Result<Sample, StatsError> {
        Sample::new(self.model.clone(), self.averages.clone())
    }
}

/// The six bundled tables in [`BUNDLED_MODELS`] order.
pub fn bundled_tables() -> Result<Vec<BundledTable>, StatsError> {
    BUNDLED_MODELS
        .iter()
        .zip(SOURCES)
        .map(|(m, s)| BundledTable::parse(m, s))
        .collect()
}

/// Without- versus with-SEFE comparison per backbone on the bundled tables.
pub fn reproduce_reference_stats() -> Result<StatReport, StatsError> {
    let t = bundled_tables()?;
    let pairs = t
        .chunks(2)
        .map(|p| Ok((p[0].sample()?, p[1].sample()?)))
        .collect::<Result<Vec<_>, StatsError>>()?;
    compare_pairs(&pairs, SIGNIFICANCE_ALPHA)
}

/// Pairs `<backbone>-nosefe` with `<backbone>-sefe` among `reports` and
/// compares per-subject averages. Subjects must line up.
pub fn compare_reports(reports: &[LosoReport]) -> Result<StatReport, StatsError> {
    let mut pairs = Vec::new();
    for base in reports.iter().filter(|r| r.model.ends_with("-nosefe")) {
        let stem = base.model.trim_end_matches("-nosefe");
        let Some(treat) = reports.iter().find(|r| r.model == format!("{stem}-sefe")) else {
            continue;
        };
        if base.subjects != treat.subjects {
            return Err(StatsError::Fixture {
                name: treat.model.clone(),
                reason: format!("subjects differ from {}", base.model),
            });
        }
        pairs.push((
            Sample::new(base.model.clone(), base.averages.clone())?,
            Sample::new(treat.model.clone(), treat.averages.clone())?,
        ));
    }
    if pairs.is_empty() {
        return Err(StatsError::Fixture {
            name: "reports".into(),
            reason: "no <backbone>-nosefe / <backbone>-sefe pair found".into(),
        });
    }
    compare_pairs(&pairs, SIGNIFICANCE_ALPHA)
}
