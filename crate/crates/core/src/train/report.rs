use serde::{Deserialize, Serialize};

use super::TrainError;

/// Held-out accuracies of one model: a row per subject, a column per repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosoReport {
    pub model: String,
    pub subjects: Vec<String>,
    pub cells: Vec<Vec<f64>>,
    /// Per-subject mean over repetitions.
    pub averages: Vec<f64>,
    /// Column means over subjects; the last entry averages `averages`.
    pub average_row: Vec<f64>,
    /// Population standard deviation over subjects, same layout as `average_row`.
    pub std_row: Vec<f64>,
}

/// Tolerance for the recomputed summary rows.
const ROW_TOL: f64 = 1e-9;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pop_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

impl LosoReport {
    pub fn new(model: String, subjects: Vec<String>, cells: Vec<Vec<f64>>) -> Result<Self, TrainError> {
        let bad = |m: String| Err(TrainError::Report(m));
        if subjects.is_empty() || subjects.len() != cells.len() {
            return bad(format!(
                "{} subjects for {} rows",
                subjects.len(),
                cells.len()
            ));
        }
        let k = cells[0].len();
        if k == 0 || cells.iter().any(|r| r.len() != k) {
            return bad("every row needs the same, non-zero number of repetitions".into());
        }
        if cells.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return bad("accuracies must lie in [0, 1]".into());
        }
        let averages: Vec<f64> = cells.iter().map(|r| mean(r)).collect();
        let mut average_row = Vec::with_capacity(k + 1);
        let mut std_row = Vec::with_capacity(k + 1);
        for j in 0..k {
            let col: Vec<f64> = cells.iter().map(|r| r[j]).collect();
            average_row.push(mean(&col));
            std_row.push(pop_std(&col));
        }
        average_row.push(mean(&averages));
        std_row.push(pop_std(&averages));
        Ok(Self {
            model,
            subjects,
            cells,
            averages,
            average_row,
            std_row,
        })
    }

    pub fn n_repetitions(&self) -> usize {
        self.cells[0].len()
    }

    /// Mean over subjects of the per-subject averages.
    pub fn grand_mean(&self) -> f64 {
        *self.average_row.last().expect("non-empty")
    }

    /// Population standard deviation of the per-subject averages.
    pub fn grand_std(&self) -> f64 {
        *self.std_row.last().expect("non-empty")
    }

    /// Checks that the stored summary rows agree with the cells.
    pub fn verify(&self) -> Result<(), TrainError> {
        let fresh = Self::new(self.model.clone(), self.subjects.clone(), self.cells.clone())?;
        let close = |a: &[f64], b: &[f64]| {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= ROW_TOL)
        };
        for (name, stored, computed) in [
            ("per-subject average", &self.averages, &fresh.averages),
            ("Average row", &self.average_row, &fresh.average_row),
            ("Std row", &self.std_row, &fresh.std_row),
        ] {
            if !close(stored, computed) {
                return Err(TrainError::Report(format!(
                    "{name} {stored:?} disagrees with cells ({computed:?})"
                )));
            }
        }
        Ok(())
    }

    /// `subject,acc_1,…,acc_k,average` rows, then `Average` and `Std` rows.
    pub fn to_csv(&self) -> String {
        let k = self.n_repetitions();
        let mut out = String::from("subject");
        for j in 1..=k {
            out.push_str(&format!(",acc_{j}"));
        }
        out.push_str(",average\n");
        let line = |label: &str, vals: &mut dyn Iterator<Item = f64>| {
            let mut s = label.to_string();
            for v in vals {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
            s
        };
        for (i, subject) in self.subjects.iter().enumerate() {
            out.push_str(&line(
                subject,
                &mut self.cells[i].iter().copied().chain([self.averages[i]]),
            ));
        }
        out.push_str(&line("Average", &mut self.average_row.iter().copied()));
        out.push_str(&line("Std", &mut self.std_row.iter().copied()));
        out
    }

    /// Parses [`to_csv`](Self::to_csv) output and verifies the summary rows.
    pub fn from_csv(model: &str, text: &str) -> Result<Self, TrainError> {
        let bad = |m: String| TrainError::Report(m);
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        let k = header.len().checked_sub(2).filter(|&k| k > 0).ok_or_else(|| {
            bad("header must be subject, one column per repetition, average".into())
        })?;
        let mut subjects = Vec::new();
        let mut cells = Vec::new();
        let mut averages = Vec::new();
        let mut average_row = None;
        let mut std_row = None;
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let vals = rec
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| bad(format!("row {}: {e}", line + 2)))?;
            if vals.len() != k + 1 {
                return Err(bad(format!("row {} has {} values, expected {}", line + 2, vals.len(), k + 1)));
            }
            match rec[0].trim() {
                "Average" => average_row = Some(vals),
                "Std" | "Std." => std_row = Some(vals),
                subject => {
                    subjects.push(subject.to_string());
                    averages.push(vals[k]);
                    cells.push(vals[..k].to_vec());
                }
            }
        }
        let report = Self {
            model: model.to_string(),
            subjects,
            cells,
            averages,
            average_row: average_row.ok_or_else(|| bad("missing Average row".into()))?,
            std_row: std_row.ok_or_else(|| bad("missing Std row".into()))?,
        };
        report.verify()?;
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummaryEntry {
    pub model: String,
    pub mean: f64,
    pub std: f64,
    /// `mean` divided by the mean of all models' grand means.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub across_model_mean: f64,
    pub entries: Vec<ModelSummaryEntry>,
}

/// Grand means of several models and their ratio to the across-model average.
pub fn summarize_models(reports: &[LosoReport]) -> Result<ModelSummary, TrainError> {
    if reports.is_empty() {
        return Err(TrainError::Report("no reports to summarize".into()));
    }
    let means: Vec<f64> = reports.iter().map(LosoReport::grand_mean).collect();
    let across_model_mean = mean(&means);
    let entries = reports
        .iter()
        .map(|r| ModelSummaryEntry {
            model: r.model.clone(),
            mean: r.grand_mean(),
            std: r.grand_std(),
            normalized: r.grand_mean() / across_model_mean,
        })
        .collect();
    Ok(ModelSummary {
        across_model_mean,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(model: &str, cells: Vec<Vec<f64>>) -> LosoReport {
        let subjects = (1..=cells.len()).map(|i| format!("S{i:02}")).collect();
        LosoReport::new(model.into(), subjects, cells).unwrap()
    }

    #[test]
    fn summary_rows_and_csv_round_trip() {
        let r = report("m", vec![vec![0.5, 0.7, 0.6, 0.6], vec![0.9, 0.8, 1.0, 0.9], vec![0.1, 0.3, 0.2, 0.2]]);
        assert!((r.averages[0] - 0.6).abs() < 1e-12);
        assert!((r.grand_mean() - (0.6 + 0.9 + 0.2) / 3.0).abs() < 1e-12);
        let m = r.grand_mean();
        let sd = ([0.6, 0.9, 0.2].iter().map(|a: &f64| (a - m).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!((r.grand_std() - sd).abs() < 1e-12);
        let text = r.to_csv();
        assert!(text.starts_with("subject,acc_1,acc_2,acc_3,acc_4,average\n"));
        assert_eq!(text.lines().count(), 1 + 3 + 2);
        assert_eq!(LosoReport::from_csv("m", &text).unwrap(), r);
    }

    #[test]
    fn tampered_rows_rejected() {
        let r = report("m", vec![vec![0.5, 0.7], vec![0.9, 0.8]]);
        let text = r.to_csv().replace("Average,0.7,", "Average,0.71,");
        assert!(LosoReport::from_csv("m", &text).is_err());
        assert!(LosoReport::new("m".into(), vec!["a".into()], vec![vec![1.5]]).is_err());
    }

    #[test]
    fn normalization() {
        let means = [0.67, 0.72, 0.64, 0.69, 0.64, 0.69];
        let reports: Vec<LosoReport> = means
            .iter()
            .enumerate()
            .map(|(i, &m)| report(&format!("m{i}"), vec![vec![m]]))
            .collect();
        let s = summarize_models(&reports).unwrap();
        assert!((s.across_model_mean - 0.675).abs() < 1e-12);
        assert!((s.entries[1].normalized - 0.72 / 0.675).abs() < 1e-12);
        let single = summarize_models(&reports[..1]).unwrap();
        assert_eq!(single.entries[0].normalized, 1.0);
        let same = summarize_models(&[reports[2].clone(), reports[4].clone()]).unwrap();
        assert!(same.entries.iter().all(|e| e.normalized == 1.0));
        assert!(summarize_models(&[]).is_err());
    }
}
