//! Normality, equal-variance and paired-difference tests.

mod reference;

pub use reference::{
    bundled_tables, compare_reports, reproduce_reference_stats, BundledTable, BUNDLED_MODELS,
};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("{test} needs at least {min} values, got {n}")]
    TooFew { test: &'static str, n: usize, min: usize },
    #[error("{test} accepts at most {max} values, got {n}")]
    TooMany { test: &'static str, n: usize, max: usize },
    #[error("sample '{0}' contains a non-finite value")]
    NonFinite(String),
    #[error("{0}: all values identical, statistic undefined")]
    Constant(&'static str),
    #[error("paired samples differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("Levene's statistic is 0/0: no group has internal spread")]
    NoDeviation,
    #[error("fixture {name}: {reason}")]
    Fixture { name: String, reason: String },
    #[error("distribution: {0}")]
    Distribution(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub label: String,
    pub values: Vec<f64>,
}

impl Sample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self, StatsError> {
        let label = label.into();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(label));
        }
        Ok(Self { label, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedT {
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeveneCenter {
    Mean,
    /// Brown–Forsythe variant.
    Median,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Shapiro–Wilk W and p-value, Royston's approximation, 3 ≤ n ≤ 5000.
pub fn shapiro_wilk(sample: &Sample) -> Result<TestResult, StatsError> {
    const TEST: &str = "Shapiro-Wilk";
    let n = sample.len();
    if n < 3 {
        return Err(StatsError::TooFew { test: TEST, n, min: 3 });
    }
    if n > 5000 {
        return Err(StatsError::TooMany { test: TEST, n, max: 5000 });
    }
    let mut x = sample.values.clone();
    x.sort_by(f64::total_cmp);
    if x[n - 1] - x[0] <= 0.0 {
        return Err(StatsError::Constant(TEST));
    }

    // upper-half coefficients, largest first
    let half = n / 2;
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = 0.5f64.sqrt();
    } else {
        let norm = std_normal();
        let nf = n as f64;
        // m[i] is the (n - i)-th expected order statistic, positive
        let m: Vec<f64> = (0..half)
            .map(|i| -norm.inverse_cdf(((i + 1) as f64 - 0.375) / (nf + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let u = 1.0 / nf.sqrt();
        let c1 = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
        let c2 = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        a[0] = m[0] / ssumm2 + poly(&c1, u);
        let (first, fac) = if n > 5 {
            a[1] = m[1] / ssumm2 + poly(&c2, u);
            let num = summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1];
            let den = 1.0 - 2.0 * a[0] * a[0] - 2.0 * a[1] * a[1];
            (2, (num / den).sqrt())
        } else {
            let num = summ2 - 2.0 * m[0] * m[0];
            let den = 1.0 - 2.0 * a[0] * a[0];
            (1, (num / den).sqrt())
        };
        for i in first..half {
            a[i] = m[i] / fac;
        }
    }

    let mean = x.iter().sum::<f64>() / n as f64;
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let lin: f64 = (0..half).map(|i| a[i] * (x[n - 1 - i] - x[i])).sum();
    let w = (lin * lin / ss).min(1.0);

    let p = if n == 3 {
        let p = (6.0 / std::f64::consts::PI) * (w.sqrt().asin() - 0.75f64.sqrt().asin());
        p.clamp(0.0, 1.0)
    } else if w >= 1.0 {
        1.0
    } else {
        let nf = n as f64;
        let mut y = (1.0 - w).ln();
        let (mu, sigma) = if n <= 11 {
            let gamma = poly(&[-2.273, 0.459], nf);
            if y >= gamma {
                return Ok(TestResult {
                    statistic: w,
                    p_value: 0.0,
                });
            }
            y = -(gamma - y).ln();
            (
                poly(&[0.5440, -0.39978, 0.025054, -6.714e-4], nf),
                poly(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp(),
            )
        } else {
            let l = nf.ln();
            (
                poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], l),
                poly(&[-0.4803, -0.082676, 0.0030302], l).exp(),
            )
        };
        std_normal().sf((y - mu) / sigma)
    };
    Ok(TestResult {
        statistic: w,
        p_value: p,
    })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Mean-centred Levene test.
pub fn levene(groups: &[Sample]) -> Result<TestResult, StatsError> {
    levene_with(groups, LeveneCenter::Mean)
}

pub fn levene_with(groups: &[Sample], center: LeveneCenter) -> Result<TestResult, StatsError> {
    const TEST: &str = "Levene";
    if groups.len() < 2 {
        return Err(StatsError::TooFew {
            test: "Levene (groups)",
            n: groups.len(),
            min: 2,
        });
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(StatsError::TooFew { test: TEST, n: g.len(), min: 2 });
    }
    let z: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let c = match center {
                LeveneCenter::Mean => g.values.iter().sum::<f64>() / g.len() as f64,
                LeveneCenter::Median => median(&g.values),
            };
            g.values.iter().map(|v| (v - c).abs()).collect()
        })
        .collect();
    let k = z.len();
    let total: usize = z.iter().map(Vec::len).sum();
    let group_means: Vec<f64> = z.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    let grand = z.iter().flatten().sum::<f64>() / total as f64;
    let between: f64 = z
        .iter()
        .zip(&group_means)
        .map(|(g, m)| g.len() as f64 * (m - grand) * (m - grand))
        .sum();
    let within: f64 = z
        .iter()
        .zip(&group_means)
        .map(|(g, m)| g.iter().map(|v| (v - m) * (v - m)).sum::<f64>())
        .sum();
    let (d1, d2) = ((k - 1) as f64, (total - k) as f64);
    if within == 0.0 {
        if between == 0.0 {
            return Err(StatsError::NoDeviation);
        }
        return Ok(TestResult {
            statistic: f64::INFINITY,
            p_value: 0.0,
        });
    }
    let w = (d2 / d1) * between / within;
    let f = FisherSnedecor::new(d1, d2).map_err(|e| StatsError::Distribution(e.to_string()))?;
    Ok(TestResult {
        statistic: w,
        p_value: f.sf(w).clamp(0.0, 1.0),
    })
}

/// Two-tailed paired t-test on `a − b`.
pub fn paired_ttest(a: &Sample, b: &Sample) -> Result<PairedT, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch { a: a.len(), b: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::TooFew { test: "paired t", n, min: 2 });
    }
    let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let df = n - 1;
    if var == 0.0 {
        if mean == 0.0 {
            return Err(StatsError::Constant("paired t"));
        }
        return Ok(PairedT {
            t: mean.signum() * f64::INFINITY,
            df,
            p_value: 0.0,
        });
    }
    let t = mean * nf.sqrt() / var.sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| StatsError::Distribution(e.to_string()))?;
    Ok(PairedT {
        t,
        df,
        p_value: (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0),
    })
}

/// `min(1, k · p)`.
pub fn bonferroni(p: f64, k: usize) -> f64 {
    (p * k as f64).min(1.0)
}

/// One baseline-versus-treatment comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub treatment: String,
    pub shapiro_baseline: TestResult,
    pub shapiro_treatment: TestResult,
    /// Normality of the paired differences; reported, not part of the verdict.
    pub shapiro_differences: Option<TestResult>,
    pub levene: TestResult,
    pub ttest: PairedT,
    pub p_bonferroni: f64,
    pub normality_ok: bool,
    pub homoscedasticity_ok: bool,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    /// Level for the normality and equal-variance checks.
    pub assumption_alpha: f64,
    /// Level for the corrected paired-t verdict.
    pub alpha: f64,
    /// Number of comparisons in the Bonferroni family.
    pub k: usize,
    pub comparisons: Vec<Comparison>,
}

pub const ASSUMPTION_ALPHA: f64 = 0.05;
pub const SIGNIFICANCE_ALPHA: f64 = 0.001;

/// Runs the full battery on each `(baseline, treatment)` pair; the
/// Bonferroni family is the set of pairs.
pub fn compare_pairs(pairs: &[(Sample, Sample)], alpha: f64) -> Result<StatReport, StatsError> {
    let k = pairs.len();
    let comparisons = pairs
        .iter()
        .map(|(a, b)| {
            let sa = shapiro_wilk(a)?;
            let sb = shapiro_wilk(b)?;
            let diff = Sample::new(
                format!("{} - {}", b.label, a.label),
                b.values.iter().zip(&a.values).map(|(y, x)| y - x).collect(),
            )?;
            let sd = shapiro_wilk(&diff).ok();
            let lev = levene(&[a.clone(), b.clone()])?;
            let t = paired_ttest(b, a)?;
            let p_bonferroni = bonferroni(t.p_value, k);
            Ok(Comparison {
                baseline: a.label.clone(),
                treatment: b.label.clone(),
                shapiro_baseline: sa,
                shapiro_treatment: sb,
                shapiro_differences: sd,
                levene: lev,
                ttest: t,
                p_bonferroni,
                normality_ok: sa.p_value > ASSUMPTION_ALPHA && sb.p_value > ASSUMPTION_ALPHA,
                homoscedasticity_ok: lev.p_value > ASSUMPTION_ALPHA,
                significant: p_bonferroni < alpha,
            })
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    Ok(StatReport {
        assumption_alpha: ASSUMPTION_ALPHA,
        alpha,
        k,
        comparisons,
    })
}

impl StatReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "paired t with Bonferroni correction (k = {}, alpha = {}); assumptions at {}\n",
            self.k, self.alpha, self.assumption_alpha
        );
        for c in &self.comparisons {
            out.push_str(&format!("{} vs {}\n", c.treatment, c.baseline));
            out.push_str(&format!(
                "  Shapiro-Wilk  {}: W = {:.4}, p = {:.4}; {}: W = {:.4}, p = {:.4}\n",
                c.baseline,
                c.shapiro_baseline.statistic,
                c.shapiro_baseline.p_value,
                c.treatment,
                c.shapiro_treatment.statistic,
                c.shapiro_treatment.p_value
            ));
            if let Some(d) = c.shapiro_differences {
                out.push_str(&format!(
                    "  Shapiro-Wilk  differences: W = {:.4}, p = {:.4}\n",
                    d.statistic, d.p_value
                ));
            }
            out.push_str(&format!(
                "  Levene        W = {:.4}, p = {:.4}\n",
                c.levene.statistic, c.levene.p_value
            ));
            out.push_str(&format!(
                "  paired t      t({}) = {:.4}, p = {:.3e}, corrected p = {:.3e} -> {}\n",
                c.ttest.df,
                c.ttest.t,
                c.ttest.p_value,
                c.p_bonferroni,
                if c.significant { "significant" } else { "not significant" }
            ));
        }
        out
    }
}
