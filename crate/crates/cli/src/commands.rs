//! One function per subcommand. Each prints a short human summary to stdout
//! and leaves machine-readable files plus a `manifest.json` in `--out`.

use std::fs;
use std::path::{Path, PathBuf};

use sefe_core::dataset::{read_epochs, read_recording, synth_generate, write_epochs, write_recording, EpochSet};
use sefe_core::decoders::{audit_parameters, ArchitectureConfig, Backbone, ModelVariant};
use sefe_core::signal::preprocess;
use sefe_core::stats::{compare_reports, reproduce_reference_stats, StatReport};
use sefe_core::train::{run_fold, run_loso, summarize_models, LosoReport, RunResult};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{ensure_dir, to_json, write_dir_atomic, write_file_atomic, Manifest};

/// Subdirectories of `dir` holding `marker`, sorted by name.
fn subject_dirs(dir: &Path, marker: &str) -> Result<Vec<PathBuf>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Config(format!("input {} is not a directory", dir.display())));
    }
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(marker).is_file())
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(CliError::Config(format!(
            "no subject directories with {marker} under {}",
            dir.display()
        )));
    }
    Ok(out)
}

fn load_epoch_sets(input: &Path) -> Result<Vec<EpochSet>, CliError> {
    subject_dirs(input, "epochs.json")?
        .iter()
        .map(|d| read_epochs(d).map_err(|e| CliError::from(e).context(d.display().to_string())))
        .collect()
}

/// `cfg.architecture` resized to the epochs on disk.
fn architecture_for(cfg: &RunConfig, data: &[EpochSet], v: ModelVariant) -> ArchitectureConfig {
    ArchitectureConfig {
        n_channels: data[0].n_channels(),
        n_samples: data[0].n_samples(),
        ..cfg.architecture.clone()
    }
    .for_variant(v)
}

pub fn synth(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let recordings = synth_generate(&cfg.synth)?;
    ensure_dir(out)?;
    let mut manifest = Manifest::new("synth", cfg, None);
    for r in &recordings {
        let id = r.subject_id();
        write_dir_atomic(&out.join(id), |tmp| Ok(write_recording(r, tmp)?))
            .map_err(|e| e.context(format!("subject {id}")))?;
        let mut per_class = [0usize; 3];
        for e in r.events() {
            per_class[e.label.index()] += 1;
        }
        println!(
            "{id}: {} trials ({} / {} / {} per class), {} channels x {} samples at {} Hz",
            r.events().len(),
            per_class[0],
            per_class[1],
            per_class[2],
            r.signal().n_channels(),
            r.signal().n_samples(),
            r.signal().fs_hz()
        );
        manifest.outputs.push(id.to_string());
    }
    manifest.write(out)
}

pub fn preprocess_cmd(cfg: &RunConfig, input: &Path, out: &Path) -> Result<(), CliError> {
    let dirs = subject_dirs(input, "header.json")?;
    ensure_dir(out)?;
    let mut manifest = Manifest::new("preprocess", cfg, Some(input));
    for dir in &dirs {
        let rec = read_recording(dir).map_err(|e| CliError::from(e).context(dir.display().to_string()))?;
        let id = rec.subject_id().to_string();
        let set = preprocess(&rec, &cfg.preprocess).map_err(|e| CliError::from(e).context(format!("subject {id}")))?;
        write_dir_atomic(&out.join(&id), |tmp| Ok(write_epochs(&set, tmp)?))
            .map_err(|e| e.context(format!("subject {id}")))?;
        println!(
            "{id}: {} x {} x {} epochs at {} Hz",
            set.n_trials(),
            set.n_channels(),
            set.n_samples(),
            set.fs_hz()
        );
        manifest.outputs.push(id);
    }
    manifest.write(out)
}

fn history_csv(run: &RunResult) -> String {
    let mut s = String::from("epoch,train_loss,train_accuracy,val_loss,val_accuracy\n");
    for h in &run.history {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            h.epoch, h.train_loss, h.train_accuracy, h.val_loss, h.val_accuracy
        ));
    }
    s
}

pub fn train_cmd(cfg: &RunConfig, input: &Path, out: &Path, models: &[ModelVariant]) -> Result<(), CliError> {
    let data = load_epoch_sets(input)?;
    let test_subject = match &cfg.fold.test_subject {
        Some(s) => s.clone(),
        None => data[0]
            .subject_ids()
            .first()
            .cloned()
            .ok_or_else(|| CliError::Config("first epoch set is empty".into()))?,
    };
    ensure_dir(out)?;
    let mut manifest = Manifest::new("train", cfg, Some(input));
    for &v in models {
        let arch = architecture_for(cfg, &data, v);
        let run = run_fold(&arch, &data, &cfg.train, &test_subject, cfg.fold.repetition)
            .map_err(|e| CliError::from(e).context(format!("model {v}")))?;
        let stem = format!("train-{v}");
        write_file_atomic(&out.join(format!("{stem}.csv")), history_csv(&run).as_bytes())?;
        write_file_atomic(&out.join(format!("{stem}.json")), &to_json(&run))?;
        println!(
            "{v}: held-out {test_subject}, repetition {}: accuracy {:.4} (best epoch {} of {})",
            run.repetition,
            run.test_accuracy,
            run.best_epoch,
            run.history.len()
        );
        manifest.outputs.extend([format!("{stem}.csv"), format!("{stem}.json")]);
    }
    manifest.write(out)
}

pub fn loso_cmd(cfg: &RunConfig, input: &Path, out: &Path, models: &[ModelVariant], jobs: usize) -> Result<(), CliError> {
    let data = load_epoch_sets(input)?;
    ensure_dir(out)?;
    let mut manifest = Manifest::new("loso", cfg, Some(input));
    let mut reports = Vec::new();
    for &v in models {
        let arch = architecture_for(cfg, &data, v);
        let outcome = run_loso(&arch, &data, &cfg.train, cfg.loso.repetitions, jobs)
            .map_err(|e| CliError::from(e).context(format!("model {v}")))?;
        write_file_atomic(&out.join(format!("{v}.csv")), outcome.report.to_csv().as_bytes())?;
        write_file_atomic(&out.join(format!("{v}.runs.json")), &to_json(&outcome.runs))?;
        println!(
            "{v}: grand average {:.4} (std {:.4}) over {} subjects x {} repetitions",
            outcome.report.grand_mean(),
            outcome.report.grand_std(),
            outcome.report.subjects.len(),
            outcome.report.n_repetitions()
        );
        manifest.outputs.extend([format!("{v}.csv"), format!("{v}.runs.json")]);
        reports.push(outcome.report);
    }
    let summary = summarize_models(&reports)?;
    let mut csv = String::from("model,mean,std,normalized\n");
    for e in &summary.entries {
        csv.push_str(&format!("{},{},{},{}\n", e.model, e.mean, e.std, e.normalized));
    }
    write_file_atomic(&out.join("summary.csv"), csv.as_bytes())?;
    println!("across-model mean {:.4}", summary.across_model_mean);
    manifest.outputs.push("summary.csv".into());
    manifest.write(out)
}

pub fn audit_cmd(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let mut csv = String::from("model,parameters,reference,deviation,sefe_delta,closed_form_delta\n");
    let mut audits = Vec::new();
    for b in Backbone::ALL {
        let a = audit_parameters(&ArchitectureConfig {
            backbone: b,
            ..cfg.architecture.clone()
        })?;
        print!("{}", a.render());
        for (with_sefe, total, reference, deviation) in [
            (false, a.total_without, a.reference.without_sefe, a.deviation_without),
            (true, a.total_with, a.reference.with_sefe, a.deviation_with),
        ] {
            let v = ModelVariant { backbone: b, with_sefe };
            csv.push_str(&format!(
                "{v},{total},{reference},{deviation},{},{}\n",
                a.delta, a.closed_form_delta
            ));
        }
        audits.push(a);
    }
    println!();
    println!("{:<16} {:>10} {:>10} {:>10}", "model", "computed", "reference", "deviation");
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let dev: f64 = f[3].parse().unwrap_or(f64::NAN);
        println!("{:<16} {:>10} {:>10} {:>+10.3}", f[0], f[1], f[2], dev);
    }
    if let Some(out) = out {
        ensure_dir(out)?;
        write_file_atomic(&out.join("audit.csv"), csv.as_bytes())?;
        write_file_atomic(&out.join("audit.json"), &to_json(&audits))?;
        let mut manifest = Manifest::new("audit", cfg, None);
        manifest.outputs = vec!["audit.csv".into(), "audit.json".into()];
        manifest.write(out)?;
    }
    Ok(())
}

/// Reports named `<model>.csv` in `dir`, sorted by file name.
fn load_reports(dir: &Path) -> Result<Vec<LosoReport>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Config(format!("input {} is not a directory", dir.display())));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "csv")
                && p.file_stem()
                    .and_then(|s| s.to_str())
                    .is_some_and(|s| s.parse::<ModelVariant>().is_ok())
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            let model = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            LosoReport::from_csv(model, &text).map_err(|e| CliError::from(e).context(p.display().to_string()))
        })
        .collect()
}

fn stats_csv(r: &StatReport) -> String {
    let mut s = String::from(
        "baseline,treatment,shapiro_p_baseline,shapiro_p_treatment,levene_w,levene_p,t,df,p,p_bonferroni,\
         normality_ok,homoscedasticity_ok,significant\n",
    );
    for c in &r.comparisons {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.baseline,
            c.treatment,
            c.shapiro_baseline.p_value,
            c.shapiro_treatment.p_value,
            c.levene.statistic,
            c.levene.p_value,
            c.ttest.t,
            c.ttest.df,
            c.ttest.p_value,
            c.p_bonferroni,
            c.normality_ok,
            c.homoscedasticity_ok,
            c.significant
        ));
    }
    s
}

pub fn stats_cmd(cfg: &RunConfig, input: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let report = match input {
        Some(dir) => compare_reports(&load_reports(dir)?)?,
        None => reproduce_reference_stats()?,
    };
    print!("{}", report.render());
    if let Some(out) = out {
        ensure_dir(out)?;
        write_file_atomic(&out.join("stats.csv"), stats_csv(&report).as_bytes())?;
        write_file_atomic(&out.join("stats.json"), &to_json(&report))?;
        let mut manifest = Manifest::new("stats", cfg, input);
        manifest.outputs = vec!["stats.csv".into(), "stats.json".into()];
        manifest.write(out)?;
    }
    Ok(())
}
