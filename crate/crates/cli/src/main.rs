//! `sefe`: synthesize recordings, preprocess them, train and evaluate decoders
//! leave-one-subject-out, audit parameter counts and compare models.
//!
//! Failures print a single `error[<category>]: <message>` line on stderr.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use config::{parse_models, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sefe", version, about = "EEG decoding pipeline with leave-one-subject-out evaluation")]
struct Cli {
    /// TOML run configuration; missing keys take the defaults listed below.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed; overrides the configured one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic subject recordings.
    Synth {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Filter, decimate and epoch every recording under --input.
    Preprocess {
        #[arg(long, value_name = "DIR")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Train and score one held-out subject per model.
    Train {
        #[arg(long, value_name = "DIR")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Comma list of <deep|shallow|eegnet>-<sefe|nosefe>, or `all`.
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        #[arg(long)]
        test_subject: Option<String>,
        /// 1-based repetition whose seeds to use.
        #[arg(long)]
        repetition: Option<usize>,
    },
    /// Leave-one-subject-out evaluation; one report per model.
    Loso {
        #[arg(long, value_name = "DIR")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Comma list of <deep|shallow|eegnet>-<sefe|nosefe>, or `all`.
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Per-layer parameter counts of all six models beside published totals.
    Audit {
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Paired comparisons with and without the feature encoder. Uses the
    /// bundled tables unless --input names a directory of LOSO reports.
    Stats {
        #[arg(long, value_name = "DIR")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Synth { out } => {
            cfg.validate()?;
            commands::synth(&cfg, &out)
        }
        Command::Preprocess { input, out } => {
            cfg.validate()?;
            commands::preprocess_cmd(&cfg, &input, &out)
        }
        Command::Train {
            input,
            out,
            models,
            test_subject,
            repetition,
        } => {
            if test_subject.is_some() {
                cfg.fold.test_subject = test_subject;
            }
            if let Some(r) = repetition {
                cfg.fold.repetition = r;
            }
            if let Some(m) = models {
                cfg.loso.models = m;
            }
            cfg.validate()?;
            let models = parse_models(&cfg.loso.models)?;
            commands::train_cmd(&cfg, &input, &out, &models)
        }
        Command::Loso {
            input,
            out,
            models,
            jobs,
        } => {
            if let Some(m) = models {
                cfg.loso.models = m;
            }
            if let Some(j) = jobs {
                cfg.loso.jobs = j;
            }
            cfg.validate()?;
            let models = parse_models(&cfg.loso.models)?;
            commands::loso_cmd(&cfg, &input, &out, &models, cfg.loso.jobs)
        }
        Command::Audit { out } => commands::audit_cmd(&cfg, out.as_deref()),
        Command::Stats { input, out } => commands::stats_cmd(&cfg, input.as_deref(), out.as_deref()),
    }
}

fn fail(e: &CliError) -> ExitCode {
    let msg = e.to_string().replace('\n', " ");
    eprintln!("error[{}]: {msg}", e.category());
    ExitCode::from(e.exit_code())
}

fn parse_args() -> Result<Cli, clap::Error> {
    let help = format!(
        "Configuration file (TOML). Every key is optional; the defaults are:\n\n{}",
        RunConfig::default_toml()
    );
    let matches = Cli::command().after_long_help(help).try_get_matches()?;
    Cli::from_arg_matches(&matches)
}

fn main() -> ExitCode {
    let cli = match parse_args() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // clap renders several lines; keep the error text on one
            let text = e.to_string();
            let msg: Vec<&str> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .collect();
            let msg = msg.join(" ").trim_start_matches("error: ").to_string();
            return fail(&CliError::Usage(msg));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
