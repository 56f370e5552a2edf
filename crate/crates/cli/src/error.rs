use std::path::Path;

use thiserror::Error;

use sefe_core::dataset::DatasetError;
use sefe_core::decoders::DecoderError;
use sefe_core::stats::StatsError;
use sefe_core::train::TrainError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{0}")]
    Stats(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<CliError>,
    },
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::Constant("paired t") => CliError::Stats(format!(
                "{e}; the paired per-subject averages are identical, so the difference has zero \
                 spread. Compare reports of different models or produced with different seeds"
            )),
            other => CliError::Stats(other.to_string()),
        }
    }
}

fn train_category(e: &TrainError) -> &'static str {
    match e {
        TrainError::InvalidConfig(_) => "config",
        TrainError::Dataset(DatasetError::Io { .. }) => "io",
        TrainError::Dataset(_) | TrainError::Signal(_) | TrainError::Report(_) => "data",
        TrainError::Decoder(_) => "model",
        TrainError::Fold { source, .. } => train_category(source),
        _ => "train",
    }
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        CliError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Machine-readable category printed as `error[<category>]`.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io { .. } | CliError::Dataset(DatasetError::Io { .. }) => "io",
            CliError::Dataset(_) => "data",
            CliError::Decoder(_) => "model",
            CliError::Train(e) => train_category(e),
            CliError::Stats(_) => "stats",
            CliError::Context { source, .. } => source.category(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.category() {
            "usage" | "config" => 2,
            "io" => 3,
            "data" => 4,
            "model" => 5,
            "train" => 6,
            _ => 7,
        }
    }
}
