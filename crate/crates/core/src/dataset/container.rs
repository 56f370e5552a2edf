//! On-disk containers.
//!
//! A recording is a directory holding
//!
//! * `header.json`: schema version, subject id, sampling rate, channel labels
//!   and sample count;
//! * `signal.f32`: little-endian 32-bit floats, channel-major;
//! * `events.csv`: `sample_index,code` rows with codes 0 = spread-out,
//!   1 = fall-in, 2 = hovering.
//!
//! An epoch set uses the same layout with `epochs.json`, a little-endian
//! 64-bit `epochs.f64` payload (trial, channel, sample order) and a
//! `trials.csv` of `code,subject` rows.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ClassLabel, DatasetError, EpochSet, Event, Recording};
use crate::signal::SignalBlock;

pub const SCHEMA_VERSION: u32 = 1;

const HEADER: &str = "header.json";
const SIGNAL: &str = "signal.f32";
const EVENTS: &str = "events.csv";
const EPOCH_HEADER: &str = "epochs.json";
const EPOCH_DATA: &str = "epochs.f64";
const TRIALS: &str = "trials.csv";

#[derive(Debug, Serialize, Deserialize)]
struct RecordingHeader {
    schema_version: u32,
    subject_id: String,
    fs_hz: f64,
    n_channels: usize,
    n_samples: usize,
    channel_labels: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EpochHeader {
    schema_version: u32,
    n_trials: usize,
    n_channels: usize,
    n_samples: usize,
    fs_hz: f64,
    channel_labels: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes to a sibling temp file, then renames over the target.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn read_header<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::MalformedHeader {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn check_schema(path: &Path, version: u32) -> Result<(), DatasetError> {
    if version != SCHEMA_VERSION {
        return Err(DatasetError::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("unsupported schema version {version}"),
        });
    }
    Ok(())
}

fn read_payload(path: &Path, expected: u64) -> Result<Vec<u8>, DatasetError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() as u64 != expected {
        return Err(DatasetError::TruncatedPayload {
            path: path.to_path_buf(),
            expected,
            found: bytes.len() as u64,
        });
    }
    Ok(bytes)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>, DatasetError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(f))
}

fn malformed(path: &Path, line: usize, reason: impl ToString) -> DatasetError {
    DatasetError::MalformedEvents {
        path: path.to_path_buf(),
        line,
        reason: reason.to_string(),
    }
}

/// Writes `recording` into directory `dir` (created if missing).
///
/// The payload is 32-bit; samples that do not survive the f64 → f32 → f64
/// round trip are rejected rather than silently rounded.
pub fn write_recording(recording: &Recording, dir: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let sig = recording.signal();
    let mut payload = Vec::with_capacity(sig.data().len() * 4);
    for (i, &v) in sig.data().iter().enumerate() {
        let f = v as f32;
        if f64::from(f) != v {
            return Err(DatasetError::PrecisionLoss {
                channel: i / sig.n_samples(),
                sample: i % sig.n_samples(),
                value: v,
            });
        }
        payload.extend_from_slice(&f.to_le_bytes());
    }
    let header = RecordingHeader {
        schema_version: SCHEMA_VERSION,
        subject_id: recording.subject_id().to_string(),
        fs_hz: sig.fs_hz(),
        n_channels: sig.n_channels(),
        n_samples: sig.n_samples(),
        channel_labels: sig.channel_labels().to_vec(),
    };
    let header_json = serde_json::to_string_pretty(&header).expect("header serializes");

    let mut events = csv::Writer::from_writer(Vec::new());
    events
        .write_record(["sample_index", "code"])
        .and_then(|_| {
            recording.events().iter().try_for_each(|e| {
                events.write_record([e.sample.to_string(), e.label.code().to_string()])
            })
        })
        .expect("in-memory csv");
    let events = events.into_inner().expect("in-memory csv");

    write_atomic(&dir.join(SIGNAL), &payload)?;
    write_atomic(&dir.join(EVENTS), &events)?;
    write_atomic(&dir.join(HEADER), header_json.as_bytes())
}

pub fn read_recording(dir: &Path) -> Result<Recording, DatasetError> {
    let header_path = dir.join(HEADER);
    let header: RecordingHeader = read_header(&header_path)?;
    check_schema(&header_path, header.schema_version)?;
    if header.channel_labels.len() != header.n_channels {
        return Err(DatasetError::ChannelLabelMismatch {
            channels: header.n_channels,
            labels: header.channel_labels.len(),
        });
    }
    let n_values = header.n_channels * header.n_samples;
    let bytes = read_payload(&dir.join(SIGNAL), n_values as u64 * 4)?;
    let data = bytes
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
        .collect();
    let signal = SignalBlock::new(data, header.n_channels, header.fs_hz, header.channel_labels)?;

    let events_path = dir.join(EVENTS);
    let mut events = Vec::new();
    for (i, row) in csv_reader(&events_path)?.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| malformed(&events_path, line, e))?;
        if row.len() != 2 {
            return Err(malformed(&events_path, line, "expected sample_index,code"));
        }
        let sample: usize = row[0]
            .trim()
            .parse()
            .map_err(|e| malformed(&events_path, line, e))?;
        let code: i64 = row[1]
            .trim()
            .parse()
            .map_err(|e| malformed(&events_path, line, e))?;
        events.push(Event {
            sample,
            label: ClassLabel::from_code(code)?,
        });
    }
    Recording::new(header.subject_id, signal, events)
}

pub fn write_epochs(set: &EpochSet, dir: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let header = EpochHeader {
        schema_version: SCHEMA_VERSION,
        n_trials: set.n_trials(),
        n_channels: set.n_channels(),
        n_samples: set.n_samples(),
        fs_hz: set.fs_hz(),
        channel_labels: set.channel_labels().to_vec(),
    };
    let payload: Vec<u8> = set.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    let mut trials = csv::Writer::from_writer(Vec::new());
    trials
        .write_record(["code", "subject"])
        .and_then(|_| {
            set.labels()
                .iter()
                .zip(set.subject_ids())
                .try_for_each(|(l, s)| trials.write_record([l.code().to_string(), s.clone()]))
        })
        .expect("in-memory csv");
    let trials = trials.into_inner().expect("in-memory csv");
    write_atomic(&dir.join(EPOCH_DATA), &payload)?;
    write_atomic(&dir.join(TRIALS), &trials)?;
    write_atomic(
        &dir.join(EPOCH_HEADER),
        serde_json::to_string_pretty(&header)
            .expect("header serializes")
            .as_bytes(),
    )
}

pub fn read_epochs(dir: &Path) -> Result<EpochSet, DatasetError> {
    let header_path: PathBuf = dir.join(EPOCH_HEADER);
    let header: EpochHeader = read_header(&header_path)?;
    check_schema(&header_path, header.schema_version)?;
    let n_values = header.n_trials * header.n_channels * header.n_samples;
    let bytes = read_payload(&dir.join(EPOCH_DATA), n_values as u64 * 8)?;
    let data = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    let trials_path = dir.join(TRIALS);
    let mut labels = Vec::with_capacity(header.n_trials);
    let mut subjects = Vec::with_capacity(header.n_trials);
    for (i, row) in csv_reader(&trials_path)?.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| malformed(&trials_path, line, e))?;
        if row.len() != 2 {
            return Err(malformed(&trials_path, line, "expected code,subject"));
        }
        let code: i64 = row[0]
            .trim()
            .parse()
            .map_err(|e| malformed(&trials_path, line, e))?;
        labels.push(ClassLabel::from_code(code)?);
        subjects.push(row[1].to_string());
    }
    if labels.len() != header.n_trials {
        return Err(malformed(
            &trials_path,
            labels.len() + 1,
            format!("{} trials listed, header says {}", labels.len(), header.n_trials),
        ));
    }
    EpochSet::new(
        data,
        header.n_channels,
        header.n_samples,
        labels,
        subjects,
        header.channel_labels,
        header.fs_hz,
    )
}
