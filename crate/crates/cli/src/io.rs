//! The on-disk experiment record: a small JSON schema holding per-block
//! outcome counts plus the simulation metadata needed to reproduce them.
//!
//! Minus signs are written as U+2212 to match the outcome labels used in
//! the literature; plain ASCII `-` is accepted on read.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::Digest;
use thiserror::Error;
use tomosel::likelihood::{BlockData, ExperimentRecord, LikelihoodError, RecordMetadata};
use tomosel::qstate::{MeasurementSetting, Outcome, PauliAxis, Sign};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} is not a valid experiment record: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("unsupported schema_version {got}; this build reads version {SCHEMA_VERSION}")]
    SchemaVersion { got: u32 },
    #[error("block {order_index}: unknown axis {axis:?}")]
    Axis { order_index: usize, axis: String },
    #[error("block {order_index}: setting lists {got} axes for a {expected}-qubit record")]
    SettingArity {
        order_index: usize,
        got: usize,
        expected: u8,
    },
    #[error("block {order_index}: outcome key {key:?} does not fit the setting")]
    OutcomeKey { order_index: usize, key: String },
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordFile {
    pub schema_version: u32,
    pub n_qubits: u8,
    pub blocks: Vec<BlockEntry>,
    pub metadata: MetadataEntry,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockEntry {
    pub order_index: usize,
    pub setting: Vec<String>,
    pub counts: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MetadataEntry {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub schedule: Option<String>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub drift_sigma: Option<f64>,
    #[serde(default)]
    pub phi0: Option<f64>,
}

fn axis_name(axis: PauliAxis) -> &'static str {
    match axis {
        PauliAxis::X => "X",
        PauliAxis::Y => "Y",
        PauliAxis::Z => "Z",
    }
}

fn parse_axis(name: &str, order_index: usize) -> Result<PauliAxis, IoError> {
    match name {
        "X" => Ok(PauliAxis::X),
        "Y" => Ok(PauliAxis::Y),
        "Z" => Ok(PauliAxis::Z),
        other => Err(IoError::Axis {
            order_index,
            axis: other.to_string(),
        }),
    }
}

fn sign_char(sign: Sign) -> char {
    match sign {
        Sign::Plus => '+',
        Sign::Minus => '\u{2212}',
    }
}

fn parse_sign(c: char) -> Option<Sign> {
    match c {
        '+' => Some(Sign::Plus),
        '-' | '\u{2212}' => Some(Sign::Minus),
        _ => None,
    }
}

fn outcome_key(outcome: Outcome) -> String {
    match outcome {
        Outcome::Single(s) => sign_char(s).to_string(),
        Outcome::Pair(a, b) => format!("{}{}", sign_char(a), sign_char(b)),
    }
}

fn parse_outcome(key: &str, setting: MeasurementSetting, order_index: usize) -> Result<Outcome, IoError> {
    let bad = || IoError::OutcomeKey {
        order_index,
        key: key.to_string(),
    };
    let signs: Vec<Sign> = key.chars().map(parse_sign).collect::<Option<_>>().ok_or_else(bad)?;
    match (setting, signs.as_slice()) {
        (MeasurementSetting::Single(_), &[s]) => Ok(Outcome::Single(s)),
        (MeasurementSetting::Pair(_, _), &[a, b]) => Ok(Outcome::Pair(a, b)),
        _ => Err(bad()),
    }
}

pub fn record_to_file(record: &ExperimentRecord) -> RecordFile {
    let blocks = record
        .blocks()
        .iter()
        .map(|block| {
            let setting = match block.setting() {
                MeasurementSetting::Single(a) => vec![axis_name(a).to_string()],
                MeasurementSetting::Pair(a, b) => {
                    vec![axis_name(a).to_string(), axis_name(b).to_string()]
                }
            };
            let counts = block
                .counts()
                .iter()
                .map(|(&outcome, &n)| (outcome_key(outcome), n))
                .collect();
            BlockEntry {
                order_index: block.order_index(),
                setting,
                counts,
            }
        })
        .collect();
    let meta = record.metadata();
    RecordFile {
        schema_version: SCHEMA_VERSION,
        n_qubits: record.n_qubits(),
        blocks,
        metadata: MetadataEntry {
            seed: meta.seed,
            schedule: meta.schedule.clone(),
            p: meta.p,
            drift_sigma: meta.drift_sigma,
            phi0: meta.phi0,
        },
    }
}

pub fn file_to_record(file: &RecordFile) -> Result<ExperimentRecord, IoError> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(IoError::SchemaVersion {
            got: file.schema_version,
        });
    }
    let mut blocks = Vec::with_capacity(file.blocks.len());
    for entry in &file.blocks {
        let idx = entry.order_index;
        let setting = match entry.setting.as_slice() {
            [a] if file.n_qubits == 1 => MeasurementSetting::Single(parse_axis(a, idx)?),
            [a, b] if file.n_qubits == 2 => {
                MeasurementSetting::Pair(parse_axis(a, idx)?, parse_axis(b, idx)?)
            }
            other => {
                return Err(IoError::SettingArity {
                    order_index: idx,
                    got: other.len(),
                    expected: file.n_qubits,
                })
            }
        };
        let mut counts = BTreeMap::new();
        for (key, &n) in &entry.counts {
            counts.insert(parse_outcome(key, setting, idx)?, n);
        }
        blocks.push(BlockData::new(setting, counts, idx)?);
    }
    let metadata = RecordMetadata {
        seed: file.metadata.seed,
        schedule: file.metadata.schedule.clone(),
        p: file.metadata.p,
        drift_sigma: file.metadata.drift_sigma,
        phi0: file.metadata.phi0,
        notes: None,
    };
    Ok(ExperimentRecord::new(file.n_qubits, blocks, metadata)?)
}

/// Reads a record plus the hex SHA-256 of the raw file bytes.
pub fn read_record(path: &Path) -> Result<(ExperimentRecord, String), IoError> {
    let bytes = fs::read(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let digest = sha2::Sha256::digest(&bytes);
    let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
    let file: RecordFile =
        serde_json::from_slice(&bytes).map_err(|source| IoError::Parse {
            path: path.display().to_string(),
            source,
        })?;
    Ok((file_to_record(&file)?, sha256))
}

pub fn write_record(path: &Path, record: &ExperimentRecord) -> Result<(), IoError> {
    let file = record_to_file(record);
    let body = serde_json::to_string_pretty(&file).expect("record file serializes");
    write_text(path, &(body + "\n"))
}

pub fn write_text(path: &Path, body: &str) -> Result<(), IoError> {
    fs::write(path, body).map_err(|source| IoError::Write {
        path: path.display().to_string(),
        source,
    })
}
