//! Sweep execution, manifests and offline analysis.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::config::{ConfigError, Job, SweepSpec};
use super::records::{read_record, record_to_bytes, RecordError};
use crate::metrics::{aggregate, MetricsError, Summary, TrialConfig, TrialDigest, TrialRecord};
use crate::sim_dynamic::run_dynamic_trial;
use crate::sim_static::run_static_trial;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.tsv";
pub const CONSENSUS_FILE: &str = "consensus.tsv";
pub const RECORDS_DIR: &str = "records";
pub const MANIFEST_FORMAT: &str = "swarm-perception-manifest/1";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("building thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("aggregating results: {0}")]
    Metrics(#[from] MetricsError),
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("record {path} is missing")]
    MissingRecord { path: PathBuf },
    #[error("record {path} failed its integrity check: expected sha256 {expected}, found {found}")]
    Integrity {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("record {path} is corrupt: {source}")]
    CorruptRecord {
        path: PathBuf,
        #[source]
        source: RecordError,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SweepError + '_ {
    move |source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    pub status: RunStatus,
    /// Relative to the sweep directory; absent for failed runs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    /// The resolved sweep, including the base seed actually used.
    pub spec: SweepSpec,
    pub total_runs: usize,
    pub failed_runs: usize,
    pub records: Vec<ManifestEntry>,
    pub outputs: Vec<FileHash>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self, SweepError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| SweepError::Manifest {
            path,
            message: e.to_string(),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn run_trial(config: &TrialConfig) -> Result<TrialRecord, crate::SimError> {
    match config {
        TrialConfig::Static(c) => run_static_trial(c),
        TrialConfig::Dynamic(c) => run_dynamic_trial(c),
    }
}

pub fn record_file_name(cell: usize, trial: usize) -> String {
    format!("{RECORDS_DIR}/cell{cell:04}-trial{trial:03}.jsonl")
}

fn execute(job: &Job, out_dir: &Path) -> Result<(ManifestEntry, Option<TrialDigest>), SweepError> {
    let seed = job.config.seed();
    match run_trial(&job.config) {
        Ok(record) => {
            let bytes = record_to_bytes(&record);
            let rel = record_file_name(job.cell, job.trial);
            let path = out_dir.join(&rel);
            fs::write(&path, &bytes).map_err(io_err(&path))?;
            let entry = ManifestEntry {
                cell: job.cell,
                trial: job.trial,
                seed,
                status: RunStatus::Ok,
                path: Some(rel),
                sha256: Some(sha256_hex(&bytes)),
                error: None,
            };
            Ok((entry, Some(record.digest())))
        }
        Err(e) => Ok((
            ManifestEntry {
                cell: job.cell,
                trial: job.trial,
                seed,
                status: RunStatus::Failed,
                path: None,
                sha256: None,
                error: Some(e.to_string()),
            },
            None,
        )),
    }
}

fn write_hashed(dir: &Path, name: &str, contents: &str) -> Result<FileHash, SweepError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io_err(&path))?;
    Ok(FileHash {
        path: name.to_string(),
        sha256: sha256_hex(contents.as_bytes()),
    })
}

fn write_summary(dir: &Path, summary: &Summary) -> Result<Vec<FileHash>, SweepError> {
    Ok(vec![
        write_hashed(dir, SUMMARY_FILE, &summary.to_tsv())?,
        write_hashed(dir, CONSENSUS_FILE, &summary.consensus_tsv())?,
    ])
}

/// Runs every (cell, trial) of `spec` on `parallelism` worker threads and
/// writes records, summary tables and a manifest into `out_dir`. Output
/// bytes depend only on the spec.
pub fn run_sweep(spec: &SweepSpec, out_dir: &Path, parallelism: usize) -> Result<Manifest, SweepError> {
    spec.validate()?;
    let jobs = spec.jobs()?;
    let records_dir = out_dir.join(RECORDS_DIR);
    fs::create_dir_all(&records_dir).map_err(io_err(&records_dir))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()?;
    let outcomes = pool.install(|| {
        jobs.par_iter()
            .map(|job| execute(job, out_dir))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut entries = Vec::with_capacity(outcomes.len());
    let mut digests = Vec::with_capacity(outcomes.len());
    for (entry, digest) in outcomes {
        entries.push(entry);
        digests.extend(digest);
    }
    let summary = aggregate(&digests)?;
    let outputs = write_summary(out_dir, &summary)?;

    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        spec: spec.clone(),
        total_runs: entries.len(),
        failed_runs: entries.iter().filter(|e| e.status == RunStatus::Failed).count(),
        records: entries,
        outputs,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Reads one record listed in a manifest, checking its hash first.
pub fn load_verified(result_dir: &Path, entry: &ManifestEntry) -> Result<TrialRecord, SweepError> {
    let (Some(rel), Some(expected)) = (&entry.path, &entry.sha256) else {
        return Err(SweepError::Manifest {
            path: result_dir.join(MANIFEST_FILE),
            message: format!("entry for cell {} trial {} has no file", entry.cell, entry.trial),
        });
    };
    let path = result_dir.join(rel);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(SweepError::MissingRecord { path }),
        Err(e) => return Err(SweepError::Io { path, source: e }),
    };
    let found = sha256_hex(&bytes);
    if &found != expected {
        return Err(SweepError::Integrity {
            path,
            expected: expected.clone(),
            found,
        });
    }
    read_record(BufReader::new(bytes.as_slice())).map_err(|source| SweepError::CorruptRecord { path, source })
}

/// Re-derives the summary tables of a sweep directory from its records.
pub fn analyze(result_dir: &Path, out_dir: &Path) -> Result<Summary, SweepError> {
    let manifest = Manifest::read(result_dir)?;
    let ok: Vec<&ManifestEntry> = manifest
        .records
        .iter()
        .filter(|e| e.status == RunStatus::Ok)
        .collect();
    let digests = ok
        .par_iter()
        .map(|entry| load_verified(result_dir, entry).map(|r| r.digest()))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = aggregate(&digests)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_summary(out_dir, &summary)?;
    Ok(summary)
}
