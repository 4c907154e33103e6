//! Line-delimited trial record files.
//!
//! The first line is a JSON header holding the exact trial configuration.
//! Every following line is one robot after one round:
//!
//! ```text
//! {"round":1,"robot":0,"n":6,"t":10,"local":0.7,"alpha":52.1,"social":0.5,"beta":90.3,"informed":0.57}
//! ```
//!
//! `round` is 1-based; rows are ordered by round, then robot.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::SimError;
use crate::metrics::{RobotSnapshot, TrialConfig, TrialRecord};

pub const RECORD_FORMAT: &str = "swarm-perception-record/1";

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Shape(#[from] SimError),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    rounds: usize,
    robots: usize,
    config: TrialConfig,
}

/// Key columns plus the seven per-robot quantities.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Row {
    round: usize,
    robot: usize,
    n: u64,
    t: u64,
    local: f64,
    alpha: f64,
    social: f64,
    beta: f64,
    informed: f64,
}

/// Column names of a record row, in order.
pub const ROW_COLUMNS: [&str; 9] = ["round", "robot", "n", "t", "local", "alpha", "social", "beta", "informed"];

pub fn write_record<W: Write>(record: &TrialRecord, out: &mut W) -> std::io::Result<()> {
    let header = Header {
        format: RECORD_FORMAT.to_string(),
        rounds: record.rounds(),
        robots: record.n_robots(),
        config: record.config().clone(),
    };
    serde_json::to_writer(&mut *out, &header)?;
    out.write_all(b"\n")?;
    for (r, row) in record.snapshots().iter().enumerate() {
        for (robot, s) in row.iter().enumerate() {
            let line = Row {
                round: r + 1,
                robot,
                n: s.black,
                t: s.total,
                local: s.local,
                alpha: s.local_confidence,
                social: s.social,
                beta: s.social_confidence,
                informed: s.informed,
            };
            serde_json::to_writer(&mut *out, &line)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn record_to_bytes(record: &TrialRecord) -> Vec<u8> {
    let mut buf = Vec::new();
    write_record(record, &mut buf).expect("writing to memory cannot fail");
    buf
}

pub fn read_record<R: BufRead>(input: R) -> Result<TrialRecord, RecordError> {
    let malformed = |line: usize, message: String| RecordError::Malformed { line, message };
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| malformed(1, "empty file".into()))??;
    let header: Header = serde_json::from_str(&first).map_err(|e| malformed(1, e.to_string()))?;
    if header.format != RECORD_FORMAT {
        return Err(malformed(1, format!("unsupported format `{}`", header.format)));
    }
    let mut snapshots: Vec<Vec<RobotSnapshot>> = Vec::with_capacity(header.rounds);
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        let row: Row = serde_json::from_str(&line).map_err(|e| malformed(line_no, e.to_string()))?;
        let expected_round = idx / header.robots.max(1) + 1;
        let expected_robot = idx % header.robots.max(1);
        if row.round != expected_round || row.robot != expected_robot {
            return Err(malformed(
                line_no,
                format!(
                    "expected round {expected_round} robot {expected_robot}, found round {} robot {}",
                    row.round, row.robot
                ),
            ));
        }
        if row.robot == 0 {
            snapshots.push(Vec::with_capacity(header.robots));
        }
        snapshots.last_mut().expect("row 0 opens a round").push(RobotSnapshot {
            black: row.n,
            total: row.t,
            local: row.local,
            local_confidence: row.alpha,
            social: row.social,
            social_confidence: row.beta,
            informed: row.informed,
        });
    }
    if snapshots.len() != header.rounds || snapshots.last().is_some_and(|r| r.len() != header.robots) {
        return Err(malformed(0, "record is truncated".into()));
    }
    Ok(TrialRecord::new(header.config, snapshots)?)
}
