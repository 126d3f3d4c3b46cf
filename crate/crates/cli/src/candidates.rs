//! JSON-lines artifacts: decoded candidate files (with an embedded header
//! carrying the fully resolved configuration), forced-decoding
//! log-likelihood files, and external fluency score files.

use std::path::Path;

use knndiv_core::decode::DecodeConfig;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Header {
    pub version: String,
    pub run_config: RunConfig,
    pub decode_config: DecodeConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HeaderLine {
    header: Header,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypRecord {
    pub tokens: Vec<String>,
    pub logprob: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: usize,
    pub source: String,
    pub padded: bool,
    pub hyps: Vec<HypRecord>,
}

#[derive(Debug, Clone)]
pub struct CandidateFile {
    pub header: Header,
    pub records: Vec<CandidateRecord>,
}

pub fn write_candidates(
    path: &Path,
    header: &Header,
    records: &[CandidateRecord],
) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(
        &serde_json::to_string(&HeaderLine {
            header: header.clone(),
        })
        .map_err(|e| CliError::internal(format!("header serialization: {e}")))?,
    );
    out.push('\n');
    for record in records {
        out.push_str(
            &serde_json::to_string(record)
                .map_err(|e| CliError::internal(format!("record serialization: {e}")))?,
        );
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn read_candidates(path: &Path) -> Result<CandidateFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read candidates {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| CliError::data(format!("{}: empty file", path.display())))?;
    let header: HeaderLine = serde_json::from_str(first)
        .map_err(|e| CliError::data(format!("{}:1: bad header: {e}", path.display())))?;
    let mut records = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let record: CandidateRecord = serde_json::from_str(line).map_err(|e| {
            CliError::data(format!(
                "{}:{}: bad record: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        records.push(record);
    }
    let bad_ids: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(i, r)| *i != r.id)
        .map(|(_, r)| r.id)
        .collect();
    if !bad_ids.is_empty() {
        return Err(CliError::data(format!(
            "{}: records out of order or missing, offending ids {:?}",
            path.display(),
            bad_ids
        )));
    }
    Ok(CandidateFile {
        header: header.header,
        records,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoglikRecord {
    pub id: usize,
    pub loglik: f64,
    pub zero_prob_steps: usize,
}

pub fn write_logliks(
    path: &Path,
    header: &Header,
    records: &[LoglikRecord],
) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(
        &serde_json::to_string(&HeaderLine {
            header: header.clone(),
        })
        .map_err(|e| CliError::internal(format!("header serialization: {e}")))?,
    );
    out.push('\n');
    for record in records {
        out.push_str(&serde_json::to_string(record).unwrap());
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn read_logliks(path: &Path) -> Result<Vec<LoglikRecord>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read log-liks {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() || (lineno == 0 && line.contains("\"header\"")) {
            continue;
        }
        let record: LoglikRecord = serde_json::from_str(line).map_err(|e| {
            CliError::data(format!(
                "{}:{}: bad record: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        records.push(record);
    }
    for (i, r) in records.iter().enumerate() {
        if i != r.id {
            return Err(CliError::data(format!(
                "{}: record {i} has id {}",
                path.display(),
                r.id
            )));
        }
    }
    Ok(records)
}

/// External fluency values: one `{"id", "rank", "score"}` object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: usize,
    pub rank: usize,
    pub score: f64,
}

/// Reads a scores file into a matrix aligned with a candidate matrix of
/// the given shape. Every `(id, rank)` cell must be covered exactly once.
pub fn read_scores(path: &Path, shape: &[usize]) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read scores {}: {e}", path.display())))?;
    let mut matrix: Vec<Vec<Option<f64>>> = shape.iter().map(|&n| vec![None; n]).collect();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let record: ScoreRecord = serde_json::from_str(line).map_err(|e| {
            CliError::data(format!(
                "{}:{}: bad record: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        let row = matrix.get_mut(record.id).ok_or_else(|| {
            CliError::data(format!(
                "{}:{}: id {} out of range",
                path.display(),
                lineno + 1,
                record.id
            ))
        })?;
        let cell = row.get_mut(record.rank).ok_or_else(|| {
            CliError::data(format!(
                "{}:{}: rank {} out of range for id {}",
                path.display(),
                lineno + 1,
                record.rank,
                record.id
            ))
        })?;
        if cell.is_some() {
            return Err(CliError::data(format!(
                "{}: duplicate score for id {} rank {}",
                path.display(),
                record.id,
                record.rank
            )));
        }
        *cell = Some(record.score);
    }
    matrix
        .into_iter()
        .enumerate()
        .map(|(id, row)| {
            row.into_iter()
                .enumerate()
                .map(|(rank, cell)| {
                    cell.ok_or_else(|| {
                        CliError::data(format!("missing score for id {id} rank {rank}"))
                    })
                })
                .collect()
        })
        .collect()
}
