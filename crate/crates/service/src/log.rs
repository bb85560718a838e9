//! Append-only JSON-lines session logs.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperationKind {
    Create,
    Phase1,
    Phase2,
    Phase3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLogRecord {
    pub seq: u64,
    pub timestamp_ms: u64,
    pub kind: OperationKind,
    /// ρ charged by this operation.
    pub rho: f64,
    pub request: Value,
    pub request_digest: String,
    pub response_digest: String,
}

/// Hex SHA-256 of a serialized document.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug)]
pub(crate) struct SessionLog {
    file: Option<File>,
    next_seq: u64,
}

impl SessionLog {
    pub(crate) fn memory() -> Self {
        Self {
            file: None,
            next_seq: 0,
        }
    }

    pub(crate) fn create(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().append(true).create_new(true).open(path)?;
        Ok(Self {
            file: Some(file),
            next_seq: 0,
        })
    }

    pub(crate) fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Writes one record and syncs it before returning.
    pub(crate) fn append(&mut self, record: &SessionLogRecord) -> std::io::Result<()> {
        debug_assert_eq!(record.seq, self.next_seq);
        if let Some(f) = &mut self.file {
            let mut line = serde_json::to_vec(record).map_err(std::io::Error::other)?;
            line.push(b'\n');
            f.write_all(&line)?;
            f.sync_data()?;
        }
        self.next_seq += 1;
        Ok(())
    }
}

/// Reads every complete record of a log. A final line without its newline
/// is a write torn by a crash; it is cut off the file and ignored.
pub(crate) fn read_log(path: &Path) -> std::io::Result<(Vec<SessionLogRecord>, SessionLog)> {
    let mut file = OpenOptions::new().read(true).append(true).open(path)?;
    let mut records = Vec::new();
    let mut good = 0u64;
    {
        let mut reader = BufReader::new(&mut file);
        let mut line = String::new();
        loop {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 || !line.ends_with('\n') {
                break;
            }
            let record: SessionLogRecord = serde_json::from_str(line.trim_end())
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            records.push(record);
            good += n as u64;
        }
    }
    if file.metadata()?.len() != good {
        tracing::warn!(path = %path.display(), "dropping torn final log record");
        file.set_len(good)?;
        file.seek(SeekFrom::End(0))?;
    }
    let next_seq = records.len() as u64;
    Ok((
        records,
        SessionLog {
            file: Some(file),
            next_seq,
        },
    ))
}

pub(crate) fn session_path(root: &Path, id: &str) -> PathBuf {
    root.join("sessions").join(format!("{id}.jsonl"))
}
