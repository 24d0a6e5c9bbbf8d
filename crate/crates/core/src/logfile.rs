//! Append-only record log.
//!
//! Each record is framed as `len (4 bytes, BE) ‖ record ‖ SHA3-256(record)`.
//! A frame cut short at the end of the file is a torn write and is dropped;
//! a complete frame whose digest does not match is corruption. A damaged
//! length prefix that points past the end of the file is indistinguishable
//! from a torn write.

use sha3::{Digest, Sha3_256};
use thiserror::Error;

pub const DIGEST_LEN: usize = 32;

pub fn record_digest(record: &[u8]) -> [u8; DIGEST_LEN] {
    Sha3_256::digest(record).into()
}

pub fn frame(record: &[u8], out: &mut Vec<u8>) {
    out.extend_from_slice(&(record.len() as u32).to_be_bytes());
    out.extend_from_slice(record);
    out.extend_from_slice(&record_digest(record));
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogError {
    #[error("record {index} at byte {offset}: digest mismatch")]
    Corrupt { index: usize, offset: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogScan {
    pub records: Vec<Vec<u8>>,
    /// Bytes covered by complete records.
    pub valid_len: usize,
    /// A partial frame followed the last complete record.
    pub torn_tail: bool,
}

pub fn scan(bytes: &[u8]) -> Result<LogScan, LogError> {
    let mut records = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let rest = &bytes[pos..];
        if rest.len() < 4 {
            break;
        }
        let len = u32::from_be_bytes(rest[..4].try_into().unwrap()) as usize;
        let Some(total) = len.checked_add(4 + DIGEST_LEN) else { break };
        if rest.len() < total {
            break;
        }
        let record = &rest[4..4 + len];
        if rest[4 + len..total] != record_digest(record) {
            return Err(LogError::Corrupt {
                index: records.len(),
                offset: pos,
            });
        }
        records.push(record.to_vec());
        pos += total;
    }
    Ok(LogScan {
        records,
        valid_len: pos,
        torn_tail: pos < bytes.len(),
    })
}
