//! Append-only, hash-chained public bulletin board.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{put_bytes, put_u64, Canonical, DecodeError, Reader};
use crate::hash::{self, domain, Digest32};
use crate::logfile::{self, LogError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum EntryKind {
    Pseudonym = 0x01,
    Ballot = 0x02,
    TallyMark = 0x03,
    FinalTally = 0x04,
    CCKeyDisclosure = 0x05,
}

impl EntryKind {
    pub fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            0x01 => EntryKind::Pseudonym,
            0x02 => EntryKind::Ballot,
            0x03 => EntryKind::TallyMark,
            0x04 => EntryKind::FinalTally,
            0x05 => EntryKind::CCKeyDisclosure,
            _ => return None,
        })
    }
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub seq: u64,
    pub kind: EntryKind,
    pub payload: Vec<u8>,
    pub prev_hash: Digest32,
    pub entry_hash: Digest32,
}

impl Entry {
    /// `H(seq ‖ kind ‖ len(payload) ‖ payload ‖ prev_hash)`.
    pub fn compute_hash(seq: u64, kind: EntryKind, payload: &[u8], prev_hash: &Digest32) -> Digest32 {
        let len = (payload.len() as u32).to_be_bytes();
        hash::digest(
            domain::BOARD,
            &[&seq.to_be_bytes(), &[kind as u8], &len, payload, prev_hash],
        )
    }
}

/// `seq (8 BE) ‖ kind ‖ len-prefixed payload ‖ prev_hash ‖ entry_hash`.
impl Canonical for Entry {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u64(out, self.seq);
        out.push(self.kind as u8);
        put_bytes(out, &self.payload);
        out.extend_from_slice(&self.prev_hash);
        out.extend_from_slice(&self.entry_hash);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let seq = r.u64()?;
        let kind_byte = r.u8()?;
        let kind = EntryKind::from_u8(kind_byte)
            .ok_or_else(|| DecodeError::malformed("board entry", format!("kind {kind_byte:#04x}")))?;
        Ok(Entry {
            seq,
            kind,
            payload: r.bytes()?.to_vec(),
            prev_hash: r.array()?,
            entry_hash: r.array()?,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("hash chain broken at entry {seq}: {reason}")]
pub struct ChainError {
    pub seq: u64,
    pub reason: String,
}

/// Checks sequence density, back-links and entry hashes from genesis.
pub fn verify_chain(entries: &[Entry]) -> Result<(), ChainError> {
    let mut prev = [0u8; 32];
    for (i, e) in entries.iter().enumerate() {
        let i = i as u64;
        if e.seq != i {
            return Err(ChainError {
                seq: i,
                reason: format!("sequence number {} out of place", e.seq),
            });
        }
        if e.prev_hash != prev {
            return Err(ChainError {
                seq: i,
                reason: "previous-hash link mismatch".into(),
            });
        }
        if Entry::compute_hash(e.seq, e.kind, &e.payload, &e.prev_hash) != e.entry_hash {
            return Err(ChainError {
                seq: i,
                reason: "entry hash mismatch".into(),
            });
        }
        prev = e.entry_hash;
    }
    Ok(())
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoardError {
    #[error("board transport failed: {0}")]
    Transport(String),
    #[error("board rejected the request: {0}")]
    Rejected(String),
}

/// Write/read access to a bulletin board, in-process or remote.
pub trait Board {
    fn append(&mut self, kind: EntryKind, payload: Vec<u8>) -> Result<u64, BoardError>;
    /// Entries with `from <= seq < to`, truncated at the head.
    fn read_range(&self, from: u64, to: u64) -> Result<BoardSlice, BoardError>;

    fn read_all(&self) -> Result<Vec<Entry>, BoardError> {
        Ok(self.read_range(0, u64::MAX)?.entries)
    }
}

/// Entries in a requested range together with the current head.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoardSlice {
    pub entries: Vec<Entry>,
    /// Sequence number of the last entry, or −1 for an empty board.
    pub head: i64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BulletinBoard {
    entries: Vec<Entry>,
}

impl BulletinBoard {
    pub fn new() -> Self {
        BulletinBoard::default()
    }

    /// Rebuilds a board from stored entries, re-verifying the whole chain.
    pub fn from_entries(entries: Vec<Entry>) -> Result<Self, ChainError> {
        verify_chain(&entries)?;
        Ok(BulletinBoard { entries })
    }

    pub fn push(&mut self, kind: EntryKind, payload: Vec<u8>) -> &Entry {
        let seq = self.entries.len() as u64;
        let prev_hash = self.entries.last().map(|e| e.entry_hash).unwrap_or([0u8; 32]);
        let entry_hash = Entry::compute_hash(seq, kind, &payload, &prev_hash);
        self.entries.push(Entry {
            seq,
            kind,
            payload,
            prev_hash,
            entry_hash,
        });
        self.entries.last().expect("just pushed")
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head(&self) -> i64 {
        self.entries.len() as i64 - 1
    }

    /// Entries with `from <= seq < to`, truncated at the head.
    pub fn read(&self, from: u64, to: u64) -> BoardSlice {
        let len = self.entries.len() as u64;
        let (from, to) = (from.min(len), to.min(len));
        BoardSlice {
            entries: if from < to {
                self.entries[from as usize..to as usize].to_vec()
            } else {
                Vec::new()
            },
            head: self.head(),
        }
    }

    /// The board in the append-only log format, one framed record per entry.
    pub fn export(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for e in &self.entries {
            logfile::frame(&e.to_bytes(), &mut out);
        }
        out
    }

    /// Parses the export format without verifying the chain.
    pub fn parse_export(bytes: &[u8]) -> Result<Vec<Entry>, ExportError> {
        let scan = logfile::scan(bytes)?;
        if scan.torn_tail {
            return Err(ExportError::TornTail(scan.valid_len));
        }
        scan.records
            .iter()
            .enumerate()
            .map(|(i, r)| Entry::from_bytes(r).map_err(|e| ExportError::Entry(i, e)))
            .collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExportError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("incomplete record after byte {0}")]
    TornTail(usize),
    #[error("record {0}: {1}")]
    Entry(usize, DecodeError),
}

impl Board for BulletinBoard {
    fn append(&mut self, kind: EntryKind, payload: Vec<u8>) -> Result<u64, BoardError> {
        Ok(self.push(kind, payload).seq)
    }

    fn read_range(&self, from: u64, to: u64) -> Result<BoardSlice, BoardError> {
        Ok(self.read(from, to))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BulletinBoard {
        let mut b = BulletinBoard::new();
        b.push(EntryKind::Pseudonym, vec![1, 2, 3]);
        b.push(EntryKind::Ballot, vec![4; 40]);
        b.push(EntryKind::TallyMark, vec![]);
        b
    }

    #[test]
    fn chain_verifies_and_links() {
        let b = sample();
        verify_chain(b.entries()).unwrap();
        assert_eq!(b.entries()[0].prev_hash, [0u8; 32]);
        assert_eq!(b.entries()[2].prev_hash, b.entries()[1].entry_hash);
        assert_eq!(b.head(), 2);
    }

    #[test]
    fn tamper_found_at_first_altered_entry() {
        let mut entries = sample().entries().to_vec();
        entries[1].payload[0] ^= 1;
        assert_eq!(verify_chain(&entries).unwrap_err().seq, 1);

        let mut entries = sample().entries().to_vec();
        entries.remove(1);
        assert_eq!(verify_chain(&entries).unwrap_err().seq, 1);
    }

    #[test]
    fn read_ranges() {
        let b = sample();
        let all = b.read(0, u64::MAX);
        assert_eq!(all.entries.len(), 3);
        assert_eq!(all.head, 2);
        let tail = b.read(2, 10);
        assert_eq!(tail.entries.len(), 1);
        let empty = BulletinBoard::new().read(0, 10);
        assert!(empty.entries.is_empty());
        assert_eq!(empty.head, -1);
    }

    #[test]
    fn export_roundtrip() {
        let b = sample();
        let parsed = BulletinBoard::parse_export(&b.export()).unwrap();
        assert_eq!(BulletinBoard::from_entries(parsed).unwrap(), b);
    }
}
