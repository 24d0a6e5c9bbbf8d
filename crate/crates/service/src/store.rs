//! One append-only log file per role.
//!
//! Opening a store replays every complete record. A torn final frame is cut
//! off; a record whose digest does not match stops the open.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use evot_core::logfile::{self, LogError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: corrupt record {index} at byte {offset} (starts {preview})")]
    Corrupt {
        path: PathBuf,
        index: usize,
        offset: usize,
        preview: String,
    },
    #[error("{path}: {detail}")]
    Content { path: PathBuf, detail: String },
}

pub struct Store {
    path: PathBuf,
    file: File,
    len: u64,
}

pub struct Opened {
    pub store: Store,
    pub records: Vec<Vec<u8>>,
    /// Bytes of a torn final frame that were discarded.
    pub discarded: u64,
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Opened, StoreError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io_err)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(io_err)?;
        let scan = logfile::scan(&bytes).map_err(|LogError::Corrupt { index, offset }| {
            let preview: String = bytes[offset..].iter().take(16).map(|b| format!("{b:02x}")).collect();
            StoreError::Corrupt {
                path: path.clone(),
                index,
                offset,
                preview,
            }
        })?;
        let discarded = (bytes.len() - scan.valid_len) as u64;
        if scan.torn_tail {
            file.set_len(scan.valid_len as u64).map_err(io_err)?;
            file.sync_all().map_err(io_err)?;
        }
        Ok(Opened {
            store: Store {
                path,
                file,
                len: scan.valid_len as u64,
            },
            records: scan.records,
            discarded,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends the records in one write and syncs before returning.
    pub fn append<R: AsRef<[u8]>>(&mut self, records: &[R]) -> Result<(), StoreError> {
        if records.is_empty() {
            return Ok(());
        }
        let mut buf = Vec::new();
        for r in records {
            logfile::frame(r.as_ref(), &mut buf);
        }
        let res = self.file.write_all(&buf).and_then(|_| self.file.sync_data());
        if let Err(source) = res {
            // drop whatever part of the write landed
            let _ = self.file.set_len(self.len);
            return Err(StoreError::Io {
                path: self.path.clone(),
                source,
            });
        }
        self.len += buf.len() as u64;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torn_tail_is_dropped_and_appends_continue() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log");
        let mut s = Store::open(&p).unwrap().store;
        s.append(&[b"a".as_slice(), b"bb"]).unwrap();
        drop(s);
        let mut f = OpenOptions::new().append(true).open(&p).unwrap();
        f.write_all(&[0, 0, 0, 9, 1, 2]).unwrap();
        drop(f);

        let o = Store::open(&p).unwrap();
        assert_eq!(o.records, vec![b"a".to_vec(), b"bb".to_vec()]);
        assert_eq!(o.discarded, 6);
        let mut s = o.store;
        s.append(&[b"ccc"]).unwrap();
        drop(s);
        assert_eq!(Store::open(&p).unwrap().records.len(), 3);
    }

    #[test]
    fn corrupt_record_refuses_to_open() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log");
        let mut s = Store::open(&p).unwrap().store;
        s.append(&[b"first".as_slice(), b"second"]).unwrap();
        drop(s);
        let mut bytes = std::fs::read(&p).unwrap();
        let n = bytes.len();
        // last payload byte of the second record
        bytes[n - 33] ^= 0xFF;
        std::fs::write(&p, &bytes).unwrap();
        match Store::open(&p) {
            Err(StoreError::Corrupt { index: 1, .. }) => {}
            other => panic!("expected corruption, got {:?}", other.err()),
        }
    }
}
