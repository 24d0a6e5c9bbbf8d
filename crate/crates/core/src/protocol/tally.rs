//! Counting and the public audit.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::codec::{put_str, put_u32, put_u64, Canonical, DecodeError, Reader};
use crate::commit::open;
use crate::mqe::{Ciphertext, DecryptionKey};

use super::board::{verify_chain, Entry, EntryKind};
use super::messages::{oblivious_message, BallotContent, TallyMark};
use super::meter::Meter;
use super::params::{Authority, PublicParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[repr(u8)]
pub enum RejectReason {
    Undecryptable = 1,
    Malformed = 2,
    BadSignature = 3,
    BadOpening = 4,
    UnknownCandidate = 5,
    DuplicateCommitment = 6,
}

impl RejectReason {
    pub fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            1 => RejectReason::Undecryptable,
            2 => RejectReason::Malformed,
            3 => RejectReason::BadSignature,
            4 => RejectReason::BadOpening,
            5 => RejectReason::UnknownCandidate,
            6 => RejectReason::DuplicateCommitment,
            _ => return None,
        })
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TallyResult {
    /// Per candidate, in manifest order.
    pub counts: Vec<(String, u64)>,
    pub total_valid: u64,
    /// Board position and reason of every ballot not counted.
    pub rejected: Vec<(u64, RejectReason)>,
}

impl TallyResult {
    pub fn count(&self, candidate: &str) -> Option<u64> {
        self.counts.iter().find(|(c, _)| c == candidate).map(|(_, n)| *n)
    }
}

impl Canonical for TallyResult {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u32(out, self.counts.len() as u32);
        for (c, n) in &self.counts {
            put_str(out, c);
            put_u64(out, *n);
        }
        put_u64(out, self.total_valid);
        put_u32(out, self.rejected.len() as u32);
        for (seq, why) in &self.rejected {
            put_u64(out, *seq);
            out.push(*why as u8);
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let n = r.u32()? as usize;
        let mut counts = Vec::with_capacity(n.min(r.remaining()));
        for _ in 0..n {
            counts.push((r.string()?, r.u64()?));
        }
        let total_valid = r.u64()?;
        let k = r.u32()? as usize;
        let mut rejected = Vec::with_capacity(k.min(r.remaining()));
        for _ in 0..k {
            let seq = r.u64()?;
            let b = r.u8()?;
            let why = RejectReason::from_u8(b).ok_or_else(|| DecodeError::malformed("tally result", format!("reason {b}")))?;
            rejected.push((seq, why));
        }
        Ok(TallyResult {
            counts,
            total_valid,
            rejected,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TallyOutcome {
    pub result: TallyResult,
    pub marks: Vec<TallyMark>,
}

fn check_ballot(payload: &[u8], sk: &DecryptionKey, pp: &PublicParams, meter: &Meter) -> Result<BallotContent, RejectReason> {
    let ct = Ciphertext::from_bytes(payload).map_err(|_| RejectReason::Malformed)?;
    let plain = meter.decrypt(sk, &ct).map_err(|_| RejectReason::Undecryptable)?;
    let content = BallotContent::from_bytes(&plain).map_err(|_| RejectReason::Malformed)?;
    let v = &content.vote;
    let msg = oblivious_message(&content.candidate, &v.commitment);
    if !meter.verify(&msg, &v.signature, &pp.sig[Authority::PollOfficer]) {
        return Err(RejectReason::BadSignature);
    }
    if !open(&content.candidate, &v.commitment, &v.opening) {
        return Err(RejectReason::BadOpening);
    }
    if pp.manifest.candidate_index(&content.candidate).is_none() {
        return Err(RejectReason::UnknownCandidate);
    }
    Ok(content)
}

/// Counts every Ballot entry preceding the first FinalTally.
pub(crate) fn count_ballots(entries: &[Entry], sk: &DecryptionKey, pp: &PublicParams, meter: &Meter) -> TallyOutcome {
    let cands = pp.candidates();
    let mut counts = vec![0u64; cands.len()];
    let mut rejected = Vec::new();
    let mut marks = Vec::new();
    let mut seen = HashSet::new();
    for e in entries {
        if e.kind == EntryKind::FinalTally {
            break;
        }
        if e.kind != EntryKind::Ballot {
            continue;
        }
        match check_ballot(&e.payload, sk, pp, meter) {
            Ok(b) if !seen.insert(b.vote.commitment) => rejected.push((e.seq, RejectReason::DuplicateCommitment)),
            Ok(b) => {
                let j = pp.manifest.candidate_index(&b.candidate).expect("checked");
                counts[j] += 1;
                marks.push(TallyMark {
                    ballot_seq: e.seq,
                    candidate: cands[j].clone(),
                });
            }
            Err(why) => rejected.push((e.seq, why)),
        }
    }
    let total_valid = counts.iter().sum();
    TallyOutcome {
        result: TallyResult {
            counts: cands.iter().cloned().zip(counts).collect(),
            total_valid,
            rejected,
        },
        marks,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AuditVerdict {
    Consistent(TallyResult),
    /// The earliest board entry at which the published record diverges
    /// from what the disclosed key and the ballots imply.
    Discrepancy { seq: u64, detail: String },
}

impl AuditVerdict {
    pub fn is_consistent(&self) -> bool {
        matches!(self, AuditVerdict::Consistent(_))
    }
}

impl fmt::Display for AuditVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuditVerdict::Consistent(r) => {
                write!(f, "consistent:")?;
                for (c, n) in &r.counts {
                    write!(f, " {c}={n}")?;
                }
                write!(f, " (valid {}, rejected {})", r.total_valid, r.rejected.len())
            }
            AuditVerdict::Discrepancy { seq, detail } => write!(f, "discrepancy at entry {seq}: {detail}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuditError {
    #[error("tally not yet public: no Count-Center key disclosure on the board")]
    NotYetPublic,
}

/// Recomputes the tally from the board alone and checks it against every
/// published mark and the final result.
pub fn audit(entries: &[Entry], pp: &PublicParams) -> Result<AuditVerdict, AuditError> {
    if let Err(e) = verify_chain(entries) {
        return Ok(AuditVerdict::Discrepancy {
            seq: e.seq,
            detail: e.reason,
        });
    }
    let disclosure = entries
        .iter()
        .find(|e| e.kind == EntryKind::CCKeyDisclosure)
        .ok_or(AuditError::NotYetPublic)?;
    let sk = match DecryptionKey::from_bytes(&disclosure.payload) {
        Ok(sk) => sk,
        Err(e) => {
            return Ok(AuditVerdict::Discrepancy {
                seq: disclosure.seq,
                detail: format!("disclosed key does not parse: {e}"),
            })
        }
    };
    if sk.encryption_key().ok().as_ref() != Some(&pp.enc[Authority::CountCenter]) {
        return Ok(AuditVerdict::Discrepancy {
            seq: disclosure.seq,
            detail: "disclosed key does not match the Count-Center public key".into(),
        });
    }

    let mut issues: Vec<(u64, String)> = Vec::new();
    let expected = count_ballots(entries, &sk, pp, &Meter::new());
    let valid: HashMap<u64, &str> = expected
        .marks
        .iter()
        .map(|m| (m.ballot_seq, m.candidate.as_str()))
        .collect();

    let mut final_seq = None;
    let mut marked = HashSet::new();
    for e in entries {
        match e.kind {
            EntryKind::Ballot if final_seq.is_some() => issues.push((e.seq, "ballot after the final tally".into())),
            EntryKind::TallyMark => {
                if final_seq.is_some() {
                    issues.push((e.seq, "tally mark after the final tally".into()));
                    continue;
                }
                let m = match TallyMark::from_bytes(&e.payload) {
                    Ok(m) => m,
                    Err(err) => {
                        issues.push((e.seq, format!("tally mark does not parse: {err}")));
                        continue;
                    }
                };
                match valid.get(&m.ballot_seq) {
                    None => issues.push((e.seq, format!("mark for entry {} which is not a valid ballot", m.ballot_seq))),
                    Some(_) if !marked.insert(m.ballot_seq) => {
                        issues.push((e.seq, format!("second mark for entry {}", m.ballot_seq)))
                    }
                    Some(c) if *c != m.candidate => issues.push((
                        e.seq,
                        format!("mark for entry {} names {:?}, ballot is for {c:?}", m.ballot_seq, m.candidate),
                    )),
                    Some(_) => {}
                }
            }
            EntryKind::FinalTally => {
                if final_seq.is_some() {
                    issues.push((e.seq, "second final tally".into()));
                    continue;
                }
                final_seq = Some(e.seq);
                match TallyResult::from_bytes(&e.payload) {
                    Ok(r) if r == expected.result => {}
                    Ok(r) => issues.push((e.seq, describe_mismatch(&r, &expected.result))),
                    Err(err) => issues.push((e.seq, format!("final tally does not parse: {err}"))),
                }
            }
            _ => {}
        }
    }
    for m in &expected.marks {
        if !marked.contains(&m.ballot_seq) {
            issues.push((m.ballot_seq, "valid ballot has no tally mark".into()));
        }
    }
    if final_seq.is_none() {
        issues.push((disclosure.seq, "key disclosed without a final tally".into()));
    }
    Ok(match issues.into_iter().min_by_key(|(s, _)| *s) {
        Some((seq, detail)) => AuditVerdict::Discrepancy { seq, detail },
        None => AuditVerdict::Consistent(expected.result),
    })
}

fn describe_mismatch(published: &TallyResult, recomputed: &TallyResult) -> String {
    for ((c, p), (_, r)) in published.counts.iter().zip(&recomputed.counts) {
        if p != r {
            return format!("published {c}={p}, recomputed {r}");
        }
    }
    if published.total_valid != recomputed.total_valid {
        return format!(
            "published {} valid ballots, recomputed {}",
            published.total_valid, recomputed.total_valid
        );
    }
    "published result differs from the recomputed one".into()
}
