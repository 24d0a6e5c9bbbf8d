//! Driving the roles: the voting round, forwarding, and deployments.
//!
//! A [`Deployment`] is the set of authority endpoints a voter and the
//! election operator talk to. [`InProcess`] holds the roles in memory; the
//! service crate provides one that speaks to live TCP endpoints. Because role
//! signing randomness is derived from the signed bytes, both produce the same
//! bulletin board for the same seed.

use std::collections::HashSet;
use std::sync::Arc;

use crate::codec::Canonical;
use crate::commit::Commitment;
use crate::field::FieldVector;
use crate::hash::Digest32;
use crate::mqe::Ciphertext;
use crate::mqs::{self, Signature};

use super::board::{BoardError, BulletinBoard, Entry, EntryKind};
use super::messages::{receipt_digest, ObliviousBundle, SessionId, Ticket};
use super::meter::Meter;
use super::params::{role_seed, Authority, PublicParams, RoleSecrets};
use super::roles::{CountCenter, PollOfficer, RegCenter, VotCenter, Voter};
use super::tally::TallyResult;
use super::{RegError, TallyError, VcError, VoteError};

pub trait Deployment {
    /// Sets the authorities' clock. Deployments on real clocks may refuse.
    fn set_time(&mut self, now: u64) -> Result<(), BoardError>;
    fn register(&mut self, id: &str, pseudonym: &FieldVector) -> Result<Ticket, RegError>;
    fn submit_ticket(&mut self, et: &Ciphertext) -> Result<SessionId, VoteError>;
    fn submit_commitment(&mut self, session: SessionId, c: Commitment) -> Result<ObliviousBundle, VoteError>;
    fn cast(&mut self, session: SessionId, ev: &Ciphertext) -> Result<Signature, VoteError>;
    /// PO hands every unacknowledged `EV_u` to VC; returns VC's receipts.
    fn forward_pending(&mut self) -> Result<Vec<(Digest32, Signature)>, VcError>;
    /// VC verifies and publishes its pending ballots, except `withhold`.
    fn publish_pending(&mut self, withhold: &HashSet<Digest32>) -> Result<Vec<(Digest32, Result<u64, VcError>)>, VcError>;
    /// CC tallies and publishes. `inflate` adds to one candidate's published
    /// count, modelling a dishonest Count-Center.
    fn run_tally(&mut self, inflate: Option<(&str, u64)>) -> Result<TallyResult, TallyError>;
    fn board(&self) -> Result<Vec<Entry>, BoardError>;
    /// Everything PO, VC and CC hold, concatenated; `None` if the
    /// deployment cannot see inside the authorities.
    fn authority_dump(&self) -> Option<Vec<u8>>;
}

/// All roles and the board in one process.
pub struct InProcess {
    pub pp: Arc<PublicParams>,
    pub meter: Arc<Meter>,
    pub rc: RegCenter,
    pub po: PollOfficer,
    pub vc: VotCenter,
    pub cc: CountCenter,
    pub board: BulletinBoard,
    pub now: u64,
}

impl InProcess {
    pub fn new(pp: Arc<PublicParams>, secrets: &RoleSecrets, roll: Vec<String>, seed: u64, meter: Arc<Meter>) -> Self {
        let keys = |a: Authority| secrets[a].clone();
        InProcess {
            rc: RegCenter::new(pp.clone(), keys(Authority::RegCenter), roll, role_seed(seed, "rc"), meter.clone()),
            po: PollOfficer::new(pp.clone(), keys(Authority::PollOfficer), role_seed(seed, "po"), meter.clone()),
            vc: VotCenter::new(pp.clone(), keys(Authority::VotCenter), role_seed(seed, "vc"), meter.clone()),
            cc: CountCenter::new(pp.clone(), keys(Authority::CountCenter), meter.clone()),
            board: BulletinBoard::new(),
            now: pp.manifest.registration.start,
            pp,
            meter,
        }
    }
}

impl Deployment for InProcess {
    fn set_time(&mut self, now: u64) -> Result<(), BoardError> {
        self.now = now;
        Ok(())
    }

    fn register(&mut self, id: &str, pseudonym: &FieldVector) -> Result<Ticket, RegError> {
        self.rc.register(id, pseudonym, self.now, &mut self.board)
    }

    fn submit_ticket(&mut self, et: &Ciphertext) -> Result<SessionId, VoteError> {
        self.po.open_session(et, self.now)
    }

    fn submit_commitment(&mut self, session: SessionId, c: Commitment) -> Result<ObliviousBundle, VoteError> {
        self.po.sign_bundle(session, c)
    }

    fn cast(&mut self, session: SessionId, ev: &Ciphertext) -> Result<Signature, VoteError> {
        self.po.accept_cast(session, ev)
    }

    fn forward_pending(&mut self) -> Result<Vec<(Digest32, Signature)>, VcError> {
        po_forward_batch(&mut self.po, &mut self.vc)
    }

    fn publish_pending(&mut self, withhold: &HashSet<Digest32>) -> Result<Vec<(Digest32, Result<u64, VcError>)>, VcError> {
        Ok(self.vc.publish_pending(self.now, &mut self.board, withhold))
    }

    fn run_tally(&mut self, inflate: Option<(&str, u64)>) -> Result<TallyResult, TallyError> {
        let outcome = self.cc.tally(self.board.entries(), self.now)?;
        let published = inflated(&outcome.result, inflate);
        self.cc.publish(&outcome, &published, &mut self.board)?;
        Ok(published)
    }

    fn board(&self) -> Result<Vec<Entry>, BoardError> {
        Ok(self.board.entries().to_vec())
    }

    fn authority_dump(&self) -> Option<Vec<u8>> {
        let mut out = Vec::new();
        for e in self.po.journal().iter().chain(self.vc.journal()) {
            e.encode(&mut out);
        }
        out.extend_from_slice(&self.cc.secret_bytes());
        out.extend_from_slice(&self.board.export());
        Some(out)
    }
}

/// The result a Count-Center publishes when it adds `delta` to `candidate`.
pub fn inflated(result: &TallyResult, inflate: Option<(&str, u64)>) -> TallyResult {
    let mut r = result.clone();
    if let Some((cand, delta)) = inflate {
        for (c, n) in r.counts.iter_mut() {
            if c == cand {
                *n += delta;
                r.total_valid += delta;
            }
        }
    }
    r
}

/// Steps 1–7 of the voting phase for one voter.
pub fn voting_round(
    voter: &mut Voter,
    dep: &mut dyn Deployment,
    choice: usize,
    now: u64,
) -> Result<(Ciphertext, Signature), VoteError> {
    if choice >= voter.candidate_count() {
        return Err(VoteError::InvalidChoice);
    }
    let et = voter.present_ticket(now)?;
    let session = dep.submit_ticket(&et)?;
    let c = voter.commit_to(choice)?;
    let bundle = dep.submit_commitment(session, c)?;
    let ev = voter.receive_bundle(&bundle)?;
    let receipt = dep.cast(session, &ev)?;
    voter.accept_receipt(receipt.clone());
    Ok((ev, receipt))
}

/// PO transmits each stored `EV_u`; VC answers with a receipt over `H(EV_u)`.
pub fn po_forward_batch(po: &mut PollOfficer, vc: &mut VotCenter) -> Result<Vec<(Digest32, Signature)>, VcError> {
    let mut out = Vec::new();
    for ev in po.pending_forward() {
        let r = vc.receive(&ev)?;
        po.record_forward(&ev, r.clone());
        out.push((receipt_digest(&ev), r));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoardCheck {
    Found(u64),
    Missing,
}

/// Looks for the voter's `B_j^u` among the Ballot entries, byte for byte.
pub fn voter_check_board(ballot: &Ciphertext, entries: &[Entry]) -> BoardCheck {
    let bytes = ballot.to_bytes();
    entries
        .iter()
        .find(|e| e.kind == EntryKind::Ballot && e.payload == bytes)
        .map_or(BoardCheck::Missing, |e| BoardCheck::Found(e.seq))
}

/// What a voter presents when their ballot never reached the board: the
/// cast `EV_u`, the ballot inside it, and the Poll-Officer's receipt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WithholdingEvidence {
    pub ev: Ciphertext,
    pub ballot: Ciphertext,
    pub receipt: Signature,
}

impl WithholdingEvidence {
    pub fn from_voter(voter: &Voter) -> Option<Self> {
        Some(WithholdingEvidence {
            ev: voter.cast_ballot()?.clone(),
            ballot: voter.ballot()?.clone(),
            receipt: voter.receipt()?.clone(),
        })
    }

    /// The receipt verifies under the Poll-Officer's key and the ballot is
    /// absent from the board.
    pub fn holds(&self, pp: &PublicParams, entries: &[Entry]) -> bool {
        let receipt_ok = mqs::verify(&receipt_digest(&self.ev), &self.receipt, &pp.sig[Authority::PollOfficer]);
        receipt_ok && voter_check_board(&self.ballot, entries) == BoardCheck::Missing
    }
}
