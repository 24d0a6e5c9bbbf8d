//! Role state machines.
//!
//! Every state transition of the Reg-Center, Poll-Officer and Vot-Center is
//! expressed as a [`RoleEvent`]: the live operation computes the event, then
//! applies it. A role rebuilt from its journal with [`restore`] is therefore
//! in exactly the state it reached live. Signing randomness is derived from
//! the role's secret seed and the signed bytes, so a restarted role re-issues
//! identical signatures.
//!
//! [`restore`]: RegCenter::restore

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::codec::{put_str, Canonical, DecodeError, Reader};
use crate::commit::{comm, Commitment, Opening};
use crate::field::FieldVector;
use crate::hash::{self, domain, Digest32};
use crate::mqe::Ciphertext;
use crate::mqs::Signature;

use super::board::{Board, Entry, EntryKind};
use super::messages::{
    oblivious_message, pseudonym_message, receipt_digest, BallotContent, CastContent, ObliviousBundle, SessionId,
    Ticket, TicketPresentation, Vote,
};
use super::meter::Meter;
use super::params::{Authority, AuthorityKeys, PublicParams};
use super::tally::{count_ballots, TallyOutcome, TallyResult};
use super::{RegError, TallyError, VcError, VoteError, FRESHNESS_WINDOW};

fn op_rng(seed: &[u8; 32], purpose: &str, msg: &[u8]) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(hash::digest(domain::SEED, &[seed, purpose.as_bytes(), msg]))
}

/// One durable state transition of an authority.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RoleEvent {
    /// RC certified `pseudonym` for `id`.
    Issued { id: String, pseudonym: FieldVector },
    /// PO accepted a ticket and opened a session.
    SessionOpened { session: SessionId, pseudonym: FieldVector },
    /// PO signed the oblivious bundle for commitment `c`.
    BundleSigned { session: SessionId, commitment: Commitment },
    /// PO accepted `EV_u` and issued a receipt.
    BallotCast { session: SessionId, ev: Ciphertext, receipt: Signature },
    /// PO obtained VC's receipt for the cast ballot with this digest.
    Forwarded { digest: Digest32, receipt: Signature },
    /// VC received `EV_u` and issued a receipt.
    Received { ev: Ciphertext, receipt: Signature },
    /// VC verified and published a ballot at board position `seq`.
    Published { digest: Digest32, content: CastContent, seq: u64 },
    /// VC refused a received ballot.
    Rejected { digest: Digest32, code: u8 },
}

impl Canonical for RoleEvent {
    fn encode(&self, out: &mut Vec<u8>) {
        match self {
            RoleEvent::Issued { id, pseudonym } => {
                out.push(1);
                put_str(out, id);
                pseudonym.encode(out);
            }
            RoleEvent::SessionOpened { session, pseudonym } => {
                out.push(2);
                session.encode(out);
                pseudonym.encode(out);
            }
            RoleEvent::BundleSigned { session, commitment } => {
                out.push(3);
                session.encode(out);
                out.extend_from_slice(&commitment.0);
            }
            RoleEvent::BallotCast { session, ev, receipt } => {
                out.push(4);
                session.encode(out);
                ev.encode(out);
                receipt.encode(out);
            }
            RoleEvent::Forwarded { digest, receipt } => {
                out.push(5);
                out.extend_from_slice(digest);
                receipt.encode(out);
            }
            RoleEvent::Received { ev, receipt } => {
                out.push(6);
                ev.encode(out);
                receipt.encode(out);
            }
            RoleEvent::Published { digest, content, seq } => {
                out.push(7);
                out.extend_from_slice(digest);
                content.encode(out);
                out.extend_from_slice(&seq.to_be_bytes());
            }
            RoleEvent::Rejected { digest, code } => {
                out.push(8);
                out.extend_from_slice(digest);
                out.push(*code);
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.u8()? {
            1 => RoleEvent::Issued {
                id: r.string()?,
                pseudonym: FieldVector::decode(r)?,
            },
            2 => RoleEvent::SessionOpened {
                session: SessionId::decode(r)?,
                pseudonym: FieldVector::decode(r)?,
            },
            3 => RoleEvent::BundleSigned {
                session: SessionId::decode(r)?,
                commitment: Commitment(r.array()?),
            },
            4 => RoleEvent::BallotCast {
                session: SessionId::decode(r)?,
                ev: Ciphertext::decode(r)?,
                receipt: Signature::decode(r)?,
            },
            5 => RoleEvent::Forwarded {
                digest: r.array()?,
                receipt: Signature::decode(r)?,
            },
            6 => RoleEvent::Received {
                ev: Ciphertext::decode(r)?,
                receipt: Signature::decode(r)?,
            },
            7 => RoleEvent::Published {
                digest: r.array()?,
                content: CastContent::decode(r)?,
                seq: r.u64()?,
            },
            8 => RoleEvent::Rejected {
                digest: r.array()?,
                code: r.u8()?,
            },
            t => return Err(DecodeError::malformed("role event", format!("tag {t}"))),
        })
    }
}

/// Journal bookkeeping shared by the stateful roles.
#[derive(Debug, Default)]
struct Journal {
    events: Vec<RoleEvent>,
    saved: usize,
}

impl Journal {
    fn record(&mut self, e: RoleEvent) {
        self.events.push(e);
    }

    fn take_unsaved(&mut self) -> Vec<RoleEvent> {
        let new = self.events[self.saved..].to_vec();
        self.saved = self.events.len();
        new
    }

    fn restored(events: Vec<RoleEvent>) -> Self {
        let saved = events.len();
        Journal { events, saved }
    }
}

fn unexpected(role: &str, e: &RoleEvent) -> DecodeError {
    DecodeError::malformed("role journal", format!("{role} cannot replay {e:?}"))
}

pub struct RegCenter {
    pp: Arc<PublicParams>,
    keys: AuthorityKeys,
    seed: [u8; 32],
    meter: Arc<Meter>,
    roll: HashSet<String>,
    issued: HashMap<String, FieldVector>,
    pseudonyms: HashSet<FieldVector>,
    journal: Journal,
}

impl RegCenter {
    pub fn new(
        pp: Arc<PublicParams>,
        keys: AuthorityKeys,
        roll: impl IntoIterator<Item = String>,
        seed: [u8; 32],
        meter: Arc<Meter>,
    ) -> Self {
        RegCenter {
            pp,
            keys,
            seed,
            meter,
            roll: roll.into_iter().collect(),
            issued: HashMap::new(),
            pseudonyms: HashSet::new(),
            journal: Journal::default(),
        }
    }

    pub fn restore(mut self, events: Vec<RoleEvent>) -> Result<Self, DecodeError> {
        for e in &events {
            self.apply(e).map_err(|_| unexpected("Reg-Center", e))?;
        }
        self.journal = Journal::restored(events);
        Ok(self)
    }

    fn apply(&mut self, e: &RoleEvent) -> Result<(), ()> {
        match e {
            RoleEvent::Issued { id, pseudonym } => {
                self.issued.insert(id.clone(), pseudonym.clone());
                self.pseudonyms.insert(pseudonym.clone());
                Ok(())
            }
            _ => Err(()),
        }
    }

    pub fn take_events(&mut self) -> Vec<RoleEvent> {
        self.journal.take_unsaved()
    }

    pub fn issued_count(&self) -> usize {
        self.issued.len()
    }

    /// Checks eligibility, signs `v_p` and publishes it on the board.
    pub fn register(&mut self, id: &str, pseudonym: &FieldVector, now: u64, board: &mut dyn Board) -> Result<Ticket, RegError> {
        if !self.pp.manifest.registration.contains(now) {
            return Err(RegError::WindowClosed);
        }
        if !self.roll.contains(id) {
            return Err(RegError::NotEligible);
        }
        if self.issued.contains_key(id) {
            return Err(RegError::AlreadyRegistered);
        }
        if pseudonym.len() != self.pp.pseudonym_system.m() {
            return Err(RegError::Malformed(format!(
                "pseudonym has {} elements, expected {}",
                pseudonym.len(),
                self.pp.pseudonym_system.m()
            )));
        }
        if self.pseudonyms.contains(pseudonym) {
            return Err(RegError::DuplicatePseudonym);
        }
        let msg = pseudonym_message(pseudonym);
        let mut rng = op_rng(&self.seed, "ticket", &msg);
        let signature = self
            .meter
            .sign(&self.keys.sig.signing, &msg, &mut rng)
            .map_err(|e| RegError::Crypto(e.to_string()))?;
        board.append(EntryKind::Pseudonym, pseudonym.to_bytes())?;
        let e = RoleEvent::Issued {
            id: id.to_string(),
            pseudonym: pseudonym.clone(),
        };
        self.apply(&e).expect("own event");
        self.journal.record(e);
        Ok(Ticket {
            pseudonym: pseudonym.clone(),
            signature,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Stage {
    Opened,
    Signed(Commitment),
    Cast { digest: Digest32, receipt: Signature },
}

pub struct PollOfficer {
    pp: Arc<PublicParams>,
    keys: AuthorityKeys,
    seed: [u8; 32],
    meter: Arc<Meter>,
    used: HashSet<FieldVector>,
    sessions: HashMap<SessionId, Stage>,
    cast: Vec<(Digest32, Ciphertext)>,
    forwarded: HashMap<Digest32, Signature>,
    journal: Journal,
}

impl PollOfficer {
    pub fn new(pp: Arc<PublicParams>, keys: AuthorityKeys, seed: [u8; 32], meter: Arc<Meter>) -> Self {
        PollOfficer {
            pp,
            keys,
            seed,
            meter,
            used: HashSet::new(),
            sessions: HashMap::new(),
            cast: Vec::new(),
            forwarded: HashMap::new(),
            journal: Journal::default(),
        }
    }

    pub fn restore(mut self, events: Vec<RoleEvent>) -> Result<Self, DecodeError> {
        for e in &events {
            self.apply(e).map_err(|_| unexpected("Poll-Officer", e))?;
        }
        self.journal = Journal::restored(events);
        Ok(self)
    }

    fn apply(&mut self, e: &RoleEvent) -> Result<(), ()> {
        match e {
            RoleEvent::SessionOpened { session, pseudonym } => {
                self.used.insert(pseudonym.clone());
                self.sessions.insert(*session, Stage::Opened);
            }
            RoleEvent::BundleSigned { session, commitment } => {
                self.sessions.insert(*session, Stage::Signed(*commitment));
            }
            RoleEvent::BallotCast { session, ev, receipt } => {
                let digest = receipt_digest(ev);
                self.sessions.insert(
                    *session,
                    Stage::Cast {
                        digest,
                        receipt: receipt.clone(),
                    },
                );
                self.cast.push((digest, ev.clone()));
            }
            RoleEvent::Forwarded { digest, receipt } => {
                self.forwarded.insert(*digest, receipt.clone());
            }
            _ => return Err(()),
        }
        Ok(())
    }

    fn commit_event(&mut self, e: RoleEvent) {
        self.apply(&e).expect("own event");
        self.journal.record(e);
    }

    pub fn take_events(&mut self) -> Vec<RoleEvent> {
        self.journal.take_unsaved()
    }

    /// Every state transition so far, in order.
    pub fn journal(&self) -> &[RoleEvent] {
        &self.journal.events
    }

    pub fn used_ticket_count(&self) -> usize {
        self.used.len()
    }

    /// Step 2: decrypt `ET_u`, check freshness and the RC signature, and
    /// mark the ticket used.
    pub fn open_session(&mut self, et: &Ciphertext, now: u64) -> Result<SessionId, VoteError> {
        if !self.pp.manifest.voting.contains(now) {
            return Err(VoteError::WindowClosed);
        }
        let plain = self
            .meter
            .decrypt(&self.keys.enc.secret, et)
            .map_err(|_| VoteError::Undecryptable)?;
        let pres = TicketPresentation::from_bytes(&plain).map_err(|e| VoteError::Malformed(e.to_string()))?;
        if pres.timestamp.abs_diff(now) > FRESHNESS_WINDOW {
            return Err(VoteError::StaleTime);
        }
        let ticket = pres.ticket;
        let rc = &self.pp.sig[Authority::RegCenter];
        if !self.meter.verify(&pseudonym_message(&ticket.pseudonym), &ticket.signature, rc) {
            return Err(VoteError::BadTicket);
        }
        if self.used.contains(&ticket.pseudonym) {
            return Err(VoteError::TicketReused);
        }
        let session = SessionId::for_submission(et);
        self.commit_event(RoleEvent::SessionOpened {
            session,
            pseudonym: ticket.pseudonym,
        });
        Ok(session)
    }

    /// Step 4: sign `CAN_i ‖ c` for every candidate.
    pub fn sign_bundle(&mut self, session: SessionId, c: Commitment) -> Result<ObliviousBundle, VoteError> {
        match self.sessions.get(&session) {
            None => return Err(VoteError::UnknownSession),
            Some(Stage::Opened) => {}
            Some(_) => return Err(VoteError::OutOfOrder),
        }
        let mut sigs = Vec::with_capacity(self.pp.candidates().len());
        for cand in self.pp.candidates() {
            let msg = oblivious_message(cand.as_bytes(), &c);
            let mut rng = op_rng(&self.seed, "oblivious", &msg);
            let s = self
                .meter
                .sign(&self.keys.sig.signing, &msg, &mut rng)
                .map_err(|e| VoteError::Crypto(e.to_string()))?;
            sigs.push(s);
        }
        self.commit_event(RoleEvent::BundleSigned { session, commitment: c });
        Ok(ObliviousBundle(sigs))
    }

    /// Step 7: accept `EV_u` and return a receipt over `H(EV_u)`.
    /// Resubmitting the same `EV_u` returns the stored receipt.
    pub fn accept_cast(&mut self, session: SessionId, ev: &Ciphertext) -> Result<Signature, VoteError> {
        let digest = receipt_digest(ev);
        match self.sessions.get(&session) {
            None => return Err(VoteError::UnknownSession),
            Some(Stage::Signed(_)) => {}
            Some(Stage::Cast { digest: d, receipt }) if *d == digest => return Ok(receipt.clone()),
            Some(_) => return Err(VoteError::OutOfOrder),
        }
        let mut rng = op_rng(&self.seed, "receipt", &digest);
        let receipt = self
            .meter
            .sign(&self.keys.sig.signing, &digest, &mut rng)
            .map_err(|e| VoteError::Crypto(e.to_string()))?;
        self.commit_event(RoleEvent::BallotCast {
            session,
            ev: ev.clone(),
            receipt: receipt.clone(),
        });
        Ok(receipt)
    }

    /// Cast ballots not yet acknowledged by the Vot-Center, in cast order.
    pub fn pending_forward(&self) -> Vec<Ciphertext> {
        self.cast
            .iter()
            .filter(|(d, _)| !self.forwarded.contains_key(d))
            .map(|(_, ev)| ev.clone())
            .collect()
    }

    pub fn record_forward(&mut self, ev: &Ciphertext, receipt: Signature) {
        let digest = receipt_digest(ev);
        if !self.forwarded.contains_key(&digest) {
            self.commit_event(RoleEvent::Forwarded { digest, receipt });
        }
    }

    pub fn forward_receipt(&self, ev: &Ciphertext) -> Option<&Signature> {
        self.forwarded.get(&receipt_digest(ev))
    }
}

pub struct VotCenter {
    pp: Arc<PublicParams>,
    keys: AuthorityKeys,
    seed: [u8; 32],
    meter: Arc<Meter>,
    received: Vec<(Digest32, Ciphertext)>,
    receipts: HashMap<Digest32, Signature>,
    published: HashMap<Digest32, u64>,
    published_pseudonyms: HashSet<FieldVector>,
    rejected: HashMap<Digest32, u8>,
    // Cache of RC-published pseudonyms; rebuilt from the board on demand.
    known: HashSet<FieldVector>,
    board_cursor: u64,
    journal: Journal,
}

impl VotCenter {
    pub fn new(pp: Arc<PublicParams>, keys: AuthorityKeys, seed: [u8; 32], meter: Arc<Meter>) -> Self {
        VotCenter {
            pp,
            keys,
            seed,
            meter,
            received: Vec::new(),
            receipts: HashMap::new(),
            published: HashMap::new(),
            published_pseudonyms: HashSet::new(),
            rejected: HashMap::new(),
            known: HashSet::new(),
            board_cursor: 0,
            journal: Journal::default(),
        }
    }

    pub fn restore(mut self, events: Vec<RoleEvent>) -> Result<Self, DecodeError> {
        for e in &events {
            self.apply(e).map_err(|_| unexpected("Vot-Center", e))?;
        }
        self.journal = Journal::restored(events);
        Ok(self)
    }

    fn apply(&mut self, e: &RoleEvent) -> Result<(), ()> {
        match e {
            RoleEvent::Received { ev, receipt } => {
                let d = receipt_digest(ev);
                self.received.push((d, ev.clone()));
                self.receipts.insert(d, receipt.clone());
            }
            RoleEvent::Published { digest, content, seq } => {
                self.published.insert(*digest, *seq);
                self.published_pseudonyms.insert(content.ticket.pseudonym.clone());
            }
            RoleEvent::Rejected { digest, code } => {
                self.rejected.insert(*digest, *code);
            }
            _ => return Err(()),
        }
        Ok(())
    }

    fn commit_event(&mut self, e: RoleEvent) {
        self.apply(&e).expect("own event");
        self.journal.record(e);
    }

    pub fn take_events(&mut self) -> Vec<RoleEvent> {
        self.journal.take_unsaved()
    }

    pub fn journal(&self) -> &[RoleEvent] {
        &self.journal.events
    }

    /// Accepts a forwarded `EV_u` and signs `H(EV_u)`; idempotent by digest.
    pub fn receive(&mut self, ev: &Ciphertext) -> Result<Signature, VcError> {
        let digest = receipt_digest(ev);
        if let Some(r) = self.receipts.get(&digest) {
            return Ok(r.clone());
        }
        let mut rng = op_rng(&self.seed, "receipt", &digest);
        let receipt = self
            .meter
            .sign(&self.keys.sig.signing, &digest, &mut rng)
            .map_err(|e| VcError::Crypto(e.to_string()))?;
        self.commit_event(RoleEvent::Received {
            ev: ev.clone(),
            receipt: receipt.clone(),
        });
        Ok(receipt)
    }

    fn sync_pseudonyms(&mut self, board: &dyn Board) -> Result<(), VcError> {
        let slice = board.read_range(self.board_cursor, u64::MAX)?;
        for e in slice.entries {
            if e.kind == EntryKind::Pseudonym {
                if let Ok(p) = FieldVector::from_bytes(&e.payload) {
                    self.known.insert(p);
                }
            }
            self.board_cursor = e.seq + 1;
        }
        Ok(())
    }

    /// Decrypts `EV_u`, verifies the ticket and writes `B_j^u` on the board.
    /// Publishing an already published `EV_u` returns its original position.
    pub fn verify_and_publish(&mut self, ev: &Ciphertext, now: u64, board: &mut dyn Board) -> Result<u64, VcError> {
        let digest = receipt_digest(ev);
        if let Some(seq) = self.published.get(&digest) {
            return Ok(*seq);
        }
        if now >= self.pp.manifest.tally_start {
            return Err(VcError::TallyStarted);
        }
        match self.check(ev, board) {
            Ok(content) => {
                let seq = board.append(EntryKind::Ballot, content.ballot.to_bytes())?;
                self.commit_event(RoleEvent::Published { digest, content, seq });
                Ok(seq)
            }
            Err(VcError::Board(e)) => Err(VcError::Board(e)),
            Err(e) => {
                use super::ErrorCode;
                self.commit_event(RoleEvent::Rejected { digest, code: e.code() });
                Err(e)
            }
        }
    }

    fn check(&mut self, ev: &Ciphertext, board: &dyn Board) -> Result<CastContent, VcError> {
        let plain = self
            .meter
            .decrypt(&self.keys.enc.secret, ev)
            .map_err(|_| VcError::DecryptFailed)?;
        let content = CastContent::from_bytes(&plain).map_err(|e| VcError::Malformed(e.to_string()))?;
        let t = &content.ticket;
        let rc = &self.pp.sig[Authority::RegCenter];
        if !self.meter.verify(&pseudonym_message(&t.pseudonym), &t.signature, rc) {
            return Err(VcError::BadTicket);
        }
        if !self.known.contains(&t.pseudonym) {
            self.sync_pseudonyms(board)?;
            if !self.known.contains(&t.pseudonym) {
                return Err(VcError::UnknownPseudonym);
            }
        }
        if self.published_pseudonyms.contains(&t.pseudonym) {
            return Err(VcError::Duplicate);
        }
        Ok(content)
    }

    /// Received ballots neither published nor rejected yet, in arrival order.
    pub fn pending(&self) -> Vec<Ciphertext> {
        self.received
            .iter()
            .filter(|(d, _)| !self.published.contains_key(d) && !self.rejected.contains_key(d))
            .map(|(_, ev)| ev.clone())
            .collect()
    }

    /// Publishes every pending ballot; `skip` lets a test withhold some.
    pub fn publish_pending(
        &mut self,
        now: u64,
        board: &mut dyn Board,
        skip: &HashSet<Digest32>,
    ) -> Vec<(Digest32, Result<u64, VcError>)> {
        let mut out = Vec::new();
        for ev in self.pending() {
            let d = receipt_digest(&ev);
            if skip.contains(&d) {
                continue;
            }
            out.push((d, self.verify_and_publish(&ev, now, board)));
        }
        out
    }
}

pub struct CountCenter {
    pp: Arc<PublicParams>,
    keys: AuthorityKeys,
    meter: Arc<Meter>,
}

impl CountCenter {
    pub fn new(pp: Arc<PublicParams>, keys: AuthorityKeys, meter: Arc<Meter>) -> Self {
        CountCenter { pp, keys, meter }
    }

    /// Decrypts and checks every Ballot entry; one decryption and one
    /// verification per ballot.
    pub fn tally(&self, entries: &[Entry], now: u64) -> Result<TallyOutcome, TallyError> {
        if now < self.pp.manifest.tally_start {
            return Err(TallyError::VotingOpen);
        }
        Ok(count_ballots(entries, &self.keys.enc.secret, &self.pp, &self.meter))
    }

    /// Appends the tally marks, the final tally and the disclosed key.
    /// `published` is normally `outcome.result`; a different value models a
    /// dishonest Count-Center.
    pub fn publish(&self, outcome: &TallyOutcome, published: &TallyResult, board: &mut dyn Board) -> Result<u64, TallyError> {
        let existing = board.read_all()?;
        if existing.iter().any(|e| e.kind == EntryKind::FinalTally) {
            return Err(TallyError::AlreadyPublished);
        }
        for m in &outcome.marks {
            board.append(EntryKind::TallyMark, m.to_bytes())?;
        }
        let seq = board.append(EntryKind::FinalTally, published.to_bytes())?;
        board.append(EntryKind::CCKeyDisclosure, self.keys.enc.secret.to_bytes())?;
        Ok(seq)
    }

    pub fn secret_bytes(&self) -> Vec<u8> {
        self.keys.enc.secret.to_bytes()
    }
}

/// Encodes a voter identity as `id_len` field elements.
pub fn encode_identity(id: &str, id_len: usize) -> FieldVector {
    FieldVector::from_bytes_raw(&hash::shake(domain::IDENTITY, &[id.as_bytes()], id_len))
}

/// Client-side voter state.
pub struct Voter {
    pub id: String,
    pp: Arc<PublicParams>,
    rng: ChaCha20Rng,
    meter: Arc<Meter>,
    a: Option<FieldVector>,
    pseudonym: Option<FieldVector>,
    ticket: Option<Ticket>,
    choice: Option<usize>,
    opening: Option<(Commitment, Opening)>,
    vote: Option<Vote>,
    ballot: Option<Ciphertext>,
    ev: Option<Ciphertext>,
    receipt: Option<Signature>,
}

impl Voter {
    pub fn new(id: impl Into<String>, pp: Arc<PublicParams>, rng: ChaCha20Rng, meter: Arc<Meter>) -> Self {
        Voter {
            id: id.into(),
            pp,
            rng,
            meter,
            a: None,
            pseudonym: None,
            ticket: None,
            choice: None,
            opening: None,
            vote: None,
            ballot: None,
            ev: None,
            receipt: None,
        }
    }

    /// `v_p = P(encode(ID) ‖ a)` for fresh random `a`.
    pub fn make_pseudonym(&mut self) -> FieldVector {
        let sys = &self.pp.pseudonym_system;
        let id_part = encode_identity(&self.id, self.pp.pseudonym_id_len);
        let a = FieldVector::random(sys.n() - self.pp.pseudonym_id_len, &mut self.rng);
        let v = self.meter.eval(sys, &id_part.concat(&a)).expect("arity fixed by params");
        self.a = Some(a);
        self.pseudonym = Some(v.clone());
        v
    }

    pub fn secret_a(&self) -> Option<&FieldVector> {
        self.a.as_ref()
    }

    pub fn pseudonym(&self) -> Option<&FieldVector> {
        self.pseudonym.as_ref()
    }

    /// Installs a ticket; any ticket may be installed, including a forged one.
    pub fn set_ticket(&mut self, ticket: Ticket) {
        self.pseudonym = Some(ticket.pseudonym.clone());
        self.ticket = Some(ticket);
    }

    pub fn ticket(&self) -> Option<&Ticket> {
        self.ticket.as_ref()
    }

    /// Step 1: `ET_u = Enc(Ticket ‖ tm_u, pk_E_PO)`.
    pub fn present_ticket(&mut self, now: u64) -> Result<Ciphertext, VoteError> {
        let ticket = self.ticket.clone().ok_or(VoteError::NoTicket)?;
        let pres = TicketPresentation { ticket, timestamp: now };
        Ok(self
            .meter
            .encrypt(&self.pp.enc[Authority::PollOfficer], &pres.to_bytes(), &mut self.rng))
    }

    /// Step 3: commit to `CAN_j`.
    pub fn commit_to(&mut self, choice: usize) -> Result<Commitment, VoteError> {
        let cand = self.pp.candidates().get(choice).ok_or(VoteError::InvalidChoice)?;
        let (c, r) = comm(cand.as_bytes(), &mut self.rng);
        self.choice = Some(choice);
        self.opening = Some((c, r));
        Ok(c)
    }

    /// Steps 5–6: verify all `L` signatures, keep `σ_j`, and build `EV_u`.
    pub fn receive_bundle(&mut self, bundle: &ObliviousBundle) -> Result<Ciphertext, VoteError> {
        let (c, r) = self.opening.ok_or(VoteError::OutOfOrder)?;
        let j = self.choice.ok_or(VoteError::OutOfOrder)?;
        let ticket = self.ticket.clone().ok_or(VoteError::NoTicket)?;
        let cands = self.pp.candidates();
        if bundle.0.len() != cands.len() {
            return Err(VoteError::BadObliviousBundle);
        }
        let po = &self.pp.sig[Authority::PollOfficer];
        let mut all_ok = true;
        for (cand, s) in cands.iter().zip(&bundle.0) {
            all_ok &= self.meter.verify(&oblivious_message(cand.as_bytes(), &c), s, po);
        }
        if !all_ok {
            return Err(VoteError::BadObliviousBundle);
        }
        let vote = Vote {
            signature: bundle.0[j].clone(),
            commitment: c,
            opening: r,
        };
        let content = BallotContent {
            vote: vote.clone(),
            candidate: cands[j].as_bytes().to_vec(),
        };
        let ballot = self
            .meter
            .encrypt(&self.pp.enc[Authority::CountCenter], &content.to_bytes(), &mut self.rng);
        let cast = CastContent {
            ticket,
            ballot: ballot.clone(),
        };
        let ev = self
            .meter
            .encrypt(&self.pp.enc[Authority::VotCenter], &cast.to_bytes(), &mut self.rng);
        self.vote = Some(vote);
        self.ballot = Some(ballot);
        self.ev = Some(ev.clone());
        Ok(ev)
    }

    /// Stores the Poll-Officer's receipt. It is checked later, as evidence.
    pub fn accept_receipt(&mut self, receipt: Signature) {
        self.receipt = Some(receipt);
    }

    pub fn candidate_count(&self) -> usize {
        self.pp.candidates().len()
    }

    pub fn choice(&self) -> Option<usize> {
        self.choice
    }

    pub fn vote(&self) -> Option<&Vote> {
        self.vote.as_ref()
    }

    pub fn ballot(&self) -> Option<&Ciphertext> {
        self.ballot.as_ref()
    }

    pub fn cast_ballot(&self) -> Option<&Ciphertext> {
        self.ev.as_ref()
    }

    pub fn receipt(&self) -> Option<&Signature> {
        self.receipt.as_ref()
    }

    /// Forgets the cast state so the same ticket can be replayed.
    pub fn reset_round(&mut self) {
        self.choice = None;
        self.opening = None;
        self.vote = None;
        self.ballot = None;
        self.ev = None;
        self.receipt = None;
    }
}
