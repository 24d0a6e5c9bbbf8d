//! Protocol payloads and the typed message envelope.
//!
//! Envelope: `tag (1 byte) ‖ body length (4 bytes BE) ‖ body`. Tags
//! 0x01–0x0C are the protocol messages; the table is frozen.

use thiserror::Error;

use crate::codec::{put_bytes, put_list, put_str, put_u32, put_u64, read_list, Canonical, DecodeError, Reader};
use crate::commit::{Commitment, Opening};
use crate::field::FieldVector;
use crate::hash::{self, domain, Digest32};
use crate::mqe::Ciphertext;
use crate::mqs::Signature;

use super::board::EntryKind;

/// Pseudonym plus the Reg-Center's signature over it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ticket {
    pub pseudonym: FieldVector,
    pub signature: Signature,
}

impl Canonical for Ticket {
    fn encode(&self, out: &mut Vec<u8>) {
        self.pseudonym.encode(out);
        self.signature.encode(out);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Ticket {
            pseudonym: FieldVector::decode(r)?,
            signature: Signature::decode(r)?,
        })
    }
}

/// Bytes the Reg-Center signs for a pseudonym.
pub fn pseudonym_message(pseudonym: &FieldVector) -> Vec<u8> {
    pseudonym.to_bytes()
}

/// Bytes the Poll-Officer signs for candidate `i`: `len ‖ CAN_i ‖ c`.
pub fn oblivious_message(candidate: &[u8], c: &Commitment) -> Vec<u8> {
    let mut out = Vec::with_capacity(candidate.len() + 36);
    put_bytes(&mut out, candidate);
    out.extend_from_slice(&c.0);
    out
}

/// Digest a receipt signature covers.
pub fn receipt_digest(ev: &Ciphertext) -> Digest32 {
    hash::digest(domain::RECEIPT, &[&ev.to_bytes()])
}

/// Plaintext of `ET_u`: the ticket and the voter's current time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TicketPresentation {
    pub ticket: Ticket,
    pub timestamp: u64,
}

impl Canonical for TicketPresentation {
    fn encode(&self, out: &mut Vec<u8>) {
        self.ticket.encode(out);
        put_u64(out, self.timestamp);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(TicketPresentation {
            ticket: Ticket::decode(r)?,
            timestamp: r.u64()?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionId(pub [u8; 16]);

impl SessionId {
    pub fn for_submission(et: &Ciphertext) -> Self {
        let d = hash::digest(domain::SESSION, &[&et.to_bytes()]);
        let mut id = [0u8; 16];
        id.copy_from_slice(&d[..16]);
        SessionId(id)
    }
}

impl Canonical for SessionId {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(SessionId(r.array()?))
    }
}

/// The Poll-Officer's signatures `(σ_1, …, σ_L)` over every `CAN_i ‖ c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObliviousBundle(pub Vec<Signature>);

impl Canonical for ObliviousBundle {
    fn encode(&self, out: &mut Vec<u8>) {
        put_list(out, &self.0);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(ObliviousBundle(read_list(r)?))
    }
}

/// The voter's signed vote `Σ = (σ_j, c, r)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vote {
    pub signature: Signature,
    pub commitment: Commitment,
    pub opening: Opening,
}

/// `σ_j ‖ c ‖ r`; every field is self-delimiting.
impl Canonical for Vote {
    fn encode(&self, out: &mut Vec<u8>) {
        self.signature.encode(out);
        out.extend_from_slice(&self.commitment.0);
        out.extend_from_slice(&self.opening.0);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Vote {
            signature: Signature::decode(r)?,
            commitment: Commitment(r.array()?),
            opening: Opening(r.array()?),
        })
    }
}

/// Plaintext of the ballot `B_j^u`: `Σ ‖ CAN_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BallotContent {
    pub vote: Vote,
    pub candidate: Vec<u8>,
}

impl Canonical for BallotContent {
    fn encode(&self, out: &mut Vec<u8>) {
        self.vote.encode(out);
        put_bytes(out, &self.candidate);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(BallotContent {
            vote: Vote::decode(r)?,
            candidate: r.bytes()?.to_vec(),
        })
    }
}

/// Plaintext of `EV_u`: `Ticket ‖ B_j^u`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CastContent {
    pub ticket: Ticket,
    pub ballot: Ciphertext,
}

impl Canonical for CastContent {
    fn encode(&self, out: &mut Vec<u8>) {
        self.ticket.encode(out);
        self.ballot.encode(out);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(CastContent {
            ticket: Ticket::decode(r)?,
            ballot: Ciphertext::decode(r)?,
        })
    }
}

/// "+1 for candidate" recorded against a ballot entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TallyMark {
    pub ballot_seq: u64,
    pub candidate: String,
}

impl Canonical for TallyMark {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u64(out, self.ballot_seq);
        put_str(out, &self.candidate);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(TallyMark {
            ballot_seq: r.u64()?,
            candidate: r.string()?,
        })
    }
}

pub mod tag {
    pub const REGISTER_REQUEST: u8 = 0x01;
    pub const TICKET_ISSUED: u8 = 0x02;
    pub const TICKET_SUBMISSION: u8 = 0x03;
    pub const SESSION_OPENED: u8 = 0x04;
    pub const COMMITMENT_SUBMISSION: u8 = 0x05;
    pub const OBLIVIOUS_BUNDLE: u8 = 0x06;
    pub const CAST_BALLOT: u8 = 0x07;
    pub const CAST_RECEIPT: u8 = 0x08;
    pub const FORWARD_BALLOT: u8 = 0x09;
    pub const FORWARD_RECEIPT: u8 = 0x0A;
    pub const BOARD_POST: u8 = 0x0B;
    pub const CC_KEY_DISCLOSURE: u8 = 0x0C;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    /// Voter → RC: `(ID, v_p)`.
    RegisterRequest { id: String, pseudonym: FieldVector },
    /// RC → voter.
    TicketIssued(Ticket),
    /// Voter → PO: `ET_u`.
    TicketSubmission(Ciphertext),
    /// PO → voter.
    SessionOpened(SessionId),
    /// Voter → PO: `c`.
    CommitmentSubmission { session: SessionId, commitment: Commitment },
    /// PO → voter: `σ̃`.
    ObliviousBundle(ObliviousBundle),
    /// Voter → PO: `EV_u`.
    CastBallot { session: SessionId, ev: Ciphertext },
    /// PO → voter: signature over `H(EV_u)`.
    CastReceipt(Signature),
    /// PO → VC: `EV_u`.
    ForwardBallot(Ciphertext),
    /// VC → PO: signature over `H(EV_u)`.
    ForwardReceipt(Signature),
    /// VC/RC/CC → board.
    BoardPost { kind: EntryKind, payload: Vec<u8> },
    /// CC → board: the encoded decryption key.
    CCKeyDisclosure(Vec<u8>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvelopeError {
    #[error("unknown message tag {0:#04x}")]
    UnknownTag(u8),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

impl Message {
    pub fn tag(&self) -> u8 {
        match self {
            Message::RegisterRequest { .. } => tag::REGISTER_REQUEST,
            Message::TicketIssued(_) => tag::TICKET_ISSUED,
            Message::TicketSubmission(_) => tag::TICKET_SUBMISSION,
            Message::SessionOpened(_) => tag::SESSION_OPENED,
            Message::CommitmentSubmission { .. } => tag::COMMITMENT_SUBMISSION,
            Message::ObliviousBundle(_) => tag::OBLIVIOUS_BUNDLE,
            Message::CastBallot { .. } => tag::CAST_BALLOT,
            Message::CastReceipt(_) => tag::CAST_RECEIPT,
            Message::ForwardBallot(_) => tag::FORWARD_BALLOT,
            Message::ForwardReceipt(_) => tag::FORWARD_RECEIPT,
            Message::BoardPost { .. } => tag::BOARD_POST,
            Message::CCKeyDisclosure(_) => tag::CC_KEY_DISCLOSURE,
        }
    }

    pub fn is_known_tag(t: u8) -> bool {
        (tag::REGISTER_REQUEST..=tag::CC_KEY_DISCLOSURE).contains(&t)
    }

    pub fn encode_body(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Message::RegisterRequest { id, pseudonym } => {
                put_str(&mut out, id);
                pseudonym.encode(&mut out);
            }
            Message::TicketIssued(t) => t.encode(&mut out),
            Message::TicketSubmission(ct) | Message::ForwardBallot(ct) => ct.encode(&mut out),
            Message::SessionOpened(s) => s.encode(&mut out),
            Message::CommitmentSubmission { session, commitment } => {
                session.encode(&mut out);
                out.extend_from_slice(&commitment.0);
            }
            Message::ObliviousBundle(b) => b.encode(&mut out),
            Message::CastBallot { session, ev } => {
                session.encode(&mut out);
                ev.encode(&mut out);
            }
            Message::CastReceipt(s) | Message::ForwardReceipt(s) => s.encode(&mut out),
            Message::BoardPost { kind, payload } => {
                out.push(*kind as u8);
                put_bytes(&mut out, payload);
            }
            Message::CCKeyDisclosure(k) => put_bytes(&mut out, k),
        }
        out
    }

    pub fn decode_body(t: u8, body: &[u8]) -> Result<Self, EnvelopeError> {
        let mut r = Reader::new(body);
        let msg = match t {
            tag::REGISTER_REQUEST => Message::RegisterRequest {
                id: r.string()?,
                pseudonym: FieldVector::decode(&mut r)?,
            },
            tag::TICKET_ISSUED => Message::TicketIssued(Ticket::decode(&mut r)?),
            tag::TICKET_SUBMISSION => Message::TicketSubmission(Ciphertext::decode(&mut r)?),
            tag::SESSION_OPENED => Message::SessionOpened(SessionId::decode(&mut r)?),
            tag::COMMITMENT_SUBMISSION => Message::CommitmentSubmission {
                session: SessionId::decode(&mut r)?,
                commitment: Commitment(r.array()?),
            },
            tag::OBLIVIOUS_BUNDLE => Message::ObliviousBundle(ObliviousBundle::decode(&mut r)?),
            tag::CAST_BALLOT => Message::CastBallot {
                session: SessionId::decode(&mut r)?,
                ev: Ciphertext::decode(&mut r)?,
            },
            tag::CAST_RECEIPT => Message::CastReceipt(Signature::decode(&mut r)?),
            tag::FORWARD_BALLOT => Message::ForwardBallot(Ciphertext::decode(&mut r)?),
            tag::FORWARD_RECEIPT => Message::ForwardReceipt(Signature::decode(&mut r)?),
            tag::BOARD_POST => {
                let k = r.u8()?;
                let kind = EntryKind::from_u8(k)
                    .ok_or_else(|| DecodeError::malformed("board post", format!("kind {k:#04x}")))?;
                Message::BoardPost {
                    kind,
                    payload: r.bytes()?.to_vec(),
                }
            }
            tag::CC_KEY_DISCLOSURE => Message::CCKeyDisclosure(r.bytes()?.to_vec()),
            other => return Err(EnvelopeError::UnknownTag(other)),
        };
        r.finish()?;
        Ok(msg)
    }
}

/// `tag ‖ len (4 BE) ‖ body`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub tag: u8,
    pub body: Vec<u8>,
}

impl Envelope {
    pub fn from_message(m: &Message) -> Self {
        Envelope {
            tag: m.tag(),
            body: m.encode_body(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + self.body.len());
        out.push(self.tag);
        put_u32(&mut out, self.body.len() as u32);
        out.extend_from_slice(&self.body);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let tag = r.u8()?;
        let body = r.bytes()?.to_vec();
        r.finish()?;
        Ok(Envelope { tag, body })
    }

    pub fn message(&self) -> Result<Message, EnvelopeError> {
        if !Message::is_known_tag(self.tag) {
            return Err(EnvelopeError::UnknownTag(self.tag));
        }
        Message::decode_body(self.tag, &self.body)
    }
}
