use std::collections::HashSet;
use std::net::TcpStream;
use std::time::Duration;

use evot_core::commit::Commitment;
use evot_core::field::FieldVector;
use evot_core::hash::Digest32;
use evot_core::logfile;
use evot_core::mqe::Ciphertext;
use evot_core::mqs::Signature;
use evot_core::protocol::{
    Board, BoardError, BoardSlice, Deployment, Entry, EntryKind, ErrorCode, Message, ObliviousBundle, RegError,
    SessionId, TallyError, TallyResult, Ticket, VcError, VoteError,
};
use evot_core::codec::Canonical;

use crate::wire::{Frame, WireEnvelope, WireError};

const IO_TIMEOUT: Duration = Duration::from_secs(60);

/// One request, one reply, over a fresh connection.
pub fn call(addr: &str, req: &Frame) -> Result<Frame, WireError> {
    let mut s = TcpStream::connect(addr)?;
    s.set_nodelay(true)?;
    s.set_read_timeout(Some(IO_TIMEOUT))?;
    req.to_envelope().write_to(&mut s)?;
    let env = WireEnvelope::read_from(&mut s)?
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "connection closed without reply"))?;
    Frame::from_envelope(&env)
}

/// Maps a reply to the caller's error type. Codes the type does not know,
/// wire faults and transport failures all go through `transport`.
fn reply<E: ErrorCode>(r: Result<Frame, WireError>, transport: impl Fn(String) -> E) -> Result<Frame, E> {
    match r {
        Ok(Frame::Error { code, detail }) => Err(E::from_code(code, &detail).unwrap_or_else(|| transport(detail))),
        Ok(f) => Ok(f),
        Err(e) => Err(transport(e.to_string())),
    }
}

fn unexpected<E>(f: Frame, transport: impl Fn(String) -> E) -> E {
    transport(format!("unexpected reply {:?}", f.to_envelope().tag))
}

/// A bulletin board behind a board endpoint.
#[derive(Clone, Debug)]
pub struct RemoteBoard {
    pub addr: String,
}

impl Board for RemoteBoard {
    fn append(&mut self, kind: EntryKind, payload: Vec<u8>) -> Result<u64, BoardError> {
        match call(&self.addr, &Frame::Protocol(Message::BoardPost { kind, payload })) {
            Ok(Frame::Appended(seq)) => Ok(seq),
            Ok(Frame::Error { detail, .. }) => Err(BoardError::Rejected(detail)),
            Ok(f) => Err(unexpected(f, BoardError::Transport)),
            Err(e) => Err(BoardError::Transport(e.to_string())),
        }
    }

    fn read_range(&self, from: u64, to: u64) -> Result<BoardSlice, BoardError> {
        match call(&self.addr, &Frame::BoardRead { from, to }) {
            Ok(Frame::BoardSlice { head, entries }) => Ok(BoardSlice { entries, head }),
            Ok(Frame::Error { detail, .. }) => Err(BoardError::Rejected(detail)),
            Ok(f) => Err(unexpected(f, BoardError::Transport)),
            Err(e) => Err(BoardError::Transport(e.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Endpoints {
    pub board: String,
    pub rc: String,
    pub po: String,
    pub vc: String,
    pub cc: String,
}

/// The authorities as live endpoints.
#[derive(Clone, Debug)]
pub struct RemoteDeployment {
    pub endpoints: Endpoints,
}

impl RemoteDeployment {
    pub fn new(endpoints: Endpoints) -> Self {
        RemoteDeployment { endpoints }
    }

    fn board_client(&self) -> RemoteBoard {
        RemoteBoard {
            addr: self.endpoints.board.clone(),
        }
    }

    fn dump(addr: &str) -> Option<Vec<u8>> {
        match call(addr, &Frame::Dump) {
            Ok(Frame::DumpBytes(b)) => Some(b),
            _ => None,
        }
    }
}

fn vc_transport(s: String) -> VcError {
    VcError::Board(BoardError::Transport(s))
}

fn tally_transport(s: String) -> TallyError {
    TallyError::Board(BoardError::Transport(s))
}

impl Deployment for RemoteDeployment {
    fn set_time(&mut self, now: u64) -> Result<(), BoardError> {
        let e = &self.endpoints;
        for addr in [&e.rc, &e.po, &e.vc, &e.cc] {
            match call(addr, &Frame::SetClock(now)) {
                Ok(Frame::Ack) => {}
                Ok(Frame::Error { detail, .. }) => return Err(BoardError::Rejected(detail)),
                Ok(f) => return Err(unexpected(f, BoardError::Transport)),
                Err(err) => return Err(BoardError::Transport(err.to_string())),
            }
        }
        Ok(())
    }

    fn register(&mut self, id: &str, pseudonym: &FieldVector) -> Result<Ticket, RegError> {
        let t = |s| RegError::Board(BoardError::Transport(s));
        let req = Frame::Protocol(Message::RegisterRequest {
            id: id.into(),
            pseudonym: pseudonym.clone(),
        });
        match reply(call(&self.endpoints.rc, &req), t)? {
            Frame::Protocol(Message::TicketIssued(ticket)) => Ok(ticket),
            f => Err(unexpected(f, t)),
        }
    }

    fn submit_ticket(&mut self, et: &Ciphertext) -> Result<SessionId, VoteError> {
        let req = Frame::Protocol(Message::TicketSubmission(et.clone()));
        match reply(call(&self.endpoints.po, &req), VoteError::Transport)? {
            Frame::Protocol(Message::SessionOpened(s)) => Ok(s),
            f => Err(unexpected(f, VoteError::Transport)),
        }
    }

    fn submit_commitment(&mut self, session: SessionId, commitment: Commitment) -> Result<ObliviousBundle, VoteError> {
        let req = Frame::Protocol(Message::CommitmentSubmission { session, commitment });
        match reply(call(&self.endpoints.po, &req), VoteError::Transport)? {
            Frame::Protocol(Message::ObliviousBundle(b)) => Ok(b),
            f => Err(unexpected(f, VoteError::Transport)),
        }
    }

    fn cast(&mut self, session: SessionId, ev: &Ciphertext) -> Result<Signature, VoteError> {
        let req = Frame::Protocol(Message::CastBallot { session, ev: ev.clone() });
        match reply(call(&self.endpoints.po, &req), VoteError::Transport)? {
            Frame::Protocol(Message::CastReceipt(r)) => Ok(r),
            f => Err(unexpected(f, VoteError::Transport)),
        }
    }

    fn forward_pending(&mut self) -> Result<Vec<(Digest32, Signature)>, VcError> {
        match reply(call(&self.endpoints.po, &Frame::ForwardPending), vc_transport)? {
            Frame::ForwardReceipts(rs) => Ok(rs),
            f => Err(unexpected(f, vc_transport)),
        }
    }

    fn publish_pending(&mut self, withhold: &HashSet<Digest32>) -> Result<Vec<(Digest32, Result<u64, VcError>)>, VcError> {
        let mut skip: Vec<Digest32> = withhold.iter().copied().collect();
        skip.sort();
        match reply(call(&self.endpoints.vc, &Frame::PublishPending(skip)), vc_transport)? {
            Frame::PublishResults(rs) => Ok(rs
                .into_iter()
                .map(|(d, r)| {
                    let r = r.map_err(|(code, detail)| VcError::from_code(code, &detail).unwrap_or_else(|| vc_transport(detail)));
                    (d, r)
                })
                .collect()),
            f => Err(unexpected(f, vc_transport)),
        }
    }

    fn run_tally(&mut self, inflate: Option<(&str, u64)>) -> Result<TallyResult, TallyError> {
        let req = Frame::RunTally {
            inflate: inflate.map(|(c, d)| (c.to_string(), d)),
        };
        match reply(call(&self.endpoints.cc, &req), tally_transport)? {
            Frame::TallyPublished(r) => Ok(r),
            f => Err(unexpected(f, tally_transport)),
        }
    }

    fn board(&self) -> Result<Vec<Entry>, BoardError> {
        self.board_client().read_all()
    }

    /// PO journal, VC journal, CC key and the board export, laid out as the
    /// in-process deployment lays them out.
    fn authority_dump(&self) -> Option<Vec<u8>> {
        let mut out = Self::dump(&self.endpoints.po)?;
        out.extend(Self::dump(&self.endpoints.vc)?);
        out.extend(Self::dump(&self.endpoints.cc)?);
        for e in self.board().ok()? {
            logfile::frame(&e.to_bytes(), &mut out);
        }
        Some(out)
    }
}
