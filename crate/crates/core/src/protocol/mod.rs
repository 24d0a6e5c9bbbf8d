//! The five protocol roles, their messages, the bulletin board, tally and audit.

pub mod board;
pub mod messages;
pub mod meter;
pub mod params;
pub mod roles;
pub mod round;
pub mod tally;

use thiserror::Error;

use crate::mqe::MqeError;
use crate::mqs::MqsError;

pub use board::{verify_chain, Board, BoardError, BoardSlice, BulletinBoard, ChainError, Entry, EntryKind, ExportError};
pub use messages::{
    BallotContent, CastContent, Envelope, EnvelopeError, Message, ObliviousBundle, SessionId, TallyMark, Ticket,
    TicketPresentation, Vote,
};
pub use meter::{Meter, OpCounts};
pub use params::{
    derive_rng, prepare_election, role_seed, Authority, AuthorityKeys, Manifest, ParamSet, PerAuthority, PseudonymParams,
    PublicParams, RoleSecrets, Window,
};
pub use roles::{CountCenter, PollOfficer, RegCenter, RoleEvent, VotCenter, Voter};
pub use round::{
    inflated, po_forward_batch, voter_check_board, voting_round, BoardCheck, Deployment, InProcess, WithholdingEvidence,
};
pub use tally::{audit, AuditError, AuditVerdict, RejectReason, TallyOutcome, TallyResult};

/// Accepted distance, in seconds, between a voter's `tm_u` and the
/// Poll-Officer's clock.
pub const FRESHNESS_WINDOW: u64 = 120;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("signature key generation failed: {0}")]
    SigKeygen(#[from] MqsError),
    #[error("encryption key generation failed: {0}")]
    EncKeygen(#[from] MqeError),
}

/// Errors shared across the wire carry a stable one-byte code.
pub trait ErrorCode: Sized {
    fn code(&self) -> u8;
    fn from_code(code: u8, detail: &str) -> Option<Self>;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegError {
    #[error("registration window is closed")]
    WindowClosed,
    #[error("identity is not on the eligibility roll")]
    NotEligible,
    #[error("identity already holds a ticket")]
    AlreadyRegistered,
    #[error("pseudonym already certified")]
    DuplicatePseudonym,
    #[error("malformed pseudonym: {0}")]
    Malformed(String),
    #[error("signing failed: {0}")]
    Crypto(String),
    #[error(transparent)]
    Board(#[from] BoardError),
}

impl ErrorCode for RegError {
    fn code(&self) -> u8 {
        match self {
            RegError::WindowClosed => 1,
            RegError::NotEligible => 2,
            RegError::AlreadyRegistered => 3,
            RegError::DuplicatePseudonym => 4,
            RegError::Malformed(_) => 5,
            RegError::Crypto(_) => 6,
            RegError::Board(_) => 7,
        }
    }

    fn from_code(code: u8, detail: &str) -> Option<Self> {
        Some(match code {
            1 => RegError::WindowClosed,
            2 => RegError::NotEligible,
            3 => RegError::AlreadyRegistered,
            4 => RegError::DuplicatePseudonym,
            5 => RegError::Malformed(detail.into()),
            6 => RegError::Crypto(detail.into()),
            7 => RegError::Board(BoardError::Transport(detail.into())),
            _ => return None,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VoteError {
    #[error("voting window is closed")]
    WindowClosed,
    #[error("voter holds no ticket")]
    NoTicket,
    #[error("candidate index out of range")]
    InvalidChoice,
    #[error("ticket submission does not decrypt")]
    Undecryptable,
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("timestamp outside the freshness window")]
    StaleTime,
    #[error("ticket signature does not verify")]
    BadTicket,
    #[error("ticket already used")]
    TicketReused,
    #[error("unknown session")]
    UnknownSession,
    #[error("message out of order for this session")]
    OutOfOrder,
    #[error("oblivious signature bundle does not verify")]
    BadObliviousBundle,
    #[error("cryptographic failure: {0}")]
    Crypto(String),
    #[error("transport failure: {0}")]
    Transport(String),
}

impl ErrorCode for VoteError {
    fn code(&self) -> u8 {
        match self {
            VoteError::WindowClosed => 1,
            VoteError::NoTicket => 2,
            VoteError::InvalidChoice => 3,
            VoteError::Undecryptable => 4,
            VoteError::Malformed(_) => 5,
            VoteError::StaleTime => 6,
            VoteError::BadTicket => 7,
            VoteError::TicketReused => 8,
            VoteError::UnknownSession => 9,
            VoteError::OutOfOrder => 10,
            VoteError::BadObliviousBundle => 11,
            VoteError::Crypto(_) => 12,
            VoteError::Transport(_) => 13,
        }
    }

    fn from_code(code: u8, detail: &str) -> Option<Self> {
        Some(match code {
            1 => VoteError::WindowClosed,
            2 => VoteError::NoTicket,
            3 => VoteError::InvalidChoice,
            4 => VoteError::Undecryptable,
            5 => VoteError::Malformed(detail.into()),
            6 => VoteError::StaleTime,
            7 => VoteError::BadTicket,
            8 => VoteError::TicketReused,
            9 => VoteError::UnknownSession,
            10 => VoteError::OutOfOrder,
            11 => VoteError::BadObliviousBundle,
            12 => VoteError::Crypto(detail.into()),
            13 => VoteError::Transport(detail.into()),
            _ => return None,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VcError {
    #[error("cast ballot does not decrypt")]
    DecryptFailed,
    #[error("malformed cast ballot: {0}")]
    Malformed(String),
    #[error("ticket signature does not verify")]
    BadTicket,
    #[error("pseudonym was never published by the Reg-Center")]
    UnknownPseudonym,
    #[error("a ballot for this pseudonym is already published")]
    Duplicate,
    #[error("tally has started")]
    TallyStarted,
    #[error("signing failed: {0}")]
    Crypto(String),
    #[error(transparent)]
    Board(#[from] BoardError),
}

impl ErrorCode for VcError {
    fn code(&self) -> u8 {
        match self {
            VcError::DecryptFailed => 1,
            VcError::Malformed(_) => 2,
            VcError::BadTicket => 3,
            VcError::UnknownPseudonym => 4,
            VcError::Duplicate => 5,
            VcError::TallyStarted => 6,
            VcError::Crypto(_) => 7,
            VcError::Board(_) => 8,
        }
    }

    fn from_code(code: u8, detail: &str) -> Option<Self> {
        Some(match code {
            1 => VcError::DecryptFailed,
            2 => VcError::Malformed(detail.into()),
            3 => VcError::BadTicket,
            4 => VcError::UnknownPseudonym,
            5 => VcError::Duplicate,
            6 => VcError::TallyStarted,
            7 => VcError::Crypto(detail.into()),
            8 => VcError::Board(BoardError::Transport(detail.into())),
            _ => return None,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TallyError {
    #[error("voting is still open")]
    VotingOpen,
    #[error("tally already published")]
    AlreadyPublished,
    #[error(transparent)]
    Board(#[from] BoardError),
}

impl ErrorCode for TallyError {
    fn code(&self) -> u8 {
        match self {
            TallyError::VotingOpen => 1,
            TallyError::AlreadyPublished => 2,
            TallyError::Board(_) => 3,
        }
    }

    fn from_code(code: u8, detail: &str) -> Option<Self> {
        Some(match code {
            1 => TallyError::VotingOpen,
            2 => TallyError::AlreadyPublished,
            3 => TallyError::Board(BoardError::Transport(detail.into())),
            _ => return None,
        })
    }
}
