//! Framing between endpoints.
//!
//! A frame is `version ‖ tag ‖ len (4, BE) ‖ body`. Tags below 0x20 carry
//! protocol messages; the rest are operator controls, board access and
//! replies. Version and tag are checked before the body is parsed.

use std::io::{self, Read, Write};

use evot_core::codec::{put_bytes, put_str, put_u32, put_u64, Canonical, DecodeError, Reader};
use evot_core::hash::Digest32;
use evot_core::mqs::Signature;
use evot_core::protocol::{Entry, EnvelopeError, ErrorCode, Message, TallyResult};
use thiserror::Error;

pub const VERSION: u8 = 0x01;
/// Largest body an endpoint accepts.
pub const MAX_BODY: usize = 64 << 20;

pub mod tag {
    pub const SET_CLOCK: u8 = 0x20;
    pub const BOARD_READ: u8 = 0x21;
    pub const BOARD_SLICE: u8 = 0x22;
    pub const APPENDED: u8 = 0x23;
    pub const FORWARD_PENDING: u8 = 0x24;
    pub const FORWARD_RECEIPTS: u8 = 0x25;
    pub const PUBLISH_PENDING: u8 = 0x26;
    pub const PUBLISH_RESULTS: u8 = 0x27;
    pub const RUN_TALLY: u8 = 0x28;
    pub const TALLY_PUBLISHED: u8 = 0x29;
    pub const DUMP: u8 = 0x2A;
    pub const DUMP_BYTES: u8 = 0x2B;
    pub const ACK: u8 = 0x30;
    pub const ERROR: u8 = 0x7F;
}

/// Error code for failures outside any role's error type: bad framing,
/// a message the role does not serve, or a storage failure.
pub const WIRE_FAULT: u8 = 0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireEnvelope {
    pub version: u8,
    pub tag: u8,
    pub body: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("unsupported wire version {0:#04x}")]
    Version(u8),
    #[error("unknown tag {0:#04x}")]
    UnknownTag(u8),
    #[error("body of {0} bytes exceeds limit")]
    TooLarge(usize),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<EnvelopeError> for WireError {
    fn from(e: EnvelopeError) -> Self {
        match e {
            EnvelopeError::UnknownTag(t) => WireError::UnknownTag(t),
            EnvelopeError::Decode(d) => WireError::Decode(d),
        }
    }
}

fn known_tag(t: u8) -> bool {
    Message::is_known_tag(t) || (tag::SET_CLOCK..=tag::DUMP_BYTES).contains(&t) || t == tag::ACK || t == tag::ERROR
}

impl WireEnvelope {
    pub fn new(tag: u8, body: Vec<u8>) -> Self {
        WireEnvelope {
            version: VERSION,
            tag,
            body,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + self.body.len());
        out.push(self.version);
        out.push(self.tag);
        put_u32(&mut out, self.body.len() as u32);
        out.extend_from_slice(&self.body);
        out
    }

    /// Reads one frame. `Ok(None)` on a clean end of stream.
    pub fn read_from(r: &mut impl Read) -> Result<Option<Self>, WireError> {
        let mut head = [0u8; 6];
        match r.read_exact(&mut head[..1]) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        r.read_exact(&mut head[1..])?;
        if head[0] != VERSION {
            return Err(WireError::Version(head[0]));
        }
        if !known_tag(head[1]) {
            return Err(WireError::UnknownTag(head[1]));
        }
        let len = u32::from_be_bytes(head[2..].try_into().unwrap()) as usize;
        if len > MAX_BODY {
            return Err(WireError::TooLarge(len));
        }
        let mut body = vec![0u8; len];
        r.read_exact(&mut body)?;
        Ok(Some(WireEnvelope::new(head[1], body)))
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(&self.to_bytes())?;
        w.flush()
    }
}

/// Everything an endpoint can send or receive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    Protocol(Message),
    SetClock(u64),
    BoardRead { from: u64, to: u64 },
    BoardSlice { head: i64, entries: Vec<Entry> },
    Appended(u64),
    ForwardPending,
    ForwardReceipts(Vec<(Digest32, Signature)>),
    /// Publish every pending ballot except these digests.
    PublishPending(Vec<Digest32>),
    /// Per ballot: board seq, or the role error code and detail.
    PublishResults(Vec<(Digest32, Result<u64, (u8, String)>)>),
    RunTally { inflate: Option<(String, u64)> },
    TallyPublished(TallyResult),
    Dump,
    DumpBytes(Vec<u8>),
    Ack,
    Error { code: u8, detail: String },
}

impl Frame {
    pub fn error(e: &(impl ErrorCode + std::fmt::Display)) -> Self {
        Frame::Error {
            code: e.code(),
            detail: e.to_string(),
        }
    }

    pub fn fault(detail: impl Into<String>) -> Self {
        Frame::Error {
            code: WIRE_FAULT,
            detail: detail.into(),
        }
    }

    pub fn to_envelope(&self) -> WireEnvelope {
        let mut b = Vec::new();
        let t = match self {
            Frame::Protocol(m) => return WireEnvelope::new(m.tag(), m.encode_body()),
            Frame::SetClock(t) => {
                put_u64(&mut b, *t);
                tag::SET_CLOCK
            }
            Frame::BoardRead { from, to } => {
                put_u64(&mut b, *from);
                put_u64(&mut b, *to);
                tag::BOARD_READ
            }
            Frame::BoardSlice { head, entries } => {
                b.extend_from_slice(&head.to_be_bytes());
                put_u32(&mut b, entries.len() as u32);
                for e in entries {
                    e.encode(&mut b);
                }
                tag::BOARD_SLICE
            }
            Frame::Appended(seq) => {
                put_u64(&mut b, *seq);
                tag::APPENDED
            }
            Frame::ForwardPending => tag::FORWARD_PENDING,
            Frame::ForwardReceipts(rs) => {
                put_u32(&mut b, rs.len() as u32);
                for (d, s) in rs {
                    b.extend_from_slice(d);
                    s.encode(&mut b);
                }
                tag::FORWARD_RECEIPTS
            }
            Frame::PublishPending(ds) => {
                put_u32(&mut b, ds.len() as u32);
                for d in ds {
                    b.extend_from_slice(d);
                }
                tag::PUBLISH_PENDING
            }
            Frame::PublishResults(rs) => {
                put_u32(&mut b, rs.len() as u32);
                for (d, r) in rs {
                    b.extend_from_slice(d);
                    match r {
                        Ok(seq) => {
                            b.push(0);
                            put_u64(&mut b, *seq);
                        }
                        Err((code, detail)) => {
                            b.push(1);
                            b.push(*code);
                            put_str(&mut b, detail);
                        }
                    }
                }
                tag::PUBLISH_RESULTS
            }
            Frame::RunTally { inflate } => {
                match inflate {
                    None => b.push(0),
                    Some((c, d)) => {
                        b.push(1);
                        put_str(&mut b, c);
                        put_u64(&mut b, *d);
                    }
                }
                tag::RUN_TALLY
            }
            Frame::TallyPublished(r) => {
                r.encode(&mut b);
                tag::TALLY_PUBLISHED
            }
            Frame::Dump => tag::DUMP,
            Frame::DumpBytes(d) => {
                put_bytes(&mut b, d);
                tag::DUMP_BYTES
            }
            Frame::Ack => tag::ACK,
            Frame::Error { code, detail } => {
                b.push(*code);
                put_str(&mut b, detail);
                tag::ERROR
            }
        };
        WireEnvelope::new(t, b)
    }

    pub fn from_envelope(env: &WireEnvelope) -> Result<Self, WireError> {
        if env.version != VERSION {
            return Err(WireError::Version(env.version));
        }
        if Message::is_known_tag(env.tag) {
            return Ok(Frame::Protocol(Message::decode_body(env.tag, &env.body)?));
        }
        let mut r = Reader::new(&env.body);
        let f = match env.tag {
            tag::SET_CLOCK => Frame::SetClock(r.u64()?),
            tag::BOARD_READ => Frame::BoardRead {
                from: r.u64()?,
                to: r.u64()?,
            },
            tag::BOARD_SLICE => {
                let head = i64::from_be_bytes(r.array()?);
                let entries = evot_core::codec::read_list(&mut r)?;
                Frame::BoardSlice { head, entries }
            }
            tag::APPENDED => Frame::Appended(r.u64()?),
            tag::FORWARD_PENDING => Frame::ForwardPending,
            tag::FORWARD_RECEIPTS => {
                let n = bounded_count(&mut r, 33)?;
                let mut rs = Vec::with_capacity(n);
                for _ in 0..n {
                    rs.push((r.array()?, Signature::decode(&mut r)?));
                }
                Frame::ForwardReceipts(rs)
            }
            tag::PUBLISH_PENDING => {
                let n = bounded_count(&mut r, 32)?;
                Frame::PublishPending((0..n).map(|_| r.array()).collect::<Result<_, _>>()?)
            }
            tag::PUBLISH_RESULTS => {
                let n = bounded_count(&mut r, 33)?;
                let mut rs = Vec::with_capacity(n);
                for _ in 0..n {
                    let d = r.array()?;
                    let res = match r.u8()? {
                        0 => Ok(r.u64()?),
                        1 => Err((r.u8()?, r.string()?)),
                        x => return Err(DecodeError::malformed("publish result", format!("flag {x}")).into()),
                    };
                    rs.push((d, res));
                }
                Frame::PublishResults(rs)
            }
            tag::RUN_TALLY => Frame::RunTally {
                inflate: match r.u8()? {
                    0 => None,
                    1 => Some((r.string()?, r.u64()?)),
                    x => return Err(DecodeError::malformed("tally request", format!("flag {x}")).into()),
                },
            },
            tag::TALLY_PUBLISHED => Frame::TallyPublished(TallyResult::decode(&mut r)?),
            tag::DUMP => Frame::Dump,
            tag::DUMP_BYTES => Frame::DumpBytes(r.bytes()?.to_vec()),
            tag::ACK => Frame::Ack,
            tag::ERROR => Frame::Error {
                code: r.u8()?,
                detail: r.string()?,
            },
            t => return Err(WireError::UnknownTag(t)),
        };
        r.finish()?;
        Ok(f)
    }
}

fn bounded_count(r: &mut Reader<'_>, min_item: usize) -> Result<usize, DecodeError> {
    let n = r.u32()? as usize;
    if n.saturating_mul(min_item) > r.remaining() {
        return Err(DecodeError::malformed("list", format!("count {n} exceeds input")));
    }
    Ok(n)
}
