//! The five role endpoints.
//!
//! Every handler runs the role operation under the role's lock, writes the
//! resulting journal events to the store, and only then replies.

use std::collections::HashSet;
use std::fmt;
use std::net::TcpListener;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use evot_core::codec::{Canonical, DecodeError};
use evot_core::protocol::{
    inflated, AuthorityKeys, Board, BulletinBoard, CountCenter, Entry, ErrorCode, Message, Meter, PollOfficer,
    PublicParams, RegCenter, RoleEvent, VotCenter,
};
use thiserror::Error;

use crate::client::{call, RemoteBoard};
use crate::server::{spawn, Handler, ServerHandle};
use crate::store::{Store, StoreError};
use crate::wire::Frame;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Board,
    Rc,
    Po,
    Vc,
    Cc,
}

impl Role {
    pub const ALL: [Role; 5] = [Role::Board, Role::Rc, Role::Po, Role::Vc, Role::Cc];

    pub fn name(self) -> &'static str {
        match self {
            Role::Board => "board",
            Role::Rc => "rc",
            Role::Po => "po",
            Role::Vc => "vc",
            Role::Cc => "cc",
        }
    }

    fn byte(self) -> u8 {
        self as u8 + 1
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Role::ALL
            .into_iter()
            .find(|r| r.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown role {s:?}; expected board, rc, po, vc or cc"))
    }
}

/// Role clock: wall time, or a value the operator sets.
pub enum Clock {
    System,
    Manual(AtomicU64),
}

impl Clock {
    pub fn now(&self) -> u64 {
        match self {
            Clock::System => SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            Clock::Manual(t) => t.load(Ordering::SeqCst),
        }
    }

    fn set(&self, now: u64) -> Frame {
        match self {
            Clock::Manual(t) => {
                t.store(now, Ordering::SeqCst);
                Frame::Ack
            }
            Clock::System => Frame::fault("this endpoint runs on the system clock"),
        }
    }
}

pub struct RoleConfig {
    pub role: Role,
    pub bind: String,
    pub pp: Arc<PublicParams>,
    /// Required for every role except the board.
    pub keys: Option<AuthorityKeys>,
    /// Eligibility roll; Reg-Center only.
    pub roll: Vec<String>,
    /// Required for every role except the Count-Center, which keeps no state.
    pub store: Option<PathBuf>,
    /// Signing seed for a new store. Tests pin it; otherwise it is random.
    pub seed: Option<[u8; 32]>,
    pub board: Option<String>,
    /// Vot-Center endpoint; Poll-Officer only.
    pub vc: Option<String>,
    pub manual_clock: bool,
    pub meter: Arc<Meter>,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("configuration: {0}")]
    Config(String),
}

pub struct Running {
    pub role: Role,
    pub handle: ServerHandle,
    /// Records replayed from the store.
    pub recovered: usize,
    /// Bytes of a torn final record cut from the store.
    pub discarded: u64,
}

const HEADER_MAGIC: &[u8] = b"evot-role-store-v1";

fn content_err(store: &Store, detail: impl Into<String>) -> ServiceError {
    ServiceError::Store(StoreError::Content {
        path: store.path().to_path_buf(),
        detail: detail.into(),
    })
}

/// Opens a role store whose first record pins the role and its seed.
fn open_role_store(
    role: Role,
    path: &PathBuf,
    seed: Option<[u8; 32]>,
) -> Result<(Store, [u8; 32], Vec<RoleEvent>, u64), ServiceError> {
    let opened = Store::open(path)?;
    let mut store = opened.store;
    let mut records = opened.records.into_iter();
    let stored = match records.next() {
        None => {
            let seed = seed.unwrap_or_else(rand::random);
            let mut header = HEADER_MAGIC.to_vec();
            header.push(role.byte());
            header.extend_from_slice(&seed);
            store.append(&[header])?;
            seed
        }
        Some(h) => {
            let n = HEADER_MAGIC.len();
            if h.len() != n + 33 || &h[..n] != HEADER_MAGIC || h[n] != role.byte() {
                return Err(content_err(&store, format!("not a {role} store")));
            }
            let stored: [u8; 32] = h[n + 1..].try_into().unwrap();
            if seed.is_some_and(|s| s != stored) {
                return Err(content_err(&store, "store was created with a different seed"));
            }
            stored
        }
    };
    let mut events = Vec::new();
    for (i, r) in records.enumerate() {
        let e = RoleEvent::from_bytes(&r).map_err(|e| content_err(&store, format!("record {}: {e}", i + 1)))?;
        events.push(e);
    }
    Ok((store, stored, events, opened.discarded))
}

fn persist(store: &mut Store, events: Vec<RoleEvent>) -> Result<(), Frame> {
    let records: Vec<Vec<u8>> = events.iter().map(Canonical::to_bytes).collect();
    store.append(&records).map_err(|e| Frame::fault(format!("store: {e}")))
}

fn restore_err(e: DecodeError) -> ServiceError {
    ServiceError::Config(format!("store replay: {e}"))
}

pub fn serve_role(cfg: RoleConfig) -> Result<Running, ServiceError> {
    let need = |what: &str| ServiceError::Config(format!("{} endpoint needs {what}", cfg.role));
    let listener = TcpListener::bind(&cfg.bind).map_err(|source| ServiceError::Bind {
        addr: cfg.bind.clone(),
        source,
    })?;
    let clock = if cfg.manual_clock {
        Clock::Manual(AtomicU64::new(0))
    } else {
        Clock::System
    };
    let board = || cfg.board.clone().map(|addr| RemoteBoard { addr }).ok_or_else(|| need("--board"));
    let keys = || cfg.keys.clone().ok_or_else(|| need("--keys"));
    let store_path = || cfg.store.clone().ok_or_else(|| need("--store"));

    let (handler, recovered, discarded): (Arc<dyn Handler>, usize, u64) = match cfg.role {
        Role::Board => {
            let opened = Store::open(store_path()?)?;
            let mut entries = Vec::with_capacity(opened.records.len());
            for (i, r) in opened.records.iter().enumerate() {
                entries.push(Entry::from_bytes(r).map_err(|e| content_err(&opened.store, format!("record {i}: {e}")))?);
            }
            let n = entries.len();
            let board = BulletinBoard::from_entries(entries).map_err(|e| content_err(&opened.store, e.to_string()))?;
            let h = BoardEndpoint {
                board: RwLock::new(board),
                store: Mutex::new(opened.store),
            };
            (Arc::new(h), n, opened.discarded)
        }
        Role::Rc => {
            let (store, seed, events, discarded) = open_role_store(Role::Rc, &store_path()?, cfg.seed)?;
            let n = events.len();
            let rc = RegCenter::new(cfg.pp.clone(), keys()?, cfg.roll.clone(), seed, cfg.meter.clone())
                .restore(events)
                .map_err(restore_err)?;
            let h = RcEndpoint {
                clock,
                state: Mutex::new((rc, store, board()?)),
            };
            (Arc::new(h), n, discarded)
        }
        Role::Po => {
            let (store, seed, events, discarded) = open_role_store(Role::Po, &store_path()?, cfg.seed)?;
            let n = events.len();
            let po = PollOfficer::new(cfg.pp.clone(), keys()?, seed, cfg.meter.clone())
                .restore(events)
                .map_err(restore_err)?;
            let h = PoEndpoint {
                clock,
                state: Mutex::new((po, store)),
                vc: cfg.vc.clone().ok_or_else(|| need("--vc"))?,
            };
            (Arc::new(h), n, discarded)
        }
        Role::Vc => {
            let (store, seed, events, discarded) = open_role_store(Role::Vc, &store_path()?, cfg.seed)?;
            let n = events.len();
            let vc = VotCenter::new(cfg.pp.clone(), keys()?, seed, cfg.meter.clone())
                .restore(events)
                .map_err(restore_err)?;
            let h = VcEndpoint {
                clock,
                state: Mutex::new((vc, store, board()?)),
            };
            (Arc::new(h), n, discarded)
        }
        Role::Cc => {
            let h = CcEndpoint {
                clock,
                state: Mutex::new((CountCenter::new(cfg.pp.clone(), keys()?, cfg.meter.clone()), board()?)),
            };
            (Arc::new(h), 0, 0)
        }
    };
    let handle = spawn(listener, handler).map_err(|source| ServiceError::Bind {
        addr: cfg.bind.clone(),
        source,
    })?;
    Ok(Running {
        role: cfg.role,
        handle,
        recovered,
        discarded,
    })
}

fn not_served(role: Role, req: &Frame) -> Frame {
    Frame::fault(format!("{role} does not serve tag {:#04x}", req.to_envelope().tag))
}

fn err(e: &(impl ErrorCode + fmt::Display)) -> Frame {
    Frame::error(e)
}

struct BoardEndpoint {
    board: RwLock<BulletinBoard>,
    store: Mutex<Store>,
}

impl Handler for BoardEndpoint {
    fn handle(&self, req: Frame) -> Frame {
        match req {
            Frame::BoardRead { from, to } => {
                let s = self.board.read().unwrap().read(from, to);
                Frame::BoardSlice {
                    head: s.head,
                    entries: s.entries,
                }
            }
            Frame::Protocol(Message::BoardPost { kind, payload }) => {
                let mut store = self.store.lock().unwrap();
                let mut board = self.board.write().unwrap();
                let seq = board.len() as u64;
                let prev_hash = board.entries().last().map_or([0u8; 32], |e| e.entry_hash);
                let entry = Entry {
                    seq,
                    kind,
                    entry_hash: Entry::compute_hash(seq, kind, &payload, &prev_hash),
                    payload,
                    prev_hash,
                };
                if let Err(e) = store.append(&[entry.to_bytes()]) {
                    return Frame::fault(format!("store: {e}"));
                }
                board.push(entry.kind, entry.payload);
                Frame::Appended(seq)
            }
            other => not_served(Role::Board, &other),
        }
    }
}

struct RcEndpoint {
    clock: Clock,
    state: Mutex<(RegCenter, Store, RemoteBoard)>,
}

impl Handler for RcEndpoint {
    fn handle(&self, req: Frame) -> Frame {
        match req {
            Frame::SetClock(t) => self.clock.set(t),
            Frame::Protocol(Message::RegisterRequest { id, pseudonym }) => {
                let mut g = self.state.lock().unwrap();
                let (rc, store, board) = &mut *g;
                let res = rc.register(&id, &pseudonym, self.clock.now(), board);
                if let Err(f) = persist(store, rc.take_events()) {
                    return f;
                }
                match res {
                    Ok(t) => Frame::Protocol(Message::TicketIssued(t)),
                    Err(e) => err(&e),
                }
            }
            other => not_served(Role::Rc, &other),
        }
    }
}

struct PoEndpoint {
    clock: Clock,
    state: Mutex<(PollOfficer, Store)>,
    vc: String,
}

impl PoEndpoint {
    fn forward(&self, po: &mut PollOfficer) -> Frame {
        let mut out = Vec::new();
        for ev in po.pending_forward() {
            match call(&self.vc, &Frame::Protocol(Message::ForwardBallot(ev.clone()))) {
                Ok(Frame::Protocol(Message::ForwardReceipt(r))) => {
                    po.record_forward(&ev, r.clone());
                    out.push((evot_core::protocol::messages::receipt_digest(&ev), r));
                }
                Ok(f @ Frame::Error { .. }) => return f,
                Ok(f) => return Frame::fault(format!("Vot-Center replied with tag {:#04x}", f.to_envelope().tag)),
                Err(e) => return Frame::fault(format!("Vot-Center: {e}")),
            }
        }
        Frame::ForwardReceipts(out)
    }
}

impl Handler for PoEndpoint {
    fn handle(&self, req: Frame) -> Frame {
        let mut g = self.state.lock().unwrap();
        let (po, store) = &mut *g;
        let reply = match req {
            Frame::SetClock(t) => return self.clock.set(t),
            Frame::Dump => {
                let mut out = Vec::new();
                for e in po.journal() {
                    e.encode(&mut out);
                }
                return Frame::DumpBytes(out);
            }
            Frame::Protocol(Message::TicketSubmission(et)) => match po.open_session(&et, self.clock.now()) {
                Ok(s) => Frame::Protocol(Message::SessionOpened(s)),
                Err(e) => err(&e),
            },
            Frame::Protocol(Message::CommitmentSubmission { session, commitment }) => {
                match po.sign_bundle(session, commitment) {
                    Ok(b) => Frame::Protocol(Message::ObliviousBundle(b)),
                    Err(e) => err(&e),
                }
            }
            Frame::Protocol(Message::CastBallot { session, ev }) => match po.accept_cast(session, &ev) {
                Ok(r) => Frame::Protocol(Message::CastReceipt(r)),
                Err(e) => err(&e),
            },
            Frame::ForwardPending => self.forward(po),
            other => return not_served(Role::Po, &other),
        };
        match persist(store, po.take_events()) {
            Ok(()) => reply,
            Err(f) => f,
        }
    }
}

struct VcEndpoint {
    clock: Clock,
    state: Mutex<(VotCenter, Store, RemoteBoard)>,
}

impl Handler for VcEndpoint {
    fn handle(&self, req: Frame) -> Frame {
        let mut g = self.state.lock().unwrap();
        let (vc, store, board) = &mut *g;
        let reply = match req {
            Frame::SetClock(t) => return self.clock.set(t),
            Frame::Dump => {
                let mut out = Vec::new();
                for e in vc.journal() {
                    e.encode(&mut out);
                }
                return Frame::DumpBytes(out);
            }
            Frame::Protocol(Message::ForwardBallot(ev)) => match vc.receive(&ev) {
                Ok(r) => Frame::Protocol(Message::ForwardReceipt(r)),
                Err(e) => err(&e),
            },
            Frame::PublishPending(skip) => {
                let skip: HashSet<_> = skip.into_iter().collect();
                let rs = vc.publish_pending(self.clock.now(), board, &skip);
                Frame::PublishResults(
                    rs.into_iter()
                        .map(|(d, r)| (d, r.map_err(|e| (e.code(), e.to_string()))))
                        .collect(),
                )
            }
            other => return not_served(Role::Vc, &other),
        };
        match persist(store, vc.take_events()) {
            Ok(()) => reply,
            Err(f) => f,
        }
    }
}

struct CcEndpoint {
    clock: Clock,
    state: Mutex<(CountCenter, RemoteBoard)>,
}

impl Handler for CcEndpoint {
    fn handle(&self, req: Frame) -> Frame {
        match req {
            Frame::SetClock(t) => self.clock.set(t),
            Frame::Dump => Frame::DumpBytes(self.state.lock().unwrap().0.secret_bytes()),
            Frame::RunTally { inflate } => {
                let mut g = self.state.lock().unwrap();
                let (cc, board) = &mut *g;
                let entries = match board.read_all() {
                    Ok(e) => e,
                    Err(e) => return Frame::fault(e.to_string()),
                };
                let outcome = match cc.tally(&entries, self.clock.now()) {
                    Ok(o) => o,
                    Err(e) => return err(&e),
                };
                let published = inflated(&outcome.result, inflate.as_ref().map(|(c, d)| (c.as_str(), *d)));
                match cc.publish(&outcome, &published, board) {
                    Ok(_) => Frame::TallyPublished(published),
                    Err(e) => err(&e),
                }
            }
            other => not_served(Role::Cc, &other),
        }
    }
}
