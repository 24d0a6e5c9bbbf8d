use std::io::Write;
use std::net::TcpStream;
use std::sync::Arc;
use std::thread;

use evot_core::protocol::{
    derive_rng, verify_chain, voting_round, Board, Deployment, Meter, PublicParams, RoleSecrets, VoteError, Voter,
};
use evot_core::scenario::{prepare, run_scenario, run_scenario_on, ParamProfile, Scenario, REGISTRATION, VOTING};
use evot_service::wire::{tag, VERSION, WIRE_FAULT};
use evot_service::{cluster_config, launch_cluster, serve_role, Cluster, Frame, RemoteBoard, Role, RoleConfig, ServiceError, StoreError};

const ADVERSARIAL: &str = "\
election wire
candidates A B C
seed 11
params tiny
voters 5 votes A
voter bob votes B
voter carol votes C
adversary replay-ticket bob
adversary forge-ticket eve votes C
adversary outsider mal votes B
adversary vc-withhold voter-0003
adversary cc-inflate B 1
adversary collude
";

struct Setup {
    s: Scenario,
    pp: Arc<PublicParams>,
    secrets: RoleSecrets,
    meter: Arc<Meter>,
}

fn setup(s: Scenario) -> Setup {
    let meter = Arc::new(Meter::new());
    let (pp, secrets) = prepare(&s, &meter).unwrap();
    Setup {
        s,
        pp: Arc::new(pp),
        secrets,
        meter,
    }
}

fn cluster(st: &Setup, dir: &std::path::Path) -> Cluster {
    launch_cluster(st.pp.clone(), &st.secrets, &st.s.roll(), st.s.seed, dir, st.meter.clone()).unwrap()
}

fn assert_wire_matches_in_process(s: Scenario) {
    let local = run_scenario(&s).unwrap();
    assert!(local.passed(), "{:?}", local.failures);

    let dir = tempfile::tempdir().unwrap();
    let st = setup(s);
    let c = cluster(&st, dir.path());
    let mut dep = c.deployment();
    let remote = run_scenario_on(&st.s, st.pp.clone(), &mut dep, &st.meter).unwrap();
    assert!(remote.passed(), "{:?}", remote.failures);
    assert_eq!(remote.board_bytes(), local.board_bytes());
    assert_eq!(remote.published, local.published);
    assert_eq!(remote.counters.voting, local.counters.voting);
    assert_eq!(remote.counters.tally, local.counters.tally);
    // the board store is the export format
    c.shutdown();
    assert_eq!(std::fs::read(dir.path().join("board.log")).unwrap(), local.board_bytes());
}

#[test]
fn wire_board_is_byte_identical_with_adversaries() {
    assert_wire_matches_in_process(Scenario::parse(ADVERSARIAL).unwrap());
}

#[test]
fn wire_board_is_byte_identical_at_reference_parameters() {
    assert_wire_matches_in_process(Scenario::honest("ref", 5, ParamProfile::Reference, &["X", "Y", "Z"], &[4, 3, 3]));
}

fn registered_voter(st: &Setup, dep: &mut dyn Deployment, id: &str) -> Voter {
    let mut v = Voter::new(id, st.pp.clone(), derive_rng(st.s.seed, id), st.meter.clone());
    let p = v.make_pseudonym();
    v.set_ticket(dep.register(id, &p).unwrap());
    v
}

#[test]
fn restarted_poll_officer_still_rejects_used_tickets() {
    let dir = tempfile::tempdir().unwrap();
    let st = setup(Scenario::honest("restart", 2, ParamProfile::Tiny, &["A", "B"], &[2, 1]));
    let mut c = cluster(&st, dir.path());
    let mut dep = c.deployment();
    dep.set_time(REGISTRATION.start).unwrap();
    let mut alice = registered_voter(&st, &mut dep, "voter-0001");
    let mut bob = registered_voter(&st, &mut dep, "voter-0002");
    dep.set_time(VOTING.start + 1).unwrap();
    let (ev, receipt) = voting_round(&mut alice, &mut dep, 0, VOTING.start + 1).unwrap();

    // kill the PO and bring it back on the same address and store
    let po = c.running.remove(2);
    assert_eq!(po.role, Role::Po);
    let addr = po.handle.addr().to_string();
    po.handle.shutdown();
    let cfg = RoleConfig {
        vc: Some(c.endpoints.vc.clone()),
        seed: None,
        ..cluster_config(Role::Po, &addr, &st.pp, &st.secrets, &[], st.s.seed, dir.path(), &st.meter)
    };
    let po = serve_role(cfg).unwrap();
    assert_eq!(po.recovered, 3);
    c.running.insert(2, po);
    dep.set_time(VOTING.start + 2).unwrap();

    alice.reset_round();
    assert_eq!(voting_round(&mut alice, &mut dep, 1, VOTING.start + 2), Err(VoteError::TicketReused));
    assert!(voting_round(&mut bob, &mut dep, 1, VOTING.start + 2).is_ok());
    let fwd = dep.forward_pending().unwrap();
    assert_eq!(fwd.len(), 2);
    assert_ne!(ev, *bob.cast_ballot().unwrap());
    assert!(evot_core::mqs::verify(
        &evot_core::protocol::messages::receipt_digest(&ev),
        &receipt,
        &st.pp.sig[evot_core::protocol::Authority::PollOfficer]
    ));
    c.shutdown();
}

fn raw_exchange(addr: &str, bytes: &[u8]) -> Frame {
    let mut s = TcpStream::connect(addr).unwrap();
    s.write_all(bytes).unwrap();
    let env = evot_service::WireEnvelope::read_from(&mut s).unwrap().unwrap();
    Frame::from_envelope(&env).unwrap()
}

#[test]
fn malformed_envelopes_get_errors_and_change_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let st = setup(Scenario::honest("malformed", 3, ParamProfile::Tiny, &["A", "B"], &[1, 1]));
    let c = cluster(&st, dir.path());
    let mut dep = c.deployment();
    dep.set_time(REGISTRATION.start).unwrap();
    let mut v = registered_voter(&st, &mut dep, "voter-0001");
    dep.set_time(VOTING.start + 1).unwrap();
    let store = dir.path().join("po.log");
    let before = std::fs::read(&store).unwrap();

    let cases: Vec<Vec<u8>> = vec![
        vec![0x02, tag::ACK, 0, 0, 0, 0],
        vec![VERSION, 0x55, 0, 0, 0, 0],
        vec![VERSION, 0x03, 0, 0, 0, 3, 1, 2, 3],
        vec![VERSION, tag::BOARD_READ, 0, 0, 0, 1, 9],
    ];
    for bytes in cases {
        match raw_exchange(&c.endpoints.po, &bytes) {
            Frame::Error { code, .. } => assert_eq!(code, WIRE_FAULT),
            f => panic!("expected an error frame, got {f:?}"),
        }
    }
    // a well-formed message the PO does not serve
    let mut s = TcpStream::connect(&c.endpoints.po).unwrap();
    Frame::RunTally { inflate: None }.to_envelope().write_to(&mut s).unwrap();
    let reply = evot_service::WireEnvelope::read_from(&mut s).unwrap().unwrap();
    assert!(matches!(Frame::from_envelope(&reply).unwrap(), Frame::Error { code: WIRE_FAULT, .. }));
    // an undecryptable ticket is a protocol error with its own code
    let mut et = v.present_ticket(VOTING.start + 1).unwrap();
    et.tag[0] ^= 1;
    assert_eq!(dep.submit_ticket(&et), Err(VoteError::Undecryptable));

    assert_eq!(std::fs::read(&store).unwrap(), before);
    // the connection that sent garbage is closed; the endpoint keeps serving
    let mut s = TcpStream::connect(&c.endpoints.po).unwrap();
    s.write_all(&[0x09]).unwrap();
    drop(s);
    assert_eq!(evot_service::call(&c.endpoints.po, &Frame::SetClock(5)).unwrap(), Frame::Ack);
    c.shutdown();
}

#[test]
fn concurrent_ticket_replays_open_one_session() {
    let dir = tempfile::tempdir().unwrap();
    let st = setup(Scenario::honest("race", 4, ParamProfile::Tiny, &["A", "B"], &[1, 0]));
    let c = cluster(&st, dir.path());
    let mut dep = c.deployment();
    dep.set_time(REGISTRATION.start).unwrap();
    let mut v = registered_voter(&st, &mut dep, "voter-0001");
    dep.set_time(VOTING.start + 1).unwrap();
    let et = v.present_ticket(VOTING.start + 1).unwrap();

    let results: Vec<_> = (0..16)
        .map(|_| {
            let mut d = c.deployment();
            let et = et.clone();
            thread::spawn(move || d.submit_ticket(&et))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| h.join().unwrap())
        .collect();
    assert_eq!(results.iter().filter(|r| r.is_ok()).count(), 1);
    assert!(results
        .iter()
        .filter_map(|r| r.as_ref().err())
        .all(|e| *e == VoteError::TicketReused));
    c.shutdown();
}

#[test]
fn board_reads_and_tampered_store() {
    let dir = tempfile::tempdir().unwrap();
    let st = setup(Scenario::honest("board", 6, ParamProfile::Tiny, &["A", "B"], &[2, 1]));
    let mut c = cluster(&st, dir.path());
    let board = RemoteBoard {
        addr: c.endpoints.board.clone(),
    };
    let empty = board.read_range(0, u64::MAX).unwrap();
    assert!(empty.entries.is_empty());
    assert_eq!(empty.head, -1);

    let mut dep = c.deployment();
    dep.set_time(REGISTRATION.start).unwrap();
    for id in ["voter-0001", "voter-0002", "voter-0003"] {
        registered_voter(&st, &mut dep, id);
    }
    let all = board.read_range(0, u64::MAX).unwrap();
    assert_eq!(all.head, 2);
    verify_chain(&all.entries).unwrap();
    let tail = board.read_range(1, 99).unwrap();
    assert_eq!(tail.entries.len(), 2);
    assert_eq!(tail.head, 2);

    let b = c.running.remove(0);
    b.handle.shutdown();
    let path = dir.path().join("board.log");
    let mut bytes = std::fs::read(&path).unwrap();
    // flip a payload byte of entry 1 and refresh its record digest so only
    // the hash chain can notice
    let records = evot_core::logfile::scan(&bytes).unwrap().records;
    let mut offset = 0;
    for r in &records[..1] {
        offset += 4 + r.len() + 32;
    }
    let mut rec = records[1].clone();
    let last = rec.len() - 70;
    rec[last] ^= 1;
    let mut framed = Vec::new();
    evot_core::logfile::frame(&rec, &mut framed);
    bytes.splice(offset..offset + framed.len(), framed);
    std::fs::write(&path, &bytes).unwrap();

    let cfg = cluster_config(Role::Board, "127.0.0.1:0", &st.pp, &st.secrets, &[], st.s.seed, dir.path(), &st.meter);
    match serve_role(cfg) {
        Err(ServiceError::Store(StoreError::Content { detail, .. })) => assert!(detail.contains("entry 1"), "{detail}"),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("tampered board store was accepted"),
    }
    c.shutdown();
}
