use std::collections::HashSet;
use std::sync::Arc;

use evot_core::codec::Canonical;
use evot_core::protocol::messages::receipt_digest;
use evot_core::protocol::{
    audit, derive_rng, po_forward_batch, prepare_election, voter_check_board, voting_round, AuditError, AuditVerdict,
    BoardCheck, BulletinBoard, Deployment, Entry, EntryKind, InProcess, Manifest, Meter, ObliviousBundle,
    ParamSet, PollOfficer, PublicParams, RegCenter, RegError, RoleSecrets, TallyError, TallyMark, VcError, VotCenter,
    VoteError, Voter, WithholdingEvidence, Window,
};
use evot_core::protocol::{role_seed, Authority};
use evot_core::scenario::{render_op_counts, run_scenario, op_count_rows, ParamProfile, Scenario};

const REG: u64 = 1_000;
const VOTE: u64 = 2_001;
const TALLY: u64 = 3_000;

struct World {
    pp: Arc<PublicParams>,
    secrets: RoleSecrets,
    meter: Arc<Meter>,
    dep: InProcess,
}

fn world(candidates: &[&str], roll: &[&str], params: ParamSet) -> World {
    let manifest = Manifest {
        election_id: "t".into(),
        candidates: candidates.iter().map(|c| c.to_string()).collect(),
        registration: Window { start: 1_000, end: 2_000 },
        voting: Window { start: 2_000, end: 3_000 },
        tally_start: 3_000,
    };
    let meter = Arc::new(Meter::new());
    let (pp, secrets) = prepare_election(manifest, params, &mut derive_rng(77, "prepare"), &meter).unwrap();
    let pp = Arc::new(pp);
    let roll: Vec<String> = roll.iter().map(|s| s.to_string()).collect();
    let dep = InProcess::new(pp.clone(), &secrets, roll, 77, meter.clone());
    World { pp, secrets, meter, dep }
}

impl World {
    fn voter(&self, id: &str) -> Voter {
        Voter::new(id, self.pp.clone(), derive_rng(5, id), self.meter.clone())
    }

    fn registered(&mut self, id: &str) -> Voter {
        let mut v = self.voter(id);
        let p = v.make_pseudonym();
        self.dep.set_time(REG).unwrap();
        v.set_ticket(self.dep.register(id, &p).unwrap());
        v
    }

    fn vote(&mut self, v: &mut Voter, choice: usize) -> Result<(), VoteError> {
        self.dep.set_time(VOTE).unwrap();
        voting_round(v, &mut self.dep, choice, VOTE).map(|_| ())
    }

    fn finish(&mut self) {
        self.dep.forward_pending().unwrap();
        self.dep.set_time(VOTE + 10).unwrap();
        for (_, r) in self.dep.publish_pending(&HashSet::new()).unwrap() {
            r.unwrap();
        }
        self.dep.set_time(TALLY).unwrap();
        self.dep.run_tally(None).unwrap();
    }

    fn ballots(&self) -> usize {
        self.dep.board.entries().iter().filter(|e| e.kind == EntryKind::Ballot).count()
    }
}

fn tiny() -> ParamSet {
    ParamSet::TINY
}

#[test]
fn operation_counts_follow_the_cost_table() {
    for (l, profile) in [(2, ParamProfile::Reference), (5, ParamProfile::Tiny), (10, ParamProfile::Tiny)] {
        let names: Vec<String> = (0..l).map(|i| format!("C{i}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let per: Vec<usize> = (0..l).map(|i| 1 + i % 2).collect();
        let r = run_scenario(&Scenario::honest("counts", l as u64, profile, &names, &per)).unwrap();
        for row in op_count_rows(&r.counters) {
            assert!(row.matches, "L={l}\n{}", render_op_counts(&r.counters));
        }
        let voting = r.counters.voting.per_unit.unwrap();
        assert_eq!((voting.enc, voting.sign, voting.ver, voting.dec), (3, l as u64 + 1, l as u64 + 1, 1));
        assert_eq!(r.counters.forwarding.per_unit.unwrap().sign, 1);
    }
}

#[test]
fn registration_errors() {
    let mut w = world(&["A", "B"], &["alice", "bob"], tiny());
    let mut alice = w.voter("alice");
    let p = alice.make_pseudonym();

    w.dep.set_time(999).unwrap();
    assert_eq!(w.dep.register("alice", &p), Err(RegError::WindowClosed));
    w.dep.set_time(REG).unwrap();
    assert_eq!(w.dep.register("mallory", &p), Err(RegError::NotEligible));
    let short = evot_core::field::FieldVector::zeros(p.len() + 1);
    assert!(matches!(w.dep.register("alice", &short), Err(RegError::Malformed(_))));
    w.dep.register("alice", &p).unwrap();
    assert_eq!(w.dep.register("alice", &p), Err(RegError::AlreadyRegistered));
    assert_eq!(w.dep.register("bob", &p), Err(RegError::DuplicatePseudonym));
    assert_eq!(w.dep.board.len(), 1);
}

#[test]
fn ticket_replay_is_rejected_and_counted_once() {
    let mut w = world(&["A", "B"], &["alice"], tiny());
    let mut alice = w.registered("alice");
    w.vote(&mut alice, 0).unwrap();
    alice.reset_round();
    assert_eq!(w.vote(&mut alice, 1), Err(VoteError::TicketReused));
    w.finish();
    assert_eq!(w.ballots(), 1);
    let AuditVerdict::Consistent(r) = audit(w.dep.board.entries(), &w.pp).unwrap() else {
        panic!("audit")
    };
    assert_eq!(r.counts, vec![("A".to_string(), 1), ("B".to_string(), 0)]);
}

#[test]
fn session_errors() {
    let mut w = world(&["A", "B"], &["alice"], tiny());
    let mut alice = w.registered("alice");
    w.dep.set_time(VOTE).unwrap();

    // outside the freshness window
    let et = alice.present_ticket(VOTE + 121).unwrap();
    assert_eq!(w.dep.submit_ticket(&et), Err(VoteError::StaleTime));
    let et = alice.present_ticket(VOTE).unwrap();
    w.dep.set_time(3_000).unwrap();
    assert_eq!(w.dep.submit_ticket(&et), Err(VoteError::WindowClosed));
    w.dep.set_time(VOTE).unwrap();

    let session = w.dep.submit_ticket(&et).unwrap();
    let ev = evot_core::mqe::encrypt(
        &w.pp.enc[Authority::VotCenter],
        b"x",
        &mut derive_rng(1, "junk"),
    );
    assert_eq!(w.dep.cast(session, &ev), Err(VoteError::OutOfOrder));
    let mut other = session.clone();
    other.0[0] ^= 1;
    let c = alice.commit_to(0).unwrap();
    assert_eq!(w.dep.submit_commitment(other, c), Err(VoteError::UnknownSession));
    w.dep.submit_commitment(session, c).unwrap();
    assert_eq!(w.dep.submit_commitment(session, c), Err(VoteError::OutOfOrder));
    assert_eq!(voting_round(&mut alice, &mut w.dep, 7, VOTE), Err(VoteError::InvalidChoice));
}

#[test]
fn corrupted_bundle_is_refused_after_checking_every_signature() {
    let mut w = world(&["A", "B", "C"], &["alice"], tiny());
    let mut alice = w.registered("alice");
    w.dep.set_time(VOTE).unwrap();
    let et = alice.present_ticket(VOTE).unwrap();
    let session = w.dep.submit_ticket(&et).unwrap();
    let c = alice.commit_to(1).unwrap();
    let ObliviousBundle(mut sigs) = w.dep.submit_commitment(session, c).unwrap();
    sigs.swap(0, 2);

    let before = w.meter.snapshot();
    assert_eq!(alice.receive_bundle(&ObliviousBundle(sigs.clone())), Err(VoteError::BadObliviousBundle));
    assert_eq!((w.meter.snapshot() - before).ver, 3);
    // a bundle of the wrong length
    sigs.pop();
    assert_eq!(alice.receive_bundle(&ObliviousBundle(sigs)), Err(VoteError::BadObliviousBundle));
    assert!(alice.cast_ballot().is_none());
}

#[test]
fn vot_center_is_idempotent_and_refuses_duplicates() {
    let mut w = world(&["A", "B"], &["alice"], tiny());
    let mut alice = w.registered("alice");
    w.vote(&mut alice, 0).unwrap();
    let ev1 = alice.cast_ballot().unwrap().clone();

    // a second Poll-Officer with no memory of the ticket lets alice cast again
    let mut po2 = PollOfficer::new(
        w.pp.clone(),
        w.secrets[Authority::PollOfficer].clone(),
        [9; 32],
        w.meter.clone(),
    );
    alice.reset_round();
    let et = alice.present_ticket(VOTE).unwrap();
    let s = po2.open_session(&et, VOTE).unwrap();
    let c = alice.commit_to(1).unwrap();
    let b = po2.sign_bundle(s, c).unwrap();
    let ev2 = alice.receive_bundle(&b).unwrap();
    assert_ne!(ev1, ev2);

    let vc = &mut w.dep.vc;
    let r1 = vc.receive(&ev1).unwrap();
    assert_eq!(vc.receive(&ev1).unwrap(), r1);
    let seq = vc.verify_and_publish(&ev1, VOTE, &mut w.dep.board).unwrap();
    assert_eq!(vc.verify_and_publish(&ev1, VOTE, &mut w.dep.board).unwrap(), seq);
    vc.receive(&ev2).unwrap();
    assert_eq!(vc.verify_and_publish(&ev2, VOTE, &mut w.dep.board), Err(VcError::Duplicate));
    // already published, so a late resubmission still answers with its seq
    assert_eq!(vc.verify_and_publish(&ev1, TALLY, &mut w.dep.board), Ok(seq));
    assert_eq!(w.ballots(), 1);
}

#[test]
fn vot_center_rejects_garbage_and_late_ballots() {
    let mut w = world(&["A", "B"], &["alice", "bob"], tiny());
    let mut alice = w.registered("alice");
    let mut bob = w.registered("bob");
    w.vote(&mut alice, 0).unwrap();
    w.vote(&mut bob, 0).unwrap();
    let mut bad = alice.cast_ballot().unwrap().clone();
    bad.body[0] ^= 1;
    let vc = &mut w.dep.vc;
    assert_eq!(vc.verify_and_publish(&bad, VOTE, &mut w.dep.board), Err(VcError::DecryptFailed));
    let late = bob.cast_ballot().unwrap().clone();
    assert_eq!(vc.verify_and_publish(&late, TALLY, &mut w.dep.board), Err(VcError::TallyStarted));
}

#[test]
fn withholding_evidence_tracks_the_board() {
    let mut w = world(&["A", "B"], &["alice", "bob"], tiny());
    let mut alice = w.registered("alice");
    let mut bob = w.registered("bob");
    w.vote(&mut alice, 0).unwrap();
    w.vote(&mut bob, 1).unwrap();
    w.dep.forward_pending().unwrap();
    let skip: HashSet<_> = [receipt_digest(alice.cast_ballot().unwrap())].into();
    w.dep.publish_pending(&skip).unwrap();

    let entries = w.dep.board.entries().to_vec();
    assert_eq!(voter_check_board(alice.ballot().unwrap(), &entries), BoardCheck::Missing);
    assert!(matches!(voter_check_board(bob.ballot().unwrap(), &entries), BoardCheck::Found(_)));
    let ev = WithholdingEvidence::from_voter(&alice).unwrap();
    assert!(ev.holds(&w.pp, &entries));
    // a forged receipt is not evidence
    let mut forged = ev.clone();
    forged.receipt = bob.receipt().unwrap().clone();
    assert!(!forged.holds(&w.pp, &entries));

    w.dep.publish_pending(&HashSet::new()).unwrap();
    assert!(!ev.holds(&w.pp, w.dep.board.entries()));
}

#[test]
fn tally_timing_and_single_publication() {
    let mut w = world(&["A", "B"], &["alice"], tiny());
    let mut alice = w.registered("alice");
    w.vote(&mut alice, 1).unwrap();
    w.dep.forward_pending().unwrap();
    w.dep.publish_pending(&HashSet::new()).unwrap();
    w.dep.set_time(TALLY - 1).unwrap();
    assert_eq!(w.dep.run_tally(None), Err(TallyError::VotingOpen));
    w.dep.set_time(TALLY).unwrap();
    w.dep.run_tally(None).unwrap();
    assert_eq!(w.dep.run_tally(None), Err(TallyError::AlreadyPublished));
}

/// Rebuilds a board from (kind, payload) pairs with a fresh, valid chain.
fn rechain(items: impl IntoIterator<Item = (EntryKind, Vec<u8>)>) -> Vec<Entry> {
    let mut b = BulletinBoard::new();
    for (k, p) in items {
        b.push(k, p);
    }
    b.entries().to_vec()
}

fn honest_board() -> (Arc<PublicParams>, Vec<Entry>) {
    let mut w = world(&["A", "B"], &["alice", "bob", "carol"], tiny());
    for (id, c) in [("alice", 0), ("bob", 1), ("carol", 1)] {
        let mut v = w.registered(id);
        w.vote(&mut v, c).unwrap();
    }
    w.finish();
    (w.pp.clone(), w.dep.board.entries().to_vec())
}

fn discrepancy(pp: &PublicParams, entries: &[Entry]) -> (u64, String) {
    match audit(entries, pp) {
        Ok(AuditVerdict::Discrepancy { seq, detail }) => (seq, detail),
        other => panic!("expected a discrepancy, got {other:?}"),
    }
}

#[test]
fn audit_detects_tampering() {
    let (pp, board) = honest_board();
    assert!(audit(&board, &pp).unwrap().is_consistent());
    let items = || board.iter().map(|e| (e.kind, e.payload.clone()));
    let first_mark = board.iter().position(|e| e.kind == EntryKind::TallyMark).unwrap();
    let final_seq = board.iter().position(|e| e.kind == EntryKind::FinalTally).unwrap() as u64;

    // payload edited in place: the chain breaks there
    let mut edited = board.clone();
    edited[first_mark].payload[0] ^= 1;
    assert_eq!(discrepancy(&pp, &edited).0, first_mark as u64);

    // a mark silently dropped and the chain rebuilt
    let dropped = rechain(items().enumerate().filter(|(i, _)| *i != first_mark).map(|(_, x)| x));
    let mark = TallyMark::from_bytes(&board[first_mark].payload).unwrap();
    assert_eq!(discrepancy(&pp, &dropped).0, mark.ballot_seq);

    // a mark moved to the other candidate
    let moved = rechain(items().enumerate().map(|(i, (k, p))| {
        if i == first_mark {
            let mut m = TallyMark::from_bytes(&p).unwrap();
            m.candidate = if m.candidate == "A" { "B".into() } else { "A".into() };
            (k, m.to_bytes())
        } else {
            (k, p)
        }
    }));
    assert_eq!(discrepancy(&pp, &moved).0, first_mark as u64);

    // a ballot slipped in after the count
    let ballot = board.iter().find(|e| e.kind == EntryKind::Ballot).unwrap().payload.clone();
    let mut late: Vec<_> = items().collect();
    late.insert(final_seq as usize, (EntryKind::Ballot, ballot));
    let (seq, _) = discrepancy(&pp, &rechain(late));
    assert!(seq >= first_mark as u64);

    // a disclosed key that does not match the published one
    let (_, other_secrets) =
        prepare_election(pp.manifest.clone(), tiny(), &mut derive_rng(1, "other"), &Meter::new()).unwrap();
    let wrong_key = rechain(items().map(|(k, p)| {
        if k == EntryKind::CCKeyDisclosure {
            (k, other_secrets[Authority::CountCenter].enc.secret.to_bytes())
        } else {
            (k, p)
        }
    }));
    assert_eq!(discrepancy(&pp, &wrong_key).0, board.len() as u64 - 1);

    // before the disclosure nothing can be checked
    assert_eq!(audit(&board[..board.len() - 1], &pp), Err(AuditError::NotYetPublic));
}

#[test]
fn journals_restore_role_state() {
    let mut w = world(&["A", "B"], &["alice", "bob"], tiny());
    let mut alice = w.registered("alice");
    w.vote(&mut alice, 0).unwrap();
    po_forward_batch(&mut w.dep.po, &mut w.dep.vc).unwrap();

    let rc_events = w.dep.rc.take_events();
    let po_events = w.dep.po.take_events();
    let vc_events = w.dep.vc.take_events();
    assert!(w.dep.po.take_events().is_empty());

    let keys = |a| w.secrets[a].clone();
    let mut rc = RegCenter::new(w.pp.clone(), keys(Authority::RegCenter), ["alice".to_string()], role_seed(77, "rc"), w.meter.clone())
        .restore(rc_events)
        .unwrap();
    let p = alice.pseudonym().unwrap().clone();
    assert_eq!(rc.register("alice", &p, REG, &mut w.dep.board), Err(RegError::AlreadyRegistered));

    let mut po = PollOfficer::new(w.pp.clone(), keys(Authority::PollOfficer), role_seed(77, "po"), w.meter.clone())
        .restore(po_events.clone())
        .unwrap();
    assert_eq!(po.used_ticket_count(), 1);
    alice.reset_round();
    let et = alice.present_ticket(VOTE).unwrap();
    assert_eq!(po.open_session(&et, VOTE), Err(VoteError::TicketReused));
    assert!(po.pending_forward().is_empty());

    let mut vc = VotCenter::new(w.pp.clone(), keys(Authority::VotCenter), role_seed(77, "vc"), w.meter.clone())
        .restore(vc_events)
        .unwrap();
    assert_eq!(vc.pending().len(), 1);
    let out = vc.publish_pending(VOTE, &mut w.dep.board, &HashSet::new());
    assert_eq!(out.len(), 1);
    assert!(out[0].1.is_ok());
    assert!(vc.pending().is_empty());

    // journals from the wrong role do not replay
    let rc2 = RegCenter::new(w.pp.clone(), keys(Authority::RegCenter), Vec::<String>::new(), [0; 32], w.meter.clone());
    assert!(rc2.restore(po_events).is_err());
}
