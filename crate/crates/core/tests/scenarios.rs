use std::fs;
use std::path::{Path, PathBuf};

use evot_core::protocol::{AuditVerdict, BoardCheck};
use evot_core::scenario::{render_op_counts, render_sizes, run_scenario, Directive, Scenario, ScenarioReport};

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> Scenario {
    let text = fs::read_to_string(fixture_dir().join(name)).unwrap();
    Scenario::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run(name: &str) -> ScenarioReport {
    let r = run_scenario(&load(name)).unwrap();
    assert!(r.failures.is_empty(), "{name}: {:?}", r.failures);
    for o in &r.outcomes {
        assert!(o.passed, "{name}: {o:?}");
    }
    assert!(r.passed(), "{name}");
    r
}

/// Compares against a checked-in file; `UPDATE_GOLDEN=1` rewrites it.
fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
    assert_eq!(actual, expected, "{name} drifted; rerun with UPDATE_GOLDEN=1 if intended");
}

#[test]
fn every_fixture_passes() {
    let mut names: Vec<_> = fs::read_dir(fixture_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".scn"))
        .collect();
    names.sort();
    assert!(names.len() >= 10);
    for n in names {
        run(&n);
    }
}

#[test]
fn honest_fixtures_tally_the_script() {
    for (name, voters, l) in [("honest-10.scn", 10, 2), ("honest-50.scn", 50, 5), ("honest-200.scn", 200, 10)] {
        let r = run(name);
        let s = &r.scenario;
        assert_eq!((s.voters.len(), s.candidates.len()), (voters, l));
        let Ok(AuditVerdict::Consistent(result)) = &r.audit else {
            panic!("{name}: {:?}", r.audit)
        };
        assert_eq!(result.counts, s.expected_counts());
        assert_eq!(r.published.as_ref(), Some(result));
        assert!(r.voter_checks.iter().all(|(_, c)| matches!(c, BoardCheck::Found(_))));
    }
}

#[test]
fn runs_are_deterministic() {
    let a = run("mixed.scn");
    let b = run("mixed.scn");
    assert_eq!(a.board_bytes(), b.board_bytes());
    assert_eq!(render_op_counts(&a.counters), render_op_counts(&b.counters));
}

#[test]
fn adversarial_fixtures_have_their_verdicts() {
    let r = run("cc-inflate.scn");
    let final_seq = r
        .board
        .iter()
        .find(|e| e.kind == evot_core::protocol::EntryKind::FinalTally)
        .unwrap()
        .seq;
    assert!(matches!(&r.audit, Ok(AuditVerdict::Discrepancy { seq, .. }) if *seq == final_seq));

    let r = run("vc-withhold.scn");
    let dana = r.voter_checks.iter().find(|(id, _)| id == "dana").unwrap();
    assert_eq!(dana.1, BoardCheck::Missing);
    assert!(r.audit.as_ref().unwrap().is_consistent());

    let r = run("replay-ticket.scn");
    assert_eq!(r.outcomes[0].observed, "TicketReused");
    let ballots = r.board.iter().filter(|e| e.kind == evot_core::protocol::EntryKind::Ballot).count();
    assert_eq!(ballots, 3);

    for name in ["forge-ticket.scn", "outsider.scn", "collude.scn"] {
        let r = run(name);
        assert!(r.audit.as_ref().unwrap().is_consistent(), "{name}");
        assert!(!r.scenario.directives.is_empty());
        assert!(r.scenario.directives.iter().all(|d| !matches!(d, Directive::CcInflate { .. })));
    }
}

#[test]
fn size_report_matches_encodings() {
    let r = run("honest-10.scn");
    let sizes = r.sizes.as_ref().unwrap();
    for row in sizes.rows() {
        assert_eq!(row.measured, row.composed, "{}", row.item);
    }
    assert_eq!(sizes.sig, 40 + 16 + 4);
    assert_eq!(sizes.ticket, sizes.sig + sizes.pseudonym);
    assert_eq!(sizes.vote, sizes.sig + 32 + 32);
    golden("sizes_reference.txt", &render_sizes(sizes));
    golden("op_counts_l2.txt", &render_op_counts(&r.counters));
}
