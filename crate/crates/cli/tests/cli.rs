use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::sync::Arc;

use evot_core::codec::Canonical;
use evot_core::protocol::{BulletinBoard, EntryKind, Meter, PublicParams};
use evot_core::scenario::{run_scenario, run_scenario_on, Scenario};
use evot_service::{Endpoints, RemoteDeployment};

fn evote(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evote")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs a fixture and leaves its board export and parameters in `dir`.
fn board_files(dir: &Path, scenario: &str) -> (PathBuf, PathBuf) {
    let (board, pp) = (dir.join("board.log"), dir.join("pp.bin"));
    let o = evote(&["run", &fixture(scenario), "--board-out", s(&board), "--params-out", s(&pp)]);
    assert!(o.status.success(), "{}", stdout(&o));
    (board, pp)
}

fn rewrite(board: &Path, keep: impl Fn(&evot_core::protocol::Entry) -> bool) {
    let entries = BulletinBoard::parse_export(&fs::read(board).unwrap()).unwrap();
    let mut out = BulletinBoard::new();
    for e in entries.into_iter().filter(|e| keep(e)) {
        out.push(e.kind, e.payload);
    }
    fs::write(board, out.export()).unwrap();
}

#[test]
fn run_reports_pass_and_json() {
    let o = evote(&["run", &fixture("mixed.scn")]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("[ok] cc-inflate C 3"), "{text}");
    assert!(text.ends_with("result: PASS\n"));

    let o = evote(&["run", &fixture("honest-10.scn"), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["audit"]["verdict"], "consistent");
    assert_eq!(v["published"]["counts"][0], serde_json::json!(["Alder", 6]));
}

#[test]
fn same_seed_same_board_bytes() {
    let d = tempfile::tempdir().unwrap();
    let (a, b, w) = (d.path().join("a"), d.path().join("b"), d.path().join("w"));
    let scn = fixture("mixed.scn");
    for (out, wire) in [(&a, false), (&b, false), (&w, true)] {
        let mut args = vec!["run", &scn, "--board-out", s(out)];
        if wire {
            args.push("--wire");
        }
        assert!(evote(&args).status.success());
    }
    let bytes = fs::read(&a).unwrap();
    assert!(!bytes.is_empty());
    assert_eq!(bytes, fs::read(&b).unwrap());
    assert_eq!(bytes, fs::read(&w).unwrap());
}

#[test]
fn audit_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let (board, pp) = board_files(d.path(), "honest-10.scn");
    let o = evote(&["audit", "--board", s(&board), "--params", s(&pp)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("consistent: Alder=6 Birch=4"));

    // Drop the third tally mark and re-chain so only the mark is missing.
    let missing = d.path().join("missing.log");
    fs::copy(&board, &missing).unwrap();
    let marks: Vec<u64> = BulletinBoard::parse_export(&fs::read(&board).unwrap())
        .unwrap()
        .iter()
        .filter(|e| e.kind == EntryKind::TallyMark)
        .map(|e| e.seq)
        .collect();
    rewrite(&missing, |e| e.seq != marks[2]);
    let o = evote(&["audit", "--board", s(&missing), "--params", s(&pp)]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.starts_with("first divergence at entry "), "{text}");
    assert!(text.contains("valid ballot has no tally mark"), "{text}");

    let early = d.path().join("early.log");
    fs::copy(&board, &early).unwrap();
    rewrite(&early, |e| matches!(e.kind, EntryKind::Pseudonym | EntryKind::Ballot));
    let o = evote(&["audit", "--board", s(&early), "--params", s(&pp)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("tally not yet public"));

    let o = evote(&["audit", "--board", s(&d.path().join("absent")), "--params", s(&pp)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn inflated_tally_fails_the_audit() {
    let d = tempfile::tempdir().unwrap();
    let (board, pp) = (d.path().join("b"), d.path().join("p"));
    let o = evote(&["run", &fixture("cc-inflate.scn"), "--board-out", s(&board), "--params-out", s(&pp)]);
    assert!(o.status.success());
    let o = evote(&["audit", "--board", s(&board), "--params", s(&pp), "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "discrepancy");
    assert!(v["detail"].as_str().unwrap().starts_with("published Red="));
}

#[test]
fn report_tables_match_for_every_l() {
    for (name, l) in [("honest-10.scn", 2), ("honest-50.scn", 5), ("honest-200.scn", 10)] {
        let o = evote(&["report", &fixture(name)]);
        assert!(o.status.success(), "{name}");
        let text = stdout(&o);
        assert!(text.starts_with(&format!("Run-time operation counts (L = {l})")));
        let rows: Vec<&str> = text.lines().skip(2).take(5).collect();
        assert!(rows.iter().all(|r| r.ends_with("yes")), "{text}");
        assert!(text.contains("vote\n  formula    |S| + |Commit|"));
    }
}

#[test]
fn parallel_voters_mode() {
    let o = evote(&["run", &fixture("honest-50.scn"), "--parallel-voters", "8"]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(text.contains("tickets opening exactly one session: 50/50"));
    assert!(text.contains("racing replays rejected: 50"));
}

struct Served(Vec<Child>);

impl Drop for Served {
    fn drop(&mut self) {
        for c in &mut self.0 {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

impl Served {
    fn start(&mut self, args: &[&str]) -> String {
        let mut child = Command::new(env!("CARGO_BIN_EXE_evote"))
            .arg("serve")
            .args(args)
            .stdout(Stdio::piped())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        self.0.push(child);
        let addr = line.split(" listening on ").nth(1).unwrap_or_else(|| panic!("{line:?}"));
        addr.split_whitespace().next().unwrap().to_string()
    }
}

const ELECTION: &str = "\
election riverside-2026
candidates Alder Birch Cedar
seed 4
params tiny
voter alice votes Alder
voter bob votes Cedar
voter carol votes Alder
voter dana votes Birch
";

#[test]
fn keygen_and_serve_reproduce_the_in_process_board() {
    let d = tempfile::tempdir().unwrap();
    let keys = d.path().join("keys");
    let manifest = fixture("election.toml");
    let o = evote(&["keygen", "--manifest", &manifest, "--profile", "tiny", "--seed", "4", "--out", s(&keys)]);
    assert!(o.status.success());

    let store = |n: &str| d.path().join(n).to_string_lossy().into_owned();
    let k = s(&keys);
    let mut served = Served(Vec::new());
    let board = served.start(&["--role", "board", "--keys", k, "--store", &store("board.log")]);
    let common = ["--keys", k, "--seed", "4", "--manual-clock", "--board", &board];
    let vc = served.start(&[&["--role", "vc", "--store", &store("vc.log")], &common[..]].concat());
    let rc = served.start(&[&["--role", "rc", "--store", &store("rc.log"), "--manifest", &manifest], &common[..]].concat());
    let cc = served.start(&[&["--role", "cc"], &common[..]].concat());
    let po = served.start(&["--role", "po", "--keys", k, "--seed", "4", "--manual-clock", "--vc", &vc, "--store", &store("po.log")]);

    let s = Scenario::parse(ELECTION).unwrap();
    let pp = Arc::new(PublicParams::from_bytes(&fs::read(keys.join("pp.bin")).unwrap()).unwrap());
    let mut dep = RemoteDeployment::new(Endpoints {
        board: board.clone(),
        rc,
        po,
        vc,
        cc,
    });
    let remote = run_scenario_on(&s, pp, &mut dep, &Arc::new(Meter::new())).unwrap();
    assert!(remote.passed(), "{:?}", remote.failures);
    let local = run_scenario(&s).unwrap();
    assert_eq!(remote.board_bytes(), local.board_bytes());
    assert_eq!(fs::read(store("board.log")).unwrap(), local.board_bytes());

    let o = evote(&["audit", "--board-addr", &board, "--params", &keys.join("pp.bin").to_string_lossy()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("Alder=2 Birch=1 Cedar=1"));
}

#[test]
fn serve_refuses_bad_configuration() {
    let d = tempfile::tempdir().unwrap();
    let keys = d.path().join("keys");
    assert!(evote(&["keygen", "--manifest", &fixture("election.toml"), "--profile", "tiny", "--seed", "1", "--out", s(&keys)])
        .status
        .success());
    let o = evote(&["serve", "--role", "rc", "--keys", s(&keys)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--manifest"));

    let store = d.path().join("board.log");
    fs::write(&store, b"\x00\x00\x00\x05hello0123456789012345678901234567890!").unwrap();
    let o = evote(&["serve", "--role", "board", "--keys", s(&keys), "--store", s(&store)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("record 0"), "{}", String::from_utf8_lossy(&o.stderr));
}
