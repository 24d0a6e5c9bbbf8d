mod keys;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use evot_core::codec::Canonical;
use evot_core::protocol::{audit, AuditError, AuditVerdict, Board, BulletinBoard, Entry, Meter, PublicParams};
use evot_core::scenario::{
    prepare, render_op_counts, render_sizes, run_scenario, run_scenario_on, op_count_rows, ParamProfile, Scenario,
    ScenarioReport,
};
use evot_service::{launch_cluster, run_parallel, serve_role, RemoteBoard, Role, RoleConfig};
use serde_json::json;

const EXIT_DISCREPANCY: u8 = 1;
const EXIT_ERROR: u8 = 2;
const EXIT_NOT_PUBLIC: u8 = 3;

#[derive(Parser)]
#[command(name = "evote", version, about = "Run, report on and audit multivariate-quadratic e-voting elections")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file and check every expected outcome.
    Run(RunArgs),
    /// Operation counts and byte sizes for a scenario, against the cost model.
    Report {
        scenario: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Recompute the tally from a board and check what was published.
    Audit(AuditArgs),
    /// Generate public parameters and the four authorities' keys.
    Keygen {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "reference")]
        profile: Profile,
        /// Deterministic keys; for tests only.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve one role endpoint until killed.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Reference,
    Tiny,
}

impl From<Profile> for ParamProfile {
    fn from(p: Profile) -> Self {
        match p {
            Profile::Reference => ParamProfile::Reference,
            Profile::Tiny => ParamProfile::Tiny,
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Run every role as a TCP endpoint on loopback.
    #[arg(long)]
    wire: bool,
    /// Drive voters from N threads against live endpoints, racing a replay
    /// of every ticket.
    #[arg(long, value_name = "N", conflicts_with = "wire")]
    parallel_voters: Option<usize>,
    /// Directory for the endpoint stores (default: a temporary directory).
    #[arg(long)]
    store_dir: Option<PathBuf>,
    #[arg(long)]
    board_out: Option<PathBuf>,
    #[arg(long)]
    params_out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args)]
struct AuditArgs {
    /// Board export file.
    #[arg(long, required_unless_present = "board_addr", conflicts_with = "board_addr")]
    board: Option<PathBuf>,
    /// Live board endpoint.
    #[arg(long)]
    board_addr: Option<String>,
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args)]
struct ServeArgs {
    #[arg(long)]
    role: Role,
    #[arg(long, default_value = "127.0.0.1:0")]
    bind: String,
    /// Directory written by `evote keygen`.
    #[arg(long)]
    keys: PathBuf,
    /// Election manifest; supplies the roll for the Reg-Center.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    store: Option<PathBuf>,
    /// Pins the role's signing seed; for tests only.
    #[arg(long)]
    seed: Option<u64>,
    /// Board endpoint, for RC, VC and CC.
    #[arg(long)]
    board: Option<String>,
    /// Vot-Center endpoint, for the PO.
    #[arg(long)]
    vc: Option<String>,
    /// Take the time from SET_CLOCK requests instead of the system clock.
    #[arg(long)]
    manual_clock: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Report { scenario, json } => cmd_report(&scenario, json),
        Cmd::Audit(a) => cmd_audit(a),
        Cmd::Keygen {
            manifest,
            profile,
            seed,
            out,
        } => keys::keygen(&manifest, profile.into(), seed, &out).map(|()| ExitCode::SUCCESS),
        Cmd::Serve(a) => cmd_serve(a),
    };
    r.unwrap_or_else(|e| {
        eprintln!("evote: {e:#}");
        ExitCode::from(EXIT_ERROR)
    })
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let s = Scenario::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    s.validate()?;
    Ok(s)
}

fn store_dir(arg: &Option<PathBuf>) -> Result<(PathBuf, Option<tempfile::TempDir>)> {
    Ok(match arg {
        Some(d) => {
            fs::create_dir_all(d)?;
            (d.clone(), None)
        }
        None => {
            let t = tempfile::tempdir()?;
            (t.path().to_path_buf(), Some(t))
        }
    })
}

fn run_wire(s: &Scenario, dir: &Path) -> Result<ScenarioReport> {
    let meter = Arc::new(Meter::new());
    let (pp, secrets) = prepare(s, &meter)?;
    let prep = meter.snapshot();
    let pp = Arc::new(pp);
    let cluster = launch_cluster(pp.clone(), &secrets, &s.roll(), s.seed, dir, meter.clone())?;
    let mut dep = cluster.deployment();
    let report = run_scenario_on(s, pp, &mut dep, &meter);
    cluster.shutdown();
    let mut report = report?;
    report.counters.preparation.record(prep);
    if let Some(sizes) = report.sizes.as_mut() {
        sizes.fill_secret_sizes(&secrets);
    }
    Ok(report)
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let s = load_scenario(&a.scenario)?;
    if let Some(workers) = a.parallel_voters {
        let (dir, _tmp) = store_dir(&a.store_dir)?;
        let r = run_parallel(&s, workers, &dir)?;
        if let Some(p) = &a.board_out {
            fs::write(p, BulletinBoard::from_entries(r.board.clone())?.export())?;
        }
        if a.json {
            println!("{}", serde_json::to_string_pretty(&r)?);
        } else {
            println!("election {}: {} voters on {} threads", s.election_id, r.voters, r.workers);
            println!("tickets opening exactly one session: {}/{}", r.single_winner, r.voters);
            println!("racing replays rejected: {}", r.replays_rejected);
            print_verdict(&r.audit);
            for f in &r.failures {
                println!("failure: {f}");
            }
            println!("result: {}", if r.passed() { "PASS" } else { "FAIL" });
        }
        return Ok(exit_for(r.passed()));
    }

    let (report, _tmp) = if a.wire {
        let (dir, tmp) = store_dir(&a.store_dir)?;
        (run_wire(&s, &dir)?, tmp)
    } else {
        (run_scenario(&s)?, None)
    };
    if let Some(p) = &a.board_out {
        fs::write(p, report.board_bytes()).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &a.params_out {
        fs::write(p, report.pp.to_bytes()).with_context(|| format!("writing {}", p.display()))?;
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&run_json(&report))?);
    } else {
        print_run(&report);
    }
    Ok(exit_for(report.passed()))
}

fn exit_for(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_DISCREPANCY)
    }
}

fn print_verdict(v: &Result<AuditVerdict, AuditError>) {
    match v {
        Ok(v) => println!("audit: {v}"),
        Err(e) => println!("audit: {e}"),
    }
}

fn print_run(r: &ScenarioReport) {
    let s = &r.scenario;
    println!(
        "election {} (seed {}, {:?} parameters): {} voters, {} candidates, {} board entries",
        s.election_id,
        s.seed,
        s.profile,
        s.voters.len(),
        s.candidates.len(),
        r.board.len()
    );
    match &r.published {
        Some(p) => {
            let counts: Vec<String> = p.counts.iter().map(|(c, n)| format!("{c}={n}")).collect();
            println!("published: {}", counts.join(" "));
        }
        None => println!("published: nothing"),
    }
    let expected: Vec<String> = r.expected_counts.iter().map(|(c, n)| format!("{c}={n}")).collect();
    println!("expected:  {}", expected.join(" "));
    print_verdict(&r.audit);
    for o in &r.outcomes {
        println!(
            "[{}] {}\n       expected {}\n       observed {}",
            if o.passed { "ok" } else { "FAIL" },
            o.directive,
            o.expected,
            o.observed
        );
    }
    for f in &r.failures {
        println!("failure: {f}");
    }
    println!("result: {}", if r.passed() { "PASS" } else { "FAIL" });
}

fn run_json(r: &ScenarioReport) -> serde_json::Value {
    json!({
        "scenario": r.scenario,
        "board_entries": r.board.len(),
        "published": r.published,
        "expected_counts": r.expected_counts,
        "audit": match &r.audit {
            Ok(AuditVerdict::Consistent(t)) => json!({"verdict": "consistent", "result": t}),
            Ok(AuditVerdict::Discrepancy { seq, detail }) => json!({"verdict": "discrepancy", "seq": seq, "detail": detail}),
            Err(e) => json!({"verdict": "not-public", "detail": e.to_string()}),
        },
        "outcomes": r.outcomes,
        "voter_checks": r.voter_checks.iter().map(|(id, c)| json!({"voter": id, "check": format!("{c:?}")})).collect::<Vec<_>>(),
        "counters": r.counters,
        "failures": r.failures,
        "passed": r.passed(),
    })
}

fn cmd_report(path: &Path, as_json: bool) -> Result<ExitCode> {
    let s = load_scenario(path)?;
    let r = run_scenario(&s)?;
    let rows = op_count_rows(&r.counters);
    let ok = rows.iter().all(|row| row.matches);
    if as_json {
        let sizes = r.sizes.as_ref().map(|z| json!({"primitives": z, "rows": z.rows()}));
        println!("{}", serde_json::to_string_pretty(&json!({"op_counts": rows, "sizes": sizes}))?);
    } else {
        print!("{}", render_op_counts(&r.counters));
        println!();
        match &r.sizes {
            Some(z) => print!("{}", render_sizes(z)),
            None => println!("no ballot was cast; no size report"),
        }
    }
    Ok(exit_for(ok))
}

fn read_board(a: &AuditArgs) -> Result<Vec<Entry>> {
    if let Some(addr) = &a.board_addr {
        return Ok(RemoteBoard { addr: addr.clone() }.read_all()?);
    }
    let path = a.board.as_ref().expect("clap requires one source");
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(BulletinBoard::parse_export(&bytes).with_context(|| format!("parsing {}", path.display()))?)
}

fn cmd_audit(a: AuditArgs) -> Result<ExitCode> {
    let pp_bytes = fs::read(&a.params).with_context(|| format!("reading {}", a.params.display()))?;
    let pp = PublicParams::from_bytes(&pp_bytes).with_context(|| format!("parsing {}", a.params.display()))?;
    let entries = read_board(&a)?;
    let verdict = audit(&entries, &pp);
    if a.json {
        let v = match &verdict {
            Ok(AuditVerdict::Consistent(t)) => json!({"verdict": "consistent", "result": t}),
            Ok(AuditVerdict::Discrepancy { seq, detail }) => json!({"verdict": "discrepancy", "seq": seq, "detail": detail}),
            Err(e) => json!({"verdict": "not-public", "detail": e.to_string()}),
        };
        println!("{}", serde_json::to_string_pretty(&v)?);
    }
    Ok(match verdict {
        Ok(AuditVerdict::Consistent(t)) => {
            if !a.json {
                println!("{} entries, chain intact", entries.len());
                print_verdict(&Ok(AuditVerdict::Consistent(t)));
            }
            ExitCode::SUCCESS
        }
        Ok(AuditVerdict::Discrepancy { seq, detail }) => {
            if !a.json {
                let kind = entries.iter().find(|e| e.seq == seq).map(|e| e.kind.to_string());
                println!("first divergence at entry {seq} ({}): {detail}", kind.as_deref().unwrap_or("?"));
            }
            ExitCode::from(EXIT_DISCREPANCY)
        }
        Err(e) => {
            if !a.json {
                println!("{e}");
            }
            ExitCode::from(EXIT_NOT_PUBLIC)
        }
    })
}

fn cmd_serve(a: ServeArgs) -> Result<ExitCode> {
    let pp = Arc::new(keys::read_params(&a.keys)?);
    let manifest = a.manifest.as_deref().map(keys::read_manifest).transpose()?;
    if let Some(m) = &manifest {
        if m.manifest != pp.manifest {
            bail!("manifest does not match the one in {}", a.keys.display());
        }
    }
    let keys = match a.role {
        Role::Board => None,
        r => Some(keys::read_role_keys(&a.keys, r)?),
    };
    let roll = match (a.role, manifest) {
        (Role::Rc, Some(m)) => m.roll,
        (Role::Rc, None) => bail!("the Reg-Center needs --manifest for the eligibility roll"),
        _ => Vec::new(),
    };
    let running = serve_role(RoleConfig {
        role: a.role,
        bind: a.bind,
        pp,
        keys,
        roll,
        store: a.store,
        seed: a.seed.map(|s| evot_core::protocol::role_seed(s, a.role.name())),
        board: a.board,
        vc: a.vc,
        manual_clock: a.manual_clock,
        meter: Arc::new(Meter::new()),
    })?;
    println!(
        "{} listening on {} (recovered {} records, discarded {} bytes)",
        running.role,
        running.handle.addr(),
        running.recovered,
        running.discarded
    );
    running.handle.wait();
    Ok(ExitCode::SUCCESS)
}
