//! Voters driven concurrently against a live cluster.
//!
//! Every voter's ticket is presented by two threads at once: the voter and
//! a replayer holding a copy of the ticket. The Poll-Officer's
//! check-and-insert must let exactly one of them through.

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;
use std::thread;

use evot_core::protocol::{
    audit, derive_rng, voting_round, AuditError, AuditVerdict, Deployment, Entry, Meter, TallyResult, VoteError, Voter,
};
use evot_core::scenario::{prepare, Scenario, ScenarioError, REGISTRATION, TALLY_START, VOTING};
use serde::Serialize;
use thiserror::Error;

use crate::{launch_cluster, RemoteDeployment, ServiceError};

#[derive(Debug, Error)]
pub enum ParallelError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("parallel mode runs voters only; remove the adversary lines")]
    Directives,
    #[error("deployment: {0}")]
    Transport(String),
}

#[derive(Debug, Serialize)]
pub struct ParallelReport {
    pub voters: usize,
    pub workers: usize,
    /// Voters whose ticket opened exactly one session.
    pub single_winner: usize,
    pub replays_rejected: usize,
    pub failures: Vec<String>,
    pub published: Option<TallyResult>,
    #[serde(skip)]
    pub audit: Result<AuditVerdict, AuditError>,
    #[serde(skip)]
    pub board: Vec<Entry>,
    pub expected_counts: Vec<(String, u64)>,
}

impl ParallelReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
            && self.single_winner == self.voters
            && matches!(&self.audit, Ok(AuditVerdict::Consistent(r)) if r.counts == self.expected_counts)
            && self.published.as_ref().map(|r| &r.counts) == Some(&self.expected_counts)
    }
}

struct Outcome {
    id: String,
    results: [Result<(), VoteError>; 2],
}

pub fn run_parallel(s: &Scenario, workers: usize, dir: &Path) -> Result<ParallelReport, ParallelError> {
    s.validate()?;
    if !s.directives.is_empty() {
        return Err(ParallelError::Directives);
    }
    let workers = workers.max(1);
    let meter = Arc::new(Meter::new());
    let (pp, secrets) = prepare(s, &meter)?;
    let pp = Arc::new(pp);
    let cluster = launch_cluster(pp.clone(), &secrets, &s.roll(), s.seed, dir, meter.clone())?;
    let mut dep = cluster.deployment();
    let transport = |e: &dyn std::fmt::Display| ParallelError::Transport(e.to_string());
    let mut failures = Vec::new();

    let chunk = s.voters.len().div_ceil(workers);
    let new_voter = |id: &str, label: &str| {
        Voter::new(id, pp.clone(), derive_rng(s.seed, &format!("{label}:{id}")), meter.clone())
    };

    dep.set_time(REGISTRATION.start).map_err(|e| transport(&e))?;
    let registered: Vec<Result<(Voter, usize), String>> = thread::scope(|sc| {
        let handles: Vec<_> = s
            .voters
            .chunks(chunk)
            .map(|part| {
                let mut dep: RemoteDeployment = dep.clone();
                let new_voter = &new_voter;
                sc.spawn(move || {
                    part.iter()
                        .map(|vs| {
                            let mut v = new_voter(&vs.id, "voter");
                            let p = v.make_pseudonym();
                            let t = dep.register(&vs.id, &p).map_err(|e| format!("registration of {}: {e}", vs.id))?;
                            v.set_ticket(t);
                            Ok((v, s.candidates.iter().position(|c| *c == vs.candidate).expect("validated")))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("registration worker")).collect()
    });
    let mut casts = Vec::new();
    for r in registered {
        match r {
            Ok(c) => casts.push(c),
            Err(e) => failures.push(e),
        }
    }

    let now = VOTING.start + 1;
    dep.set_time(now).map_err(|e| transport(&e))?;
    let outcomes: Vec<Outcome> = thread::scope(|sc| {
        let handles: Vec<_> = casts
            .chunks_mut(chunk)
            .map(|part| {
                let dep = dep.clone();
                let new_voter = &new_voter;
                sc.spawn(move || {
                    part.iter_mut()
                        .map(|(v, choice)| {
                            let mut rival = new_voter(&v.id, "replay");
                            rival.set_ticket(v.ticket().expect("registered").clone());
                            let (mut d1, mut d2) = (dep.clone(), dep.clone());
                            let choice = *choice;
                            let id = v.id.clone();
                            let results = thread::scope(|inner| {
                                let a = inner.spawn(|| voting_round(v, &mut d1, choice, now).map(|_| ()));
                                let b = inner.spawn(|| voting_round(&mut rival, &mut d2, choice, now).map(|_| ()));
                                [a.join().expect("voter"), b.join().expect("replayer")]
                            });
                            Outcome { id, results }
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("voting worker")).collect()
    });

    let mut single_winner = 0;
    let mut replays_rejected = 0;
    for o in &outcomes {
        let wins = o.results.iter().filter(|r| r.is_ok()).count();
        let reused = o.results.iter().filter(|r| **r == Err(VoteError::TicketReused)).count();
        if wins == 1 {
            single_winner += 1;
        } else {
            failures.push(format!("{}: {wins} sessions completed ({:?})", o.id, o.results));
        }
        replays_rejected += reused;
    }

    dep.set_time(VOTING.end - 1).map_err(|e| transport(&e))?;
    if let Err(e) = dep.forward_pending() {
        failures.push(format!("forwarding: {e}"));
    }
    match dep.publish_pending(&HashSet::new()) {
        Ok(results) => failures.extend(results.into_iter().filter_map(|(_, r)| r.err()).map(|e| format!("publication: {e}"))),
        Err(e) => failures.push(format!("publication: {e}")),
    }
    dep.set_time(TALLY_START).map_err(|e| transport(&e))?;
    let published = match dep.run_tally(None) {
        Ok(r) => Some(r),
        Err(e) => {
            failures.push(format!("tally: {e}"));
            None
        }
    };
    let board = dep.board().map_err(|e| transport(&e))?;
    cluster.shutdown();
    Ok(ParallelReport {
        voters: s.voters.len(),
        workers,
        single_winner,
        replays_rejected,
        failures,
        published,
        audit: audit(&board, &pp),
        board,
        expected_counts: s.expected_counts(),
    })
}
