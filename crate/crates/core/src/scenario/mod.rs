//! Scripted elections.
//!
//! A scenario file is line oriented; `#` starts a comment.
//!
//! ```text
//! election  <id>
//! candidates <name> <name> ...
//! seed      <u64>
//! params    reference | tiny
//! voter     <id> votes <candidate>
//! voters    <count> votes <candidate>      # ids voter-0001, voter-0002, ...
//! adversary replay-ticket <voter>
//! adversary forge-ticket <id> votes <candidate>
//! adversary outsider <id> votes <candidate>
//! adversary vc-withhold <voter>
//! adversary cc-inflate <candidate> <delta>
//! adversary collude
//! ```
//!
//! `election`, `candidates` and at least one voter are required. Voters
//! appear on the eligibility roll in file order; forgers and outsiders do
//! not.

mod report;
mod run;

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::protocol::{Manifest, ParamSet, Window};

pub use report::{render_op_counts, render_sizes, op_count_rows, CounterReport, PhaseCounts, SizeReport, SizeRow, OpCountRow};
pub use run::{prepare, run_scenario, run_scenario_on, DirectiveOutcome, ScenarioReport};

pub const REGISTRATION: Window = Window { start: 1_000, end: 2_000 };
pub const VOTING: Window = Window { start: 2_000, end: 3_000 };
pub const TALLY_START: u64 = 3_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ParamProfile {
    Reference,
    Tiny,
}

impl ParamProfile {
    pub fn params(self) -> ParamSet {
        match self {
            ParamProfile::Reference => ParamSet::REFERENCE,
            ParamProfile::Tiny => ParamSet::TINY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VoterScript {
    pub id: String,
    pub candidate: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Directive {
    /// The voter casts a second ballot with the same ticket.
    ReplayTicket(String),
    /// An eligible-looking identity that never registers votes with a
    /// ticket carrying a signature lifted from another ticket.
    ForgeTicket { id: String, candidate: String },
    /// An identity off the roll tries to register, then to vote.
    Outsider { id: String, candidate: String },
    /// The Vot-Center silently drops this voter's ballot.
    VcWithhold(String),
    /// The Count-Center publishes an inflated count.
    CcInflate { candidate: String, delta: u64 },
    /// PO, VC and CC pool everything they hold.
    Collude,
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Directive::ReplayTicket(v) => write!(f, "replay-ticket {v}"),
            Directive::ForgeTicket { id, candidate } => write!(f, "forge-ticket {id} votes {candidate}"),
            Directive::Outsider { id, candidate } => write!(f, "outsider {id} votes {candidate}"),
            Directive::VcWithhold(v) => write!(f, "vc-withhold {v}"),
            Directive::CcInflate { candidate, delta } => write!(f, "cc-inflate {candidate} {delta}"),
            Directive::Collude => write!(f, "collude"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Scenario {
    pub election_id: String,
    pub candidates: Vec<String>,
    pub seed: u64,
    pub profile: ParamProfile,
    pub voters: Vec<VoterScript>,
    pub directives: Vec<Directive>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn parse_err(line: usize, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse { line, msg: msg.into() }
}

fn votes_clause(line: usize, rest: &[&str]) -> Result<String, ScenarioError> {
    match rest {
        ["votes", cand] => Ok(cand.to_string()),
        _ => Err(parse_err(line, "expected `votes <candidate>`")),
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut election_id = None;
        let mut candidates = None;
        let mut seed = 0u64;
        let mut profile = ParamProfile::Reference;
        let mut voters = Vec::new();
        let mut directives = Vec::new();
        let mut auto = 0usize;

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let words: Vec<&str> = content.split_whitespace().collect();
            match words.as_slice() {
                ["election", id] => election_id = Some(id.to_string()),
                ["candidates", names @ ..] if !names.is_empty() => {
                    candidates = Some(names.iter().map(|s| s.to_string()).collect::<Vec<_>>())
                }
                ["seed", s] => seed = s.parse().map_err(|_| parse_err(line, format!("bad seed {s:?}")))?,
                ["params", "reference"] => profile = ParamProfile::Reference,
                ["params", "tiny"] => profile = ParamProfile::Tiny,
                ["voter", id, rest @ ..] => voters.push(VoterScript {
                    id: id.to_string(),
                    candidate: votes_clause(line, rest)?,
                }),
                ["voters", n, rest @ ..] => {
                    let n: usize = n.parse().map_err(|_| parse_err(line, format!("bad count {n:?}")))?;
                    let candidate = votes_clause(line, rest)?;
                    for _ in 0..n {
                        auto += 1;
                        voters.push(VoterScript {
                            id: format!("voter-{auto:04}"),
                            candidate: candidate.clone(),
                        });
                    }
                }
                ["adversary", "replay-ticket", v] => directives.push(Directive::ReplayTicket(v.to_string())),
                ["adversary", "vc-withhold", v] => directives.push(Directive::VcWithhold(v.to_string())),
                ["adversary", "forge-ticket", id, rest @ ..] => directives.push(Directive::ForgeTicket {
                    id: id.to_string(),
                    candidate: votes_clause(line, rest)?,
                }),
                ["adversary", "outsider", id, rest @ ..] => directives.push(Directive::Outsider {
                    id: id.to_string(),
                    candidate: votes_clause(line, rest)?,
                }),
                ["adversary", "cc-inflate", cand, delta] => directives.push(Directive::CcInflate {
                    candidate: cand.to_string(),
                    delta: delta.parse().map_err(|_| parse_err(line, format!("bad delta {delta:?}")))?,
                }),
                ["adversary", "collude"] => directives.push(Directive::Collude),
                _ => return Err(parse_err(line, format!("unrecognised line {content:?}"))),
            }
        }
        let s = Scenario {
            election_id: election_id.ok_or_else(|| ScenarioError::Invalid("missing `election`".into()))?,
            candidates: candidates.ok_or_else(|| ScenarioError::Invalid("missing `candidates`".into()))?,
            seed,
            profile,
            voters,
            directives,
        };
        s.validate()?;
        Ok(s)
    }

    /// Honest election with `per_candidate[i]` voters for candidate `i`.
    pub fn honest(election_id: &str, seed: u64, profile: ParamProfile, candidates: &[&str], per_candidate: &[usize]) -> Self {
        let mut voters = Vec::new();
        let mut k = 0;
        for (c, n) in candidates.iter().zip(per_candidate) {
            for _ in 0..*n {
                k += 1;
                voters.push(VoterScript {
                    id: format!("voter-{k:04}"),
                    candidate: c.to_string(),
                });
            }
        }
        Scenario {
            election_id: election_id.into(),
            candidates: candidates.iter().map(|c| c.to_string()).collect(),
            seed,
            profile,
            voters,
            directives: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        self.manifest()
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if self.voters.is_empty() {
            return bad("no voters".into());
        }
        let cands: HashSet<&str> = self.candidates.iter().map(String::as_str).collect();
        let mut ids = HashSet::new();
        for v in &self.voters {
            if !ids.insert(v.id.as_str()) {
                return bad(format!("voter {:?} listed twice", v.id));
            }
            if !cands.contains(v.candidate.as_str()) {
                return bad(format!("voter {:?} votes for unknown candidate {:?}", v.id, v.candidate));
            }
        }
        let mut withheld = HashSet::new();
        for d in &self.directives {
            match d {
                Directive::ReplayTicket(v) | Directive::VcWithhold(v) if !ids.contains(v.as_str()) => {
                    return bad(format!("`{d}` names unknown voter {v:?}"))
                }
                Directive::VcWithhold(v) if !withheld.insert(v.as_str()) => return bad(format!("`{d}` repeated")),
                Directive::ForgeTicket { id, candidate } | Directive::Outsider { id, candidate } => {
                    if ids.contains(id.as_str()) {
                        return bad(format!("`{d}` reuses a scripted voter id"));
                    }
                    if !cands.contains(candidate.as_str()) {
                        return bad(format!("`{d}` names unknown candidate"));
                    }
                }
                Directive::CcInflate { candidate, delta } => {
                    if !cands.contains(candidate.as_str()) {
                        return bad(format!("`{d}` names unknown candidate"));
                    }
                    if *delta == 0 {
                        return bad(format!("`{d}` inflates by zero"));
                    }
                }
                _ => {}
            }
        }
        if self.directives.iter().filter(|d| matches!(d, Directive::CcInflate { .. })).count() > 1 {
            return bad("at most one cc-inflate directive".into());
        }
        Ok(())
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            election_id: self.election_id.clone(),
            candidates: self.candidates.clone(),
            registration: REGISTRATION,
            voting: VOTING,
            tally_start: TALLY_START,
        }
    }

    pub fn roll(&self) -> Vec<String> {
        self.voters.iter().map(|v| v.id.clone()).collect()
    }

    /// Scripted histogram, in candidate order.
    pub fn expected_counts(&self) -> Vec<(String, u64)> {
        self.candidates
            .iter()
            .map(|c| (c.clone(), self.voters.iter().filter(|v| &v.candidate == c).count() as u64))
            .collect()
    }
}
