//! Operation-count and size reports, set against the symbolic cost tables.

use std::fmt::Write as _;

use serde::Serialize;

use crate::codec::Canonical;
use crate::mqe::TAG_LEN;
use crate::protocol::{Authority, OpCounts, PublicParams, RoleSecrets, Voter};

/// Counter deltas of one phase.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PhaseCounts {
    pub total: OpCounts,
    /// Voters or ballots the phase handled.
    pub units: u64,
    /// Cost of one unit, when every unit cost the same.
    pub per_unit: Option<OpCounts>,
}

impl PhaseCounts {
    /// Adds one unit measured on its own.
    pub fn record(&mut self, c: OpCounts) {
        let uniform = self.units == 0 || self.per_unit == Some(c);
        self.total = self.total + c;
        self.units += 1;
        self.per_unit = if uniform { Some(c) } else { None };
    }

    /// Adds `units` units measured together.
    pub fn record_batch(&mut self, c: OpCounts, units: u64) {
        self.total = self.total + c;
        self.units += units;
        self.per_unit = self.total.per(self.units);
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CounterReport {
    pub candidates: usize,
    pub preparation: PhaseCounts,
    pub registration: PhaseCounts,
    pub voting: PhaseCounts,
    /// PO → VC hand-over; not a row of the cost table.
    pub forwarding: PhaseCounts,
    pub verification: PhaseCounts,
    pub tally: PhaseCounts,
}

impl CounterReport {
    pub fn new(candidates: usize) -> Self {
        CounterReport {
            candidates,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OpCountRow {
    pub phase: &'static str,
    pub unit: &'static str,
    pub formula: &'static str,
    pub predicted: OpCounts,
    pub measured: Option<OpCounts>,
    pub matches: bool,
    pub note: Option<&'static str>,
}

fn ops(f: impl FnOnce(&mut OpCounts)) -> OpCounts {
    let mut c = OpCounts::default();
    f(&mut c);
    c
}

/// The cost table with `L` substituted, next to the measured counts.
pub fn op_count_rows(c: &CounterReport) -> Vec<OpCountRow> {
    let l = c.candidates as u64;
    let row = |phase, unit, formula, predicted: OpCounts, measured: Option<OpCounts>, note| OpCountRow {
        phase,
        unit,
        formula,
        matches: measured == Some(predicted),
        predicted,
        measured,
        note,
    };
    vec![
        row(
            "Preparation",
            "election",
            "4T_kg-sig + 4T_kg-enc",
            ops(|o| {
                o.kg_sig = 4;
                o.kg_enc = 4;
            }),
            (c.preparation.units == 1).then_some(c.preparation.total),
            None,
        ),
        row(
            "Registration",
            "voter",
            "T_eval + T_sig",
            ops(|o| {
                o.eval = 1;
                o.sign = 1;
            }),
            c.registration.per_unit,
            None,
        ),
        row(
            "Voting",
            "voter",
            "3T_enc + (L+1)T_sig + (L+1)T_ver + T_dec",
            ops(|o| {
                o.enc = 3;
                o.sign = l + 1;
                o.ver = l + 1;
                o.dec = 1;
            }),
            c.voting.per_unit,
            None,
        ),
        row(
            "Verification",
            "ballot",
            "T_dec + T_sig",
            ops(|o| {
                o.dec = 1;
                o.ver = 1;
            }),
            c.verification.per_unit,
            Some("printed as T_dec + T_sig; the Vot-Center verifies the ticket once and signs nothing, so T_ver is asserted"),
        ),
        row(
            "Tally",
            "ballot",
            "T_dec + T_ver",
            ops(|o| {
                o.dec = 1;
                o.ver = 1;
            }),
            c.tally.per_unit,
            None,
        ),
    ]
}

pub fn render_op_counts(c: &CounterReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Run-time operation counts (L = {})", c.candidates);
    let _ = writeln!(
        out,
        "{:<13} {:<9} {:<42} {:<40} {:<40} match",
        "phase", "per", "formula", "predicted", "measured"
    );
    let mut notes = Vec::new();
    for r in op_count_rows(c) {
        let measured = r.measured.map_or("(not uniform)".to_string(), |m| m.to_string());
        let _ = writeln!(
            out,
            "{:<13} {:<9} {:<42} {:<40} {:<40} {}",
            r.phase,
            r.unit,
            r.formula,
            r.predicted.to_string(),
            measured,
            if r.matches { "yes" } else { "NO" }
        );
        if let Some(n) = r.note {
            notes.push(format!("{}: {n}", r.phase));
        }
    }
    for n in notes {
        let _ = writeln!(out, "note  {n}");
    }
    if let Some(f) = c.forwarding.per_unit {
        let _ = writeln!(out, "extra PO-to-VC forwarding receipt, per ballot: {f}");
    }
    out
}

/// Byte sizes of the primitives and of the composite objects actually sent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SizeReport {
    /// `|S|`
    pub sig: usize,
    /// `|Commit|`
    pub commit: usize,
    /// Encapsulation length `n`.
    pub enc_n: usize,
    pub pk_s: usize,
    pub pk_e: usize,
    pub sk_s: Option<usize>,
    pub sk_e: Option<usize>,
    pub pseudonym: usize,
    pub pseudonym_system: usize,
    pub manifest: usize,
    /// Candidate inside the measured ballot.
    pub candidate: String,
    pub ticket: usize,
    pub vote: usize,
    pub ballot: usize,
    pub cast: usize,
    pub pp: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SizeRow {
    pub item: &'static str,
    pub formula: &'static str,
    pub formula_bytes: Option<usize>,
    pub composition: String,
    pub composed: usize,
    pub measured: usize,
    pub delta_note: Option<&'static str>,
}

impl SizeReport {
    /// Measures the objects held by a voter who completed a round.
    pub fn measure(pp: &PublicParams, voter: &Voter) -> Self {
        let ticket = voter.ticket().expect("voter holds a ticket");
        let cand = voter.choice().map(|j| pp.candidates()[j].clone()).unwrap_or_default();
        SizeReport {
            sig: ticket.signature.encoded_len(),
            commit: 32,
            enc_n: pp.enc[Authority::CountCenter].system().n(),
            pk_s: pp.sig[Authority::RegCenter].encoded_len(),
            pk_e: pp.enc[Authority::RegCenter].encoded_len(),
            sk_s: None,
            sk_e: None,
            pseudonym: ticket.pseudonym.encoded_len(),
            pseudonym_system: pp.pseudonym_system.encoded_len(),
            manifest: pp.manifest.encoded_len(),
            candidate: cand,
            ticket: ticket.encoded_len(),
            vote: voter.vote().map_or(0, |v| v.encoded_len()),
            ballot: voter.ballot().map_or(0, |b| b.encoded_len()),
            cast: voter.cast_ballot().map_or(0, |b| b.encoded_len()),
            pp: pp.encoded_len(),
        }
    }

    pub fn fill_secret_sizes(&mut self, secrets: &RoleSecrets) {
        let k = &secrets[Authority::RegCenter];
        self.sk_s = Some(k.sig.signing.encoded_len());
        self.sk_e = Some(k.enc.secret.encoded_len());
    }

    /// `|E|` for a payload of `p` bytes: encapsulation, length prefix, body, tag.
    pub fn e(&self, p: usize) -> usize {
        4 + self.enc_n + 4 + p + TAG_LEN
    }

    pub fn rows(&self) -> Vec<SizeRow> {
        let ballot_payload = self.vote + 4 + self.candidate.len();
        let cast_payload = self.ticket + self.ballot;
        let formula_pp = self
            .sk_e
            .zip(self.sk_s)
            .map(|(sk_e, sk_s)| 4 * sk_e + 4 * self.pk_e + 4 * sk_s + 4 * self.pk_s);
        vec![
            SizeRow {
                item: "ticket",
                formula: "|S|",
                formula_bytes: Some(self.sig),
                composition: format!("|v_p| + |S| = {} + {}", self.pseudonym, self.sig),
                composed: self.pseudonym + self.sig,
                measured: self.ticket,
                delta_note: Some("the ticket also carries the pseudonym v_p"),
            },
            SizeRow {
                item: "ballot B_j^u",
                formula: "|E|",
                formula_bytes: Some(self.e(ballot_payload)),
                composition: format!(
                    "|E|(|vote| + 4 + |CAN_j|) = {} + {} + 4 + {}",
                    self.e(0),
                    self.vote,
                    self.candidate.len()
                ),
                composed: self.e(ballot_payload),
                measured: self.ballot,
                delta_note: None,
            },
            SizeRow {
                item: "cast ballot EV_u",
                formula: "|E|",
                formula_bytes: Some(self.e(cast_payload)),
                composition: format!("|E|(|ticket| + |B_j^u|) = {} + {} + {}", self.e(0), self.ticket, self.ballot),
                composed: self.e(cast_payload),
                measured: self.cast,
                delta_note: None,
            },
            SizeRow {
                item: "public parameters pp",
                formula: "4|SK-E| + 4|PK-E| + 4|SK-S| + 4|PK-S|",
                formula_bytes: formula_pp,
                composition: format!(
                    "|manifest| + 4 + 4|PK-S| + 4|PK-E| + |P| = {} + 4 + 4*{} + 4*{} + {}",
                    self.manifest, self.pk_s, self.pk_e, self.pseudonym_system
                ),
                composed: self.manifest + 4 + 4 * self.pk_s + 4 * self.pk_e + self.pseudonym_system,
                measured: self.pp,
                delta_note: Some("pp holds only public keys, the manifest and P; the printed row adds secret keys"),
            },
            SizeRow {
                item: "vote",
                formula: "|S| + |Commit|",
                formula_bytes: Some(self.sig + self.commit),
                composition: format!("|S| + |Commit| + |r| = {} + {} + 32", self.sig, self.commit),
                composed: self.sig + self.commit + 32,
                measured: self.vote,
                delta_note: Some("the encoding adds the 32-byte opening r"),
            },
        ]
    }
}

pub fn render_sizes(s: &SizeReport) -> String {
    let mut out = String::new();
    let opt = |v: Option<usize>| v.map_or("?".to_string(), |v| v.to_string());
    let _ = writeln!(
        out,
        "Primitives: |S| = {}, |Commit| = {}, |E|(p) = {} + p, |PK-S| = {}, |SK-S| = {}, |PK-E| = {}, |SK-E| = {}",
        s.sig,
        s.commit,
        s.e(0),
        s.pk_s,
        opt(s.sk_s),
        s.pk_e,
        opt(s.sk_e)
    );
    for r in s.rows() {
        let _ = writeln!(out, "{}", r.item);
        let _ = writeln!(out, "  formula    {} = {}", r.formula, opt(r.formula_bytes));
        let _ = writeln!(out, "  encoding   {} = {}", r.composition, r.composed);
        let _ = writeln!(
            out,
            "  measured   {}{}",
            r.measured,
            if r.measured == r.composed { "" } else { "  (DOES NOT MATCH COMPOSITION)" }
        );
        if let Some(p) = r.formula_bytes {
            let delta = r.measured as i64 - p as i64;
            if delta != 0 {
                let _ = writeln!(out, "  delta      {delta:+} bytes: {}", r.delta_note.unwrap_or(""));
            }
        }
    }
    out
}
