use std::collections::HashSet;
use std::fmt;

use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::meter::Meter;
use super::ProtocolError;
use crate::codec::{put_str, put_u32, put_u64, Canonical, DecodeError, Reader};
use crate::hash::{self, domain};
use crate::mq::{mq_random, QuadraticSystem};
use crate::mqe::{DecryptionKey, EncKeyPair, EncryptionKey, REFERENCE_N};
use crate::mqs::{MqsParams, SigKeyPair, SigningKey, VerifyingKey};

/// Half-open time interval `[start, end)` in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: u64,
    pub end: u64,
}

impl Window {
    pub fn contains(&self, t: u64) -> bool {
        self.start <= t && t < self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub election_id: String,
    pub candidates: Vec<String>,
    pub registration: Window,
    pub voting: Window,
    pub tally_start: u64,
}

impl Manifest {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.candidates.len() < 2 {
            return Err(ProtocolError::Manifest(format!(
                "need at least 2 candidates, got {}",
                self.candidates.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &self.candidates {
            if c.is_empty() || !seen.insert(c) {
                return Err(ProtocolError::Manifest(format!("empty or duplicate candidate {c:?}")));
            }
        }
        let ordered = self.registration.start < self.registration.end
            && self.registration.end <= self.voting.start
            && self.voting.start < self.voting.end
            && self.voting.end <= self.tally_start;
        if !ordered {
            return Err(ProtocolError::Manifest("windows are not strictly ordered".into()));
        }
        Ok(())
    }

    pub fn candidate_index(&self, name: &[u8]) -> Option<usize> {
        self.candidates.iter().position(|c| c.as_bytes() == name)
    }
}

impl Canonical for Manifest {
    fn encode(&self, out: &mut Vec<u8>) {
        put_str(out, &self.election_id);
        put_u32(out, self.candidates.len() as u32);
        for c in &self.candidates {
            put_str(out, c);
        }
        for w in [self.registration, self.voting] {
            put_u64(out, w.start);
            put_u64(out, w.end);
        }
        put_u64(out, self.tally_start);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let election_id = r.string()?;
        let n = r.u32()? as usize;
        if n > r.remaining() {
            return Err(DecodeError::malformed("manifest", "candidate count"));
        }
        let candidates = (0..n).map(|_| r.string()).collect::<Result<_, _>>()?;
        let registration = Window {
            start: r.u64()?,
            end: r.u64()?,
        };
        let voting = Window {
            start: r.u64()?,
            end: r.u64()?,
        };
        Ok(Manifest {
            election_id,
            candidates,
            registration,
            voting,
            tally_start: r.u64()?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudonymParams {
    /// Field elements the identity is hashed to.
    pub id_len: usize,
    /// Field elements of voter-chosen randomness `a`.
    pub a_len: usize,
    /// Pseudonym length.
    pub out_len: usize,
}

impl PseudonymParams {
    pub const REFERENCE: PseudonymParams = PseudonymParams {
        id_len: 16,
        a_len: 16,
        out_len: 16,
    };
    pub const TINY: PseudonymParams = PseudonymParams {
        id_len: 2,
        a_len: 2,
        out_len: 4,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSet {
    pub sig: MqsParams,
    pub enc_n: usize,
    pub pseudonym: PseudonymParams,
}

impl ParamSet {
    pub const REFERENCE: ParamSet = ParamSet {
        sig: MqsParams::REFERENCE,
        enc_n: REFERENCE_N,
        pseudonym: PseudonymParams::REFERENCE,
    };
    pub const TINY: ParamSet = ParamSet {
        sig: MqsParams::TINY,
        enc_n: 8,
        pseudonym: PseudonymParams::TINY,
    };
}

/// The four authorities that hold key pairs, in public-parameter order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Authority {
    RegCenter,
    PollOfficer,
    CountCenter,
    VotCenter,
}

impl Authority {
    pub const ALL: [Authority; 4] = [
        Authority::RegCenter,
        Authority::PollOfficer,
        Authority::CountCenter,
        Authority::VotCenter,
    ];

    fn index(self) -> usize {
        match self {
            Authority::RegCenter => 0,
            Authority::PollOfficer => 1,
            Authority::CountCenter => 2,
            Authority::VotCenter => 3,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Authority::RegCenter => "rc",
            Authority::PollOfficer => "po",
            Authority::CountCenter => "cc",
            Authority::VotCenter => "vc",
        }
    }
}

impl fmt::Display for Authority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Authority::RegCenter => "Reg-Center",
            Authority::PollOfficer => "Poll-Officer",
            Authority::CountCenter => "Count-Center",
            Authority::VotCenter => "Vot-Center",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PerAuthority<T>([T; 4]);

impl<T> PerAuthority<T> {
    pub fn from_fn(mut f: impl FnMut(Authority) -> T) -> Self {
        PerAuthority(Authority::ALL.map(&mut f))
    }

    pub fn get(&self, a: Authority) -> &T {
        &self.0[a.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Authority, &T)> {
        Authority::ALL.into_iter().zip(self.0.iter())
    }
}

impl<T> std::ops::Index<Authority> for PerAuthority<T> {
    type Output = T;
    fn index(&self, a: Authority) -> &T {
        self.get(a)
    }
}

/// Published election parameters: every authority's verification and
/// encryption keys, the pseudonym system and the manifest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicParams {
    pub manifest: Manifest,
    pub pseudonym_id_len: usize,
    pub sig: PerAuthority<VerifyingKey>,
    pub enc: PerAuthority<EncryptionKey>,
    pub pseudonym_system: QuadraticSystem,
}

impl PublicParams {
    pub fn candidates(&self) -> &[String] {
        &self.manifest.candidates
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        self.manifest.validate()?;
        let mut ids = HashSet::new();
        for (_, k) in self.sig.iter() {
            ids.insert(k.key_id());
        }
        for (_, k) in self.enc.iter() {
            ids.insert(k.key_id());
        }
        if ids.len() != 8 {
            return Err(ProtocolError::Manifest("authority key digests are not distinct".into()));
        }
        if self.pseudonym_id_len == 0 || self.pseudonym_id_len >= self.pseudonym_system.n() {
            return Err(ProtocolError::Manifest("pseudonym identity length out of range".into()));
        }
        Ok(())
    }
}

/// Manifest ‖ identity length ‖ four verification keys ‖ four encryption
/// keys ‖ pseudonym system. Keys are in the order RC, PO, CC, VC.
impl Canonical for PublicParams {
    fn encode(&self, out: &mut Vec<u8>) {
        self.manifest.encode(out);
        put_u32(out, self.pseudonym_id_len as u32);
        for (_, k) in self.sig.iter() {
            k.encode(out);
        }
        for (_, k) in self.enc.iter() {
            k.encode(out);
        }
        self.pseudonym_system.encode(out);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let manifest = Manifest::decode(r)?;
        let pseudonym_id_len = r.u32()? as usize;
        let sig = [
            VerifyingKey::decode(r)?,
            VerifyingKey::decode(r)?,
            VerifyingKey::decode(r)?,
            VerifyingKey::decode(r)?,
        ];
        let enc = [
            EncryptionKey::decode(r)?,
            EncryptionKey::decode(r)?,
            EncryptionKey::decode(r)?,
            EncryptionKey::decode(r)?,
        ];
        Ok(PublicParams {
            manifest,
            pseudonym_id_len,
            sig: PerAuthority(sig),
            enc: PerAuthority(enc),
            pseudonym_system: QuadraticSystem::decode(r)?,
        })
    }
}

/// An authority's secret signing and decryption keys.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthorityKeys {
    pub sig: SigKeyPair,
    pub enc: EncKeyPair,
}

/// Signing key ‖ decryption key; public halves are recomputed on decode.
impl Canonical for AuthorityKeys {
    fn encode(&self, out: &mut Vec<u8>) {
        self.sig.signing.encode(out);
        self.enc.secret.encode(out);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let signing = SigningKey::decode(r)?;
        let secret = DecryptionKey::decode(r)?;
        let sig = SigKeyPair::from_signing(signing)
            .map_err(|e| DecodeError::malformed("authority keys", e.to_string()))?;
        let enc = EncKeyPair::from_secret(secret)
            .map_err(|e| DecodeError::malformed("authority keys", e.to_string()))?;
        Ok(AuthorityKeys { sig, enc })
    }
}

pub type RoleSecrets = PerAuthority<AuthorityKeys>;

/// 32-byte secret seed for one role or voter, derived from a run seed.
pub fn role_seed(seed: u64, label: &str) -> [u8; 32] {
    hash::digest(domain::SEED, &[&seed.to_be_bytes(), label.as_bytes()])
}

/// Deterministic per-purpose RNG derived from a run seed and a label.
pub fn derive_rng(seed: u64, label: &str) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(role_seed(seed, label))
}

/// Generates the four authorities' key pairs (one encryption and one
/// signature key pair each) and the random pseudonym system.
pub fn prepare_election<R: RngCore + CryptoRng + ?Sized>(
    manifest: Manifest,
    params: ParamSet,
    rng: &mut R,
    meter: &Meter,
) -> Result<(PublicParams, RoleSecrets), ProtocolError> {
    manifest.validate()?;
    let mut keys = Vec::with_capacity(4);
    for _ in Authority::ALL {
        let enc = meter.enc_keygen(params.enc_n, rng)?;
        let sig = meter.sig_keygen(params.sig, rng)?;
        keys.push(AuthorityKeys { sig, enc });
    }
    let pseudo = params.pseudonym;
    let pseudonym_system = mq_random(pseudo.id_len + pseudo.a_len, pseudo.out_len, rng);
    let mut it = keys.into_iter();
    let secrets = PerAuthority::from_fn(|_| it.next().expect("four key sets"));
    let pp = PublicParams {
        manifest,
        pseudonym_id_len: pseudo.id_len,
        sig: PerAuthority::from_fn(|a| secrets[a].sig.verifying.clone()),
        enc: PerAuthority::from_fn(|a| secrets[a].enc.public.clone()),
        pseudonym_system,
    };
    pp.validate()?;
    Ok((pp, secrets))
}
