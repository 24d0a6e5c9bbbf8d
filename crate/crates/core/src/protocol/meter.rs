//! Operation counters for the cost model.
//!
//! Every protocol role routes its cryptographic calls through a shared
//! [`Meter`], so the per-phase operation mix can be measured by diffing
//! snapshots taken around each phase.

use std::fmt;
use std::ops::{Add, Sub};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::field::FieldVector;
use crate::mq::{MqError, QuadraticSystem};
use crate::mqe::{self, Ciphertext, DecryptError, DecryptionKey, EncKeyPair, EncryptionKey, MqeError};
use crate::mqs::{self, MqsError, MqsParams, SigKeyPair, Signature, SigningKey, VerifyingKey};

#[derive(Clone, Copy, Default, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub kg_sig: u64,
    pub kg_enc: u64,
    pub enc: u64,
    pub dec: u64,
    pub sign: u64,
    pub ver: u64,
    pub eval: u64,
}

impl OpCounts {
    pub fn is_zero(&self) -> bool {
        *self == OpCounts::default()
    }

    /// Divides every counter by `k`; `None` if any counter is not a multiple of `k`.
    pub fn per(&self, k: u64) -> Option<OpCounts> {
        if k == 0 {
            return None;
        }
        let fields = [self.kg_sig, self.kg_enc, self.enc, self.dec, self.sign, self.ver, self.eval];
        if fields.iter().any(|f| f % k != 0) {
            return None;
        }
        Some(OpCounts {
            kg_sig: self.kg_sig / k,
            kg_enc: self.kg_enc / k,
            enc: self.enc / k,
            dec: self.dec / k,
            sign: self.sign / k,
            ver: self.ver / k,
            eval: self.eval / k,
        })
    }
}

impl Add for OpCounts {
    type Output = OpCounts;
    fn add(self, o: OpCounts) -> OpCounts {
        OpCounts {
            kg_sig: self.kg_sig + o.kg_sig,
            kg_enc: self.kg_enc + o.kg_enc,
            enc: self.enc + o.enc,
            dec: self.dec + o.dec,
            sign: self.sign + o.sign,
            ver: self.ver + o.ver,
            eval: self.eval + o.eval,
        }
    }
}

impl Sub for OpCounts {
    type Output = OpCounts;
    fn sub(self, o: OpCounts) -> OpCounts {
        OpCounts {
            kg_sig: self.kg_sig - o.kg_sig,
            kg_enc: self.kg_enc - o.kg_enc,
            enc: self.enc - o.enc,
            dec: self.dec - o.dec,
            sign: self.sign - o.sign,
            ver: self.ver - o.ver,
            eval: self.eval - o.eval,
        }
    }
}

impl fmt::Display for OpCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts = [
            ("kg_sig", self.kg_sig),
            ("kg_enc", self.kg_enc),
            ("enc", self.enc),
            ("dec", self.dec),
            ("sign", self.sign),
            ("ver", self.ver),
            ("eval", self.eval),
        ];
        let shown: Vec<String> = parts
            .iter()
            .filter(|(_, v)| *v != 0)
            .map(|(k, v)| format!("{k}: {v}"))
            .collect();
        write!(f, "{{{}}}", shown.join(", "))
    }
}

#[derive(Default, Debug)]
pub struct Meter {
    kg_sig: AtomicU64,
    kg_enc: AtomicU64,
    enc: AtomicU64,
    dec: AtomicU64,
    sign: AtomicU64,
    ver: AtomicU64,
    eval: AtomicU64,
}

fn bump(c: &AtomicU64) {
    c.fetch_add(1, Ordering::Relaxed);
}

impl Meter {
    pub fn new() -> Self {
        Meter::default()
    }

    pub fn snapshot(&self) -> OpCounts {
        OpCounts {
            kg_sig: self.kg_sig.load(Ordering::Relaxed),
            kg_enc: self.kg_enc.load(Ordering::Relaxed),
            enc: self.enc.load(Ordering::Relaxed),
            dec: self.dec.load(Ordering::Relaxed),
            sign: self.sign.load(Ordering::Relaxed),
            ver: self.ver.load(Ordering::Relaxed),
            eval: self.eval.load(Ordering::Relaxed),
        }
    }

    pub fn sig_keygen<R: RngCore + CryptoRng + ?Sized>(&self, params: MqsParams, rng: &mut R) -> Result<SigKeyPair, MqsError> {
        bump(&self.kg_sig);
        mqs::keygen(params, rng)
    }

    pub fn enc_keygen<R: RngCore + CryptoRng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<EncKeyPair, MqeError> {
        bump(&self.kg_enc);
        mqe::keygen(n, rng)
    }

    pub fn encrypt<R: RngCore + CryptoRng + ?Sized>(&self, pk: &EncryptionKey, payload: &[u8], rng: &mut R) -> Ciphertext {
        bump(&self.enc);
        mqe::encrypt(pk, payload, rng)
    }

    pub fn decrypt(&self, sk: &DecryptionKey, ct: &Ciphertext) -> Result<Vec<u8>, DecryptError> {
        bump(&self.dec);
        mqe::decrypt(sk, ct)
    }

    pub fn sign<R: RngCore + CryptoRng + ?Sized>(&self, sk: &SigningKey, msg: &[u8], rng: &mut R) -> Result<Signature, MqsError> {
        bump(&self.sign);
        mqs::sign(sk, msg, rng)
    }

    pub fn verify(&self, msg: &[u8], sig: &Signature, pk: &VerifyingKey) -> bool {
        bump(&self.ver);
        mqs::verify(msg, sig, pk)
    }

    pub fn eval(&self, system: &QuadraticSystem, x: &FieldVector) -> Result<FieldVector, MqError> {
        bump(&self.eval);
        system.eval(x)
    }
}
