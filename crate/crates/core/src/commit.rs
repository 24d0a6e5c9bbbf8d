//! Hash commitments: `c = SHA3-256("commit-v1" ‖ len(m) ‖ m ‖ r)` with a
//! fresh 32-byte opening `r`.
//!
//! Binding is computational (collision resistance of SHA3-256), not
//! statistical.

use rand::{CryptoRng, RngCore};

use crate::hash::{self, domain};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Commitment(pub [u8; 32]);

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Opening(pub [u8; 32]);

pub fn commit_with(m: &[u8], r: &Opening) -> Commitment {
    let len = (m.len() as u32).to_be_bytes();
    Commitment(hash::digest(domain::COMMIT, &[&len, m, &r.0]))
}

pub fn comm<R: RngCore + CryptoRng + ?Sized>(m: &[u8], rng: &mut R) -> (Commitment, Opening) {
    let mut r = [0u8; 32];
    rng.fill_bytes(&mut r);
    let r = Opening(r);
    (commit_with(m, &r), r)
}

pub fn open(m: &[u8], c: &Commitment, r: &Opening) -> bool {
    commit_with(m, r) == *c
}
