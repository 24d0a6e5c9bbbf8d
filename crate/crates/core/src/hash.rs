//! SHA3-256 digests and SHAKE-256 streams with per-use domain labels.

use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::{Digest, Sha3_256, Shake256};

pub type Digest32 = [u8; 32];

pub mod domain {
    pub const KEY_ID: &[u8] = b"evot-key-id-v1";
    pub const SIGN_TARGET: &[u8] = b"evot-mqs-target-v1";
    pub const KEM_KEY: &[u8] = b"evot-mqe-key-v1";
    pub const KEM_STREAM: &[u8] = b"evot-mqe-stream-v1";
    pub const KEM_TAG: &[u8] = b"evot-mqe-tag-v1";
    pub const COMMIT: &[u8] = b"commit-v1";
    pub const BOARD: &[u8] = b"evot-board-v1";
    pub const RECEIPT: &[u8] = b"evot-receipt-v1";
    pub const IDENTITY: &[u8] = b"evot-identity-v1";
    pub const SESSION: &[u8] = b"evot-session-v1";
    pub const SEED: &[u8] = b"evot-seed-v1";
}

/// SHA3-256 over `domain ‖ parts[0] ‖ parts[1] ‖ ...`.
///
/// Callers are responsible for making the concatenation unambiguous
/// (fixed-width fields or explicit length prefixes).
pub fn digest(domain: &[u8], parts: &[&[u8]]) -> Digest32 {
    let mut h = Sha3_256::new();
    Digest::update(&mut h, domain);
    for p in parts {
        Digest::update(&mut h, p);
    }
    h.finalize().into()
}

/// `len` bytes of SHAKE-256 output over `domain ‖ parts...`.
pub fn shake(domain: &[u8], parts: &[&[u8]], len: usize) -> Vec<u8> {
    let mut x = Shake256::default();
    x.update(domain);
    for p in parts {
        x.update(p);
    }
    let mut out = vec![0u8; len];
    x.finalize_xof().read(&mut out);
    out
}

pub fn key_id(encoded_public_key: &[u8]) -> [u8; 16] {
    let d = digest(domain::KEY_ID, &[encoded_public_key]);
    let mut id = [0u8; 16];
    id.copy_from_slice(&d[..16]);
    id
}
