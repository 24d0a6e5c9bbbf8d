//! Multivariate public-key encryption for arbitrary-length payloads.
//!
//! A random `x ∈ GF(256)^n` is encapsulated as `P(x)` under a
//! triangular-central-map trapdoor `P = L ∘ F ∘ T`. The payload is XORed
//! with a SHAKE-256 keystream derived from `x`, and a SHA3-256 tag over
//! `x ‖ body` lets decryption detect any tampering.

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::codec::{put_bytes, Canonical, DecodeError, Reader};
use crate::field::{affine_random, AffineMap, FieldVector};
use crate::hash::{self, domain, Digest32};
use crate::mq::{compose_trapdoor, CentralMap, MqError, QuadraticSystem, TriangularMap};

pub const TAG_LEN: usize = 32;
pub const REFERENCE_N: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecryptError {
    #[error("integrity tag mismatch")]
    Tag,
    #[error("encapsulation has no preimage")]
    NoPreimage,
    #[error("malformed ciphertext: {0}")]
    Malformed(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MqeError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Mq(#[from] MqError),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EncryptionKey {
    system: QuadraticSystem,
}

impl EncryptionKey {
    pub fn system(&self) -> &QuadraticSystem {
        &self.system
    }

    pub fn key_id(&self) -> [u8; 16] {
        hash::key_id(&self.to_bytes())
    }
}

impl Canonical for EncryptionKey {
    fn encode(&self, out: &mut Vec<u8>) {
        self.system.encode(out);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let system = QuadraticSystem::decode(r)?;
        if system.n() != system.m() {
            return Err(DecodeError::malformed("encryption key", "must be square"));
        }
        Ok(EncryptionKey { system })
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DecryptionKey {
    l: AffineMap,
    f: CentralMap,
    t: AffineMap,
}

impl DecryptionKey {
    pub fn encryption_key(&self) -> Result<EncryptionKey, MqError> {
        Ok(EncryptionKey {
            system: compose_trapdoor(&self.l, &self.f, &self.t)?,
        })
    }

    pub fn parts(&self) -> (&AffineMap, &CentralMap, &AffineMap) {
        (&self.l, &self.f, &self.t)
    }

    /// Recovers `x` from `P(x)` via `L⁻¹`, `F⁻¹`, `T⁻¹`.
    pub fn decapsulate(&self, encap: &FieldVector) -> Result<FieldVector, DecryptError> {
        let z = self
            .l
            .invert_apply(encap)
            .map_err(|e| DecryptError::Malformed(e.to_string()))?;
        let w = match &self.f {
            CentralMap::Triangular(tri) => tri.invert(&z).map_err(|_| DecryptError::NoPreimage)?,
            CentralMap::OilVinegar(_) => return Err(DecryptError::NoPreimage),
        };
        self.t
            .invert_apply(&w)
            .map_err(|e| DecryptError::Malformed(e.to_string()))
    }
}

/// `L ‖ F ‖ T` in their canonical encodings.
impl Canonical for DecryptionKey {
    fn encode(&self, out: &mut Vec<u8>) {
        self.l.encode(out);
        self.f.encode(out);
        self.t.encode(out);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let l = AffineMap::decode(r)?;
        let f = CentralMap::decode(r)?;
        let t = AffineMap::decode(r)?;
        if !matches!(f, CentralMap::Triangular(_)) || l.dim() != f.m() || t.dim() != f.n() {
            return Err(DecodeError::malformed("decryption key", "inconsistent trapdoor"));
        }
        Ok(DecryptionKey { l, f, t })
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EncKeyPair {
    pub secret: DecryptionKey,
    pub public: EncryptionKey,
    pub key_id: [u8; 16],
}

impl EncKeyPair {
    pub fn from_secret(secret: DecryptionKey) -> Result<Self, MqError> {
        let public = secret.encryption_key()?;
        let key_id = public.key_id();
        Ok(EncKeyPair {
            secret,
            public,
            key_id,
        })
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct Ciphertext {
    pub encap: FieldVector,
    pub body: Vec<u8>,
    pub tag: Digest32,
}

impl Ciphertext {
    /// Size of the canonical encoding for a payload of `payload_len` bytes
    /// under an `n`-element encapsulation.
    pub fn encoded_size(n: usize, payload_len: usize) -> usize {
        4 + n + 4 + payload_len + TAG_LEN
    }
}

/// Encap vector ‖ 4-byte BE body length ‖ body ‖ 32-byte tag.
impl Canonical for Ciphertext {
    fn encode(&self, out: &mut Vec<u8>) {
        self.encap.encode(out);
        put_bytes(out, &self.body);
        out.extend_from_slice(&self.tag);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Ciphertext {
            encap: FieldVector::decode(r)?,
            body: r.bytes()?.to_vec(),
            tag: r.array()?,
        })
    }
}

fn keystream(x: &FieldVector, len: usize) -> Vec<u8> {
    let key = hash::digest(domain::KEM_KEY, &[&x.raw_bytes()]);
    hash::shake(domain::KEM_STREAM, &[&key], len)
}

fn tag(x: &FieldVector, body: &[u8]) -> Digest32 {
    hash::digest(domain::KEM_TAG, &[&x.raw_bytes(), body])
}

pub fn keygen<R: RngCore + CryptoRng + ?Sized>(n: usize, rng: &mut R) -> Result<EncKeyPair, MqeError> {
    if n < 2 {
        return Err(MqeError::Params(format!("need n >= 2, got {n}")));
    }
    let t = affine_random(n, rng);
    let f = CentralMap::Triangular(TriangularMap::random(n, rng));
    let l = affine_random(n, rng);
    Ok(EncKeyPair::from_secret(DecryptionKey { l, f, t })?)
}

pub fn encrypt<R: RngCore + CryptoRng + ?Sized>(pk: &EncryptionKey, payload: &[u8], rng: &mut R) -> Ciphertext {
    let x = FieldVector::random(pk.system.n(), rng);
    let encap = pk
        .system
        .eval(&x)
        .expect("x sampled with the key's arity");
    let body: Vec<u8> = payload
        .iter()
        .zip(keystream(&x, payload.len()))
        .map(|(p, k)| p ^ k)
        .collect();
    let tag = tag(&x, &body);
    Ciphertext { encap, body, tag }
}

pub fn decrypt(sk: &DecryptionKey, ct: &Ciphertext) -> Result<Vec<u8>, DecryptError> {
    if ct.encap.len() != sk.l.dim() {
        return Err(DecryptError::Malformed(format!(
            "encapsulation has {} elements, expected {}",
            ct.encap.len(),
            sk.l.dim()
        )));
    }
    let x = sk.decapsulate(&ct.encap)?;
    if tag(&x, &ct.body) != ct.tag {
        return Err(DecryptError::Tag);
    }
    Ok(ct
        .body
        .iter()
        .zip(keystream(&x, ct.body.len()))
        .map(|(c, k)| c ^ k)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn roundtrip_and_empty_payload() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let kp = keygen(8, &mut rng).unwrap();
        for _ in 0..100 {
            let len = rng.gen_range(0..300);
            let p: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let ct = encrypt(&kp.public, &p, &mut rng);
            assert_eq!(decrypt(&kp.secret, &ct).unwrap(), p);
        }
        let ct = encrypt(&kp.public, &[], &mut rng);
        assert!(ct.body.is_empty());
        assert_eq!(decrypt(&kp.secret, &ct).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn seeded_keygen_is_deterministic() {
        let a = keygen(8, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
        let b = keygen(8, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inversion_chain_recovers_x() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let kp = keygen(REFERENCE_N, &mut rng).unwrap();
        for _ in 0..200 {
            let x = FieldVector::random(REFERENCE_N, &mut rng);
            let y = kp.public.system().eval(&x).unwrap();
            assert_eq!(kp.secret.decapsulate(&y).unwrap(), x);
        }
    }

    #[test]
    fn fresh_randomness_gives_distinct_ciphertexts() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let kp = keygen(REFERENCE_N, &mut rng).unwrap();
        let a = encrypt(&kp.public, b"same payload", &mut rng);
        let b = encrypt(&kp.public, b"same payload", &mut rng);
        assert_ne!(a.encap, b.encap);
        assert_ne!(a.body, b.body);
    }

    #[test]
    fn tamper_detection() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let kp = keygen(REFERENCE_N, &mut rng).unwrap();
        let ct = encrypt(&kp.public, b"ballot", &mut rng);
        let mut bad = ct.clone();
        bad.body[0] ^= 1;
        assert_eq!(decrypt(&kp.secret, &bad), Err(DecryptError::Tag));
        let mut bad = ct.clone();
        bad.encap = FieldVector::random(REFERENCE_N, &mut rng);
        assert_eq!(decrypt(&kp.secret, &bad), Err(DecryptError::Tag));
        let mut bad = ct;
        bad.encap = FieldVector::zeros(3);
        assert!(matches!(decrypt(&kp.secret, &bad), Err(DecryptError::Malformed(_))));
    }

    #[test]
    fn ciphertext_layout() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let kp = keygen(REFERENCE_N, &mut rng).unwrap();
        let ct = encrypt(&kp.public, &[7u8; 10], &mut rng);
        let bytes = ct.to_bytes();
        assert_eq!(bytes.len(), Ciphertext::encoded_size(REFERENCE_N, 10));
        assert_eq!(&bytes[36..40], &[0, 0, 0, 10]);
        assert_eq!(Ciphertext::from_bytes(&bytes).unwrap(), ct);
    }

    #[test]
    fn secret_key_roundtrip_rebuilds_public() {
        let kp = keygen(8, &mut ChaCha20Rng::seed_from_u64(7)).unwrap();
        let sk = DecryptionKey::from_bytes(&kp.secret.to_bytes()).unwrap();
        assert_eq!(EncKeyPair::from_secret(sk).unwrap(), kp);
        assert!(keygen(1, &mut ChaCha20Rng::seed_from_u64(7)).is_err());
    }
}
