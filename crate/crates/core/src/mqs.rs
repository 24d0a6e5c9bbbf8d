//! Hash-and-sign multivariate signatures over an Oil-Vinegar trapdoor.
//!
//! The signing key is `(S, F, T)` and the verification key is the composed
//! system `P = S ∘ F ∘ T`. A message is hashed with a fresh 16-byte salt to
//! a target `x ∈ GF(256)^m`; signing computes `y = S⁻¹(x)`, `z = F⁻¹(y)`,
//! `w = T⁻¹(z)`, and verification checks `P(w) = x`.
//!
//! Parameters here are desk-scale and are not claimed to be secure.

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::codec::{Canonical, DecodeError, Reader};
use crate::field::{affine_random, AffineMap, FieldVector};
use crate::hash::{self, domain};
use crate::mq::{compose_trapdoor, CentralMap, MqError, OilVinegarMap, QuadraticSystem};

/// Salt resamples attempted before signing gives up.
pub const SALT_RETRIES: usize = 256;
pub const SALT_LEN: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MqsError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("signing failed after {SALT_RETRIES} salt retries")]
    SigningFailed,
    #[error(transparent)]
    Mq(#[from] MqError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MqsParams {
    pub vinegar: usize,
    pub oil: usize,
}

impl MqsParams {
    pub const REFERENCE: MqsParams = MqsParams { vinegar: 24, oil: 16 };
    pub const TINY: MqsParams = MqsParams { vinegar: 4, oil: 2 };

    pub fn n(&self) -> usize {
        self.vinegar + self.oil
    }

    pub fn m(&self) -> usize {
        self.oil
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VerifyingKey {
    system: QuadraticSystem,
}

impl VerifyingKey {
    pub fn system(&self) -> &QuadraticSystem {
        &self.system
    }

    pub fn key_id(&self) -> [u8; 16] {
        hash::key_id(&self.to_bytes())
    }
}

impl Canonical for VerifyingKey {
    fn encode(&self, out: &mut Vec<u8>) {
        self.system.encode(out);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(VerifyingKey {
            system: QuadraticSystem::decode(r)?,
        })
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SigningKey {
    s: AffineMap,
    f: CentralMap,
    t: AffineMap,
}

impl SigningKey {
    pub fn verifying_key(&self) -> Result<VerifyingKey, MqError> {
        Ok(VerifyingKey {
            system: compose_trapdoor(&self.s, &self.f, &self.t)?,
        })
    }

    pub fn parts(&self) -> (&AffineMap, &CentralMap, &AffineMap) {
        (&self.s, &self.f, &self.t)
    }
}

/// `S ‖ F ‖ T` in their canonical encodings.
impl Canonical for SigningKey {
    fn encode(&self, out: &mut Vec<u8>) {
        self.s.encode(out);
        self.f.encode(out);
        self.t.encode(out);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let s = AffineMap::decode(r)?;
        let f = CentralMap::decode(r)?;
        let t = AffineMap::decode(r)?;
        if !matches!(f, CentralMap::OilVinegar(_)) || s.dim() != f.m() || t.dim() != f.n() {
            return Err(DecodeError::malformed("signing key", "inconsistent trapdoor"));
        }
        Ok(SigningKey { s, f, t })
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SigKeyPair {
    pub signing: SigningKey,
    pub verifying: VerifyingKey,
    pub key_id: [u8; 16],
}

impl SigKeyPair {
    pub fn from_signing(signing: SigningKey) -> Result<Self, MqError> {
        let verifying = signing.verifying_key()?;
        let key_id = verifying.key_id();
        Ok(SigKeyPair {
            signing,
            verifying,
            key_id,
        })
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct Signature {
    pub w: FieldVector,
    pub salt: [u8; SALT_LEN],
}

/// `w` as a field vector, then the 16-byte salt.
impl Canonical for Signature {
    fn encode(&self, out: &mut Vec<u8>) {
        self.w.encode(out);
        out.extend_from_slice(&self.salt);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Signature {
            w: FieldVector::decode(r)?,
            salt: r.array()?,
        })
    }
}

/// Hashes `msg ‖ salt` to `m` field elements with SHAKE-256.
pub fn message_target(msg: &[u8], salt: &[u8; SALT_LEN], m: usize) -> FieldVector {
    let len = (msg.len() as u64).to_be_bytes();
    FieldVector::from_bytes_raw(&hash::shake(domain::SIGN_TARGET, &[&len, msg, salt], m))
}

pub fn keygen<R: RngCore + CryptoRng + ?Sized>(params: MqsParams, rng: &mut R) -> Result<SigKeyPair, MqsError> {
    if params.oil == 0 || params.vinegar < params.oil {
        return Err(MqsError::Params(format!(
            "need vinegar >= oil >= 1, got v={} o={}",
            params.vinegar, params.oil
        )));
    }
    let t = affine_random(params.n(), rng);
    let f = CentralMap::OilVinegar(OilVinegarMap::random(params.vinegar, params.oil, rng));
    let s = affine_random(params.m(), rng);
    Ok(SigKeyPair::from_signing(SigningKey { s, f, t })?)
}

pub fn sign<R: RngCore + CryptoRng + ?Sized>(sk: &SigningKey, msg: &[u8], rng: &mut R) -> Result<Signature, MqsError> {
    let m = sk.f.m();
    for _ in 0..SALT_RETRIES {
        let mut salt = [0u8; SALT_LEN];
        rng.fill_bytes(&mut salt);
        let x = message_target(msg, &salt, m);
        let y = sk.s.invert_apply(&x).map_err(MqError::from)?;
        let z = match sk.f.invert(&y, rng) {
            Ok(z) => z,
            Err(MqError::NoPreimage) => continue,
            Err(e) => return Err(e.into()),
        };
        let w = sk.t.invert_apply(&z).map_err(MqError::from)?;
        return Ok(Signature { w, salt });
    }
    Err(MqsError::SigningFailed)
}

/// Accepts iff `P(w) = H(msg ‖ salt)`. Malformed signatures are rejected.
pub fn verify(msg: &[u8], sig: &Signature, pk: &VerifyingKey) -> bool {
    let sys = pk.system();
    if sig.w.len() != sys.n() {
        return false;
    }
    match sys.eval(&sig.w) {
        Ok(y) => y == message_target(msg, &sig.salt, sys.m()),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Gf256;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn tiny_roundtrip_and_determinism() {
        let kp = keygen(MqsParams::TINY, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        let again = keygen(MqsParams::TINY, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        assert_eq!(kp, again);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let sig = sign(&kp.signing, b"hello", &mut rng).unwrap();
        assert!(verify(b"hello", &sig, &kp.verifying));
        let sig2 = sign(&kp.signing, b"hello", &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
        assert_eq!(sig.to_bytes(), sig2.to_bytes());
    }

    #[test]
    fn reference_completeness() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let kp = keygen(MqsParams::REFERENCE, &mut rng).unwrap();
        for len in [0usize, 1, 31, 200] {
            let msg: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let sig = sign(&kp.signing, &msg, &mut rng).unwrap();
            assert!(verify(&msg, &sig, &kp.verifying));
        }
    }

    #[test]
    fn flipped_message_bit_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let kp = keygen(MqsParams::REFERENCE, &mut rng).unwrap();
        let msg = b"CAN_1 commitment".to_vec();
        let sig = sign(&kp.signing, &msg, &mut rng).unwrap();
        let mut other = msg.clone();
        other[3] ^= 0x01;
        assert!(!verify(&other, &sig, &kp.verifying));
    }

    #[test]
    fn malformed_signatures_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let kp = keygen(MqsParams::TINY, &mut rng).unwrap();
        let mut sig = sign(&kp.signing, b"m", &mut rng).unwrap();
        sig.w = FieldVector::new(vec![Gf256::ONE; 3]);
        assert!(!verify(b"m", &sig, &kp.verifying));
    }

    #[test]
    fn bad_params() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        assert!(keygen(MqsParams { vinegar: 1, oil: 2 }, &mut rng).is_err());
        assert!(keygen(MqsParams { vinegar: 3, oil: 0 }, &mut rng).is_err());
    }

    #[test]
    fn key_id_stable_across_serialization() {
        let kp = keygen(MqsParams::TINY, &mut ChaCha20Rng::seed_from_u64(7)).unwrap();
        let vk = VerifyingKey::from_bytes(&kp.verifying.to_bytes()).unwrap();
        assert_eq!(vk.key_id(), kp.key_id);
        let sk = SigningKey::from_bytes(&kp.signing.to_bytes()).unwrap();
        assert_eq!(SigKeyPair::from_signing(sk).unwrap(), kp);
    }

    #[test]
    fn signature_layout() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let kp = keygen(MqsParams::REFERENCE, &mut rng).unwrap();
        let sig = sign(&kp.signing, b"x", &mut rng).unwrap();
        let bytes = sig.to_bytes();
        assert_eq!(bytes.len(), 4 + 40 + 16);
        assert_eq!(Signature::from_bytes(&bytes).unwrap(), sig);
    }
}
