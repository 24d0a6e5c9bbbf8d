//! Python bindings: field arithmetic, MQ signatures and encryption,
//! commitments, scenario runs and the public audit.

use std::borrow::Cow;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use evot_core::codec::Canonical;
use evot_core::commit::{commit_with, open, Commitment, Opening};
use evot_core::field::{gf_mul as field_mul, Gf256};
use evot_core::mqe::{self, Ciphertext, EncKeyPair};
use evot_core::mqs::{self, SigKeyPair, Signature};
use evot_core::protocol::{AuditVerdict, BulletinBoard, PublicParams};
use evot_core::scenario::{self, render_op_counts, render_sizes, ParamProfile, Scenario};

type Bytes = Cow<'static, [u8]>;

fn bytes(v: Vec<u8>) -> Bytes {
    Cow::Owned(v)
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn profile(name: &str) -> PyResult<ParamProfile> {
    match name {
        "reference" => Ok(ParamProfile::Reference),
        "tiny" => Ok(ParamProfile::Tiny),
        other => Err(PyValueError::new_err(format!("unknown profile {other:?}; use 'reference' or 'tiny'"))),
    }
}

fn array32(b: &[u8], what: &str) -> PyResult<[u8; 32]> {
    b.try_into().map_err(|_| PyValueError::new_err(format!("{what} must be 32 bytes")))
}

/// Product in GF(2^8) modulo x^8 + x^4 + x^3 + x + 1.
#[pyfunction]
fn gf_mul(a: u8, b: u8) -> u8 {
    field_mul(Gf256(a), Gf256(b)).0
}

/// Oil-Vinegar signing key pair.
#[pyclass(frozen)]
struct SigningKeyPair {
    inner: SigKeyPair,
}

#[pymethods]
impl SigningKeyPair {
    #[new]
    #[pyo3(signature = (seed, profile = "reference"))]
    fn new(seed: u64, profile: &str) -> PyResult<Self> {
        let params = self::profile(profile)?.params().sig;
        let inner = mqs::keygen(params, &mut ChaCha20Rng::seed_from_u64(seed)).map_err(value_err)?;
        Ok(SigningKeyPair { inner })
    }

    #[staticmethod]
    fn from_secret(secret: &[u8]) -> PyResult<Self> {
        let sk = mqs::SigningKey::from_bytes(secret).map_err(value_err)?;
        Ok(SigningKeyPair {
            inner: SigKeyPair::from_signing(sk).map_err(value_err)?,
        })
    }

    #[getter]
    fn public_key(&self) -> Bytes {
        bytes(self.inner.verifying.to_bytes())
    }

    #[getter]
    fn secret_key(&self) -> Bytes {
        bytes(self.inner.signing.to_bytes())
    }

    #[getter]
    fn key_id(&self) -> Bytes {
        bytes(self.inner.key_id.to_vec())
    }

    #[pyo3(signature = (message, seed = 0))]
    fn sign(&self, py: Python<'_>, message: &[u8], seed: u64) -> PyResult<Bytes> {
        let sig = py
            .detach(|| mqs::sign(&self.inner.signing, message, &mut ChaCha20Rng::seed_from_u64(seed)))
            .map_err(value_err)?;
        Ok(bytes(sig.to_bytes()))
    }

    fn verify(&self, message: &[u8], signature: &[u8]) -> bool {
        Signature::from_bytes(signature).is_ok_and(|s| mqs::verify(message, &s, &self.inner.verifying))
    }
}

/// Verifies against an encoded public key.
#[pyfunction]
fn verify(public_key: &[u8], message: &[u8], signature: &[u8]) -> PyResult<bool> {
    let pk = mqs::VerifyingKey::from_bytes(public_key).map_err(value_err)?;
    Ok(Signature::from_bytes(signature).is_ok_and(|s| mqs::verify(message, &s, &pk)))
}

/// Triangular KEM-DEM key pair.
#[pyclass(frozen)]
struct EncryptionKeyPair {
    inner: EncKeyPair,
}

#[pymethods]
impl EncryptionKeyPair {
    #[new]
    #[pyo3(signature = (seed, profile = "reference"))]
    fn new(seed: u64, profile: &str) -> PyResult<Self> {
        let n = self::profile(profile)?.params().enc_n;
        let inner = mqe::keygen(n, &mut ChaCha20Rng::seed_from_u64(seed)).map_err(value_err)?;
        Ok(EncryptionKeyPair { inner })
    }

    #[getter]
    fn public_key(&self) -> Bytes {
        bytes(self.inner.public.to_bytes())
    }

    #[getter]
    fn secret_key(&self) -> Bytes {
        bytes(self.inner.secret.to_bytes())
    }

    #[pyo3(signature = (payload, seed = 0))]
    fn encrypt(&self, payload: &[u8], seed: u64) -> Bytes {
        bytes(mqe::encrypt(&self.inner.public, payload, &mut ChaCha20Rng::seed_from_u64(seed)).to_bytes())
    }

    /// Raises ValueError when the ciphertext is malformed or fails its tag.
    fn decrypt(&self, ciphertext: &[u8]) -> PyResult<Bytes> {
        let ct = Ciphertext::from_bytes(ciphertext).map_err(value_err)?;
        mqe::decrypt(&self.inner.secret, &ct).map(bytes).map_err(value_err)
    }
}

#[pyfunction]
fn commit(message: &[u8], opening: &[u8]) -> PyResult<Bytes> {
    let r = Opening(array32(opening, "opening")?);
    Ok(bytes(commit_with(message, &r).0.to_vec()))
}

#[pyfunction]
fn open_commitment(message: &[u8], commitment: &[u8], opening: &[u8]) -> PyResult<bool> {
    let c = Commitment(array32(commitment, "commitment")?);
    Ok(open(message, &c, &Opening(array32(opening, "opening")?)))
}

/// Outcome of one scenario run.
#[pyclass(frozen)]
struct ScenarioReport {
    inner: scenario::ScenarioReport,
}

#[pymethods]
impl ScenarioReport {
    #[getter]
    fn election_id(&self) -> &str {
        &self.inner.scenario.election_id
    }

    #[getter]
    fn passed(&self) -> bool {
        self.inner.passed()
    }

    /// `[(candidate, count)]` as published, or None.
    #[getter]
    fn published(&self) -> Option<Vec<(String, u64)>> {
        self.inner.published.as_ref().map(|r| r.counts.clone())
    }

    #[getter]
    fn expected(&self) -> Vec<(String, u64)> {
        self.inner.expected_counts.clone()
    }

    #[getter]
    fn audit(&self) -> String {
        match &self.inner.audit {
            Ok(v) => v.to_string(),
            Err(e) => e.to_string(),
        }
    }

    /// `[(directive, passed, observed)]`.
    #[getter]
    fn outcomes(&self) -> Vec<(String, bool, String)> {
        self.inner
            .outcomes
            .iter()
            .map(|o| (o.directive.clone(), o.passed, o.observed.clone()))
            .collect()
    }

    #[getter]
    fn failures(&self) -> Vec<String> {
        self.inner.failures.clone()
    }

    /// Board export, in the service log format.
    #[getter]
    fn board(&self) -> Bytes {
        bytes(self.inner.board_bytes())
    }

    #[getter]
    fn params(&self) -> Bytes {
        bytes(self.inner.pp.to_bytes())
    }

    fn op_counts(&self) -> String {
        render_op_counts(&self.inner.counters)
    }

    fn sizes(&self) -> Option<String> {
        self.inner.sizes.as_ref().map(render_sizes)
    }

    fn __repr__(&self) -> String {
        format!(
            "ScenarioReport({:?}, passed={}, entries={})",
            self.inner.scenario.election_id,
            self.inner.passed(),
            self.inner.board.len()
        )
    }
}

/// Parses and runs a scenario file's text in-process.
#[pyfunction]
fn run_scenario(py: Python<'_>, text: &str) -> PyResult<ScenarioReport> {
    let s = Scenario::parse(text).map_err(value_err)?;
    let inner = py.detach(|| scenario::run_scenario(&s)).map_err(value_err)?;
    Ok(ScenarioReport { inner })
}

/// Audits a board export against encoded public parameters.
///
/// Returns `("consistent", None, summary)`, `("discrepancy", seq, detail)`
/// or `("not-public", None, reason)`.
#[pyfunction]
fn audit(board: &[u8], params: &[u8]) -> PyResult<(&'static str, Option<u64>, String)> {
    let entries = BulletinBoard::parse_export(board).map_err(value_err)?;
    let pp = PublicParams::from_bytes(params).map_err(value_err)?;
    Ok(match evot_core::protocol::audit(&entries, &pp) {
        Ok(v @ AuditVerdict::Consistent(_)) => ("consistent", None, v.to_string()),
        Ok(AuditVerdict::Discrepancy { seq, detail }) => ("discrepancy", Some(seq), detail),
        Err(e) => ("not-public", None, e.to_string()),
    })
}

#[pymodule]
fn pqevot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(gf_mul, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(commit, m)?)?;
    m.add_function(wrap_pyfunction!(open_commitment, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_class::<SigningKeyPair>()?;
    m.add_class::<EncryptionKeyPair>()?;
    m.add_class::<ScenarioReport>()?;
    Ok(())
}
