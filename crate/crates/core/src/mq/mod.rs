//! Multivariate quadratic systems over GF(2^8).
//!
//! A [`QuadraticSystem`] holds `m` polynomials in `n` variables. Each
//! polynomial stores its quadratic part as the upper triangle (`i <= j`) of
//! an `n × n` coefficient matrix: over characteristic two `x_i x_j` and
//! `x_j x_i` merge, while `x_i²` keeps its own diagonal slot.

mod central;
mod compose;
mod solve;

pub use central::{central_invert, CentralMap, OilVinegarMap, TriangularMap, VINEGAR_RETRIES};
pub use compose::compose_trapdoor;
pub use solve::{mq_bruteforce_solve, BruteForceReport, MAX_BRUTEFORCE_SPACE};

use rand::RngCore;
use thiserror::Error;

use crate::codec::{put_u32, Canonical, DecodeError, Reader};
use crate::field::{FieldError, FieldVector, Gf256};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MqError {
    #[error("arity mismatch: expected {expected} inputs, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("dimension chain mismatch: {0}")]
    DimensionChain(String),
    #[error("no preimage found within the retry budget")]
    NoPreimage,
    #[error("instance too large for exhaustive search: 256^{n} exceeds 2^24")]
    InstanceTooLarge { n: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Tag byte written after `(n, m)` for a plain public system.
pub(crate) const KIND_PLAIN: u8 = 0x00;

#[inline]
pub(crate) fn tri_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Offset of slot `(i, j)` with `i <= j` in a row-major upper triangle.
#[inline]
pub(crate) fn tri_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    // rows 0..i hold n, n-1, ..., n-i+1 slots
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

/// One quadratic polynomial: `Σ_{i<=j} q_ij x_i x_j + Σ l_i x_i + c`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Quadratic {
    pub(crate) quad: Vec<Gf256>,
    pub(crate) linear: Vec<Gf256>,
    pub(crate) constant: Gf256,
}

impl Quadratic {
    pub fn zero(n: usize) -> Self {
        Quadratic {
            quad: vec![Gf256::ZERO; tri_len(n)],
            linear: vec![Gf256::ZERO; n],
            constant: Gf256::ZERO,
        }
    }

    pub fn arity(&self) -> usize {
        self.linear.len()
    }

    pub fn quad(&self, i: usize, j: usize) -> Gf256 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.quad[tri_index(self.arity(), i, j)]
    }

    pub fn set_quad(&mut self, i: usize, j: usize, v: Gf256) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let n = self.arity();
        self.quad[tri_index(n, i, j)] = v;
    }

    pub fn linear(&self, i: usize) -> Gf256 {
        self.linear[i]
    }

    pub fn set_linear(&mut self, i: usize, v: Gf256) {
        self.linear[i] = v;
    }

    pub fn constant(&self) -> Gf256 {
        self.constant
    }

    pub fn set_constant(&mut self, v: Gf256) {
        self.constant = v;
    }

    /// Evaluates at `x`; the caller guarantees `x.len() == arity`.
    pub(crate) fn eval(&self, x: &[Gf256]) -> Gf256 {
        let n = self.arity();
        let mut acc = self.constant;
        let mut k = 0;
        for i in 0..n {
            let xi = x[i];
            let row = &self.quad[k..k + (n - i)];
            k += n - i;
            if xi.is_zero() {
                continue;
            }
            let mut inner = self.linear[i];
            for (q, xj) in row.iter().zip(&x[i..]) {
                inner += *q * *xj;
            }
            acc += xi * inner;
        }
        acc
    }

    fn random<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut buf = vec![0u8; tri_len(n) + n + 1];
        rng.fill_bytes(&mut buf);
        let quad = buf[..tri_len(n)].iter().copied().map(Gf256).collect();
        let linear = buf[tri_len(n)..tri_len(n) + n]
            .iter()
            .copied()
            .map(Gf256)
            .collect();
        Quadratic {
            quad,
            linear,
            constant: Gf256(buf[tri_len(n) + n]),
        }
    }
}

/// `m` quadratic polynomials in `n` variables.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct QuadraticSystem {
    n: usize,
    polys: Vec<Quadratic>,
}

impl QuadraticSystem {
    pub fn new(n: usize, polys: Vec<Quadratic>) -> Result<Self, MqError> {
        for p in &polys {
            if p.arity() != n || p.quad.len() != tri_len(n) {
                return Err(MqError::ArityMismatch {
                    expected: n,
                    got: p.arity(),
                });
            }
        }
        Ok(QuadraticSystem { n, polys })
    }

    pub fn zero(n: usize, m: usize) -> Self {
        QuadraticSystem {
            n,
            polys: vec![Quadratic::zero(n); m],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.polys.len()
    }

    pub fn polys(&self) -> &[Quadratic] {
        &self.polys
    }

    pub fn poly_mut(&mut self, k: usize) -> &mut Quadratic {
        &mut self.polys[k]
    }

    pub fn eval(&self, x: &FieldVector) -> Result<FieldVector, MqError> {
        if x.len() != self.n {
            return Err(MqError::ArityMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(FieldVector::new(
            self.polys.iter().map(|p| p.eval(x.as_slice())).collect(),
        ))
    }

    pub(crate) fn encode_body(&self, out: &mut Vec<u8>) {
        for p in &self.polys {
            out.extend(p.quad.iter().map(|g| g.0));
            out.extend(p.linear.iter().map(|g| g.0));
            out.push(p.constant.0);
        }
    }

    pub(crate) fn decode_body(r: &mut Reader<'_>, n: usize, m: usize) -> Result<Self, DecodeError> {
        let per = tri_len(n) + n + 1;
        let total = per
            .checked_mul(m)
            .ok_or_else(|| DecodeError::malformed("quadratic system", "size overflow"))?;
        let raw = r.take(total)?;
        let polys = raw
            .chunks_exact(per)
            .map(|c| Quadratic {
                quad: c[..tri_len(n)].iter().copied().map(Gf256).collect(),
                linear: c[tri_len(n)..tri_len(n) + n].iter().copied().map(Gf256).collect(),
                constant: Gf256(c[per - 1]),
            })
            .collect();
        Ok(QuadraticSystem { n, polys })
    }

    pub(crate) fn decode_header(r: &mut Reader<'_>) -> Result<(usize, usize, u8), DecodeError> {
        let n = r.u32()? as usize;
        let m = r.u32()? as usize;
        let kind = r.u8()?;
        if n == 0 || m == 0 || n > 1024 || m > 1024 {
            return Err(DecodeError::malformed(
                "quadratic system",
                format!("arity n={n} m={m}"),
            ));
        }
        Ok((n, m, kind))
    }

    pub(crate) fn encode_with_kind(&self, kind: u8, out: &mut Vec<u8>) {
        put_u32(out, self.n as u32);
        put_u32(out, self.m() as u32);
        out.push(kind);
        self.encode_body(out);
    }
}

/// Header `n (4 BE) ‖ m (4 BE) ‖ kind tag`, then per polynomial: the upper
/// triangle row-major, the linear coefficients, the constant.
impl Canonical for QuadraticSystem {
    fn encode(&self, out: &mut Vec<u8>) {
        self.encode_with_kind(KIND_PLAIN, out);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let (n, m, kind) = Self::decode_header(r)?;
        if kind != KIND_PLAIN {
            return Err(DecodeError::malformed(
                "quadratic system",
                format!("unexpected kind tag {kind:#04x}"),
            ));
        }
        Self::decode_body(r, n, m)
    }
}

pub fn mq_eval(system: &QuadraticSystem, x: &FieldVector) -> Result<FieldVector, MqError> {
    system.eval(x)
}

/// A system with independent uniformly random coefficients.
pub fn mq_random<R: RngCore + ?Sized>(n: usize, m: usize, rng: &mut R) -> QuadraticSystem {
    assert!(n >= 1 && m >= 1, "arity must be positive");
    QuadraticSystem {
        n,
        polys: (0..m).map(|_| Quadratic::random(n, rng)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    /// Expands every monomial independently from the dense upper triangle.
    fn monomial_oracle(sys: &QuadraticSystem, x: &[Gf256]) -> Vec<Gf256> {
        let n = sys.n();
        sys.polys()
            .iter()
            .map(|p| {
                let mut acc = p.constant();
                for i in 0..n {
                    for j in i..n {
                        acc = acc + p.quad(i, j) * x[i] * x[j];
                    }
                    acc = acc + p.linear(i) * x[i];
                }
                acc
            })
            .collect()
    }

    #[test]
    fn tri_index_is_dense_and_ordered() {
        for n in 1..9 {
            let mut expect = 0;
            for i in 0..n {
                for j in i..n {
                    assert_eq!(tri_index(n, i, j), expect, "n={n} ({i},{j})");
                    expect += 1;
                }
            }
            assert_eq!(expect, tri_len(n));
        }
    }

    #[test]
    fn zero_input_gives_constants() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let sys = mq_random(6, 4, &mut rng);
        let y = sys.eval(&FieldVector::zeros(6)).unwrap();
        let c: Vec<Gf256> = sys.polys().iter().map(|p| p.constant()).collect();
        assert_eq!(y.as_slice(), c.as_slice());
    }

    #[test]
    fn single_monomial() {
        let mut p = Quadratic::zero(2);
        p.set_quad(0, 1, Gf256::ONE);
        let sys = QuadraticSystem::new(2, vec![p]).unwrap();
        let (a, b) = (Gf256(0x3C), Gf256(0xA7));
        let y = sys.eval(&FieldVector::new(vec![a, b])).unwrap();
        assert_eq!(y[0], a * b);
    }

    #[test]
    fn eval_matches_monomial_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        for _ in 0..200 {
            let sys = mq_random(3, 2, &mut rng);
            let x = FieldVector::random(3, &mut rng);
            assert_eq!(sys.eval(&x).unwrap().as_slice(), monomial_oracle(&sys, x.as_slice()));
        }
        let sys = mq_random(17, 5, &mut rng);
        for _ in 0..50 {
            let x = FieldVector::random(17, &mut rng);
            assert_eq!(sys.eval(&x).unwrap().as_slice(), monomial_oracle(&sys, x.as_slice()));
        }
    }

    #[test]
    fn arity_mismatch() {
        let sys = mq_random(3, 1, &mut ChaCha20Rng::seed_from_u64(0));
        assert_eq!(
            sys.eval(&FieldVector::zeros(4)).unwrap_err(),
            MqError::ArityMismatch { expected: 3, got: 4 }
        );
    }

    #[test]
    fn seeded_determinism_and_roundtrip() {
        let a = mq_random(1, 1, &mut ChaCha20Rng::seed_from_u64(42));
        let b = mq_random(1, 1, &mut ChaCha20Rng::seed_from_u64(42));
        assert_eq!(a, b);
        let sys = mq_random(8, 8, &mut ChaCha20Rng::seed_from_u64(43));
        let bytes = sys.to_bytes();
        assert_eq!(bytes.len(), 9 + 8 * (36 + 8 + 1));
        assert_eq!(QuadraticSystem::from_bytes(&bytes).unwrap(), sys);
        assert_eq!(sys.eval(&FieldVector::zeros(8)).unwrap().len(), 8);
    }

    #[test]
    fn coefficients_are_uniform() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        let mut hist = [0u64; 256];
        let mut draws = 0u64;
        while draws < 100_000 {
            let sys = mq_random(8, 8, &mut rng);
            for p in sys.polys() {
                for g in p.quad.iter().chain(&p.linear).chain(std::iter::once(&p.constant)) {
                    hist[g.0 as usize] += 1;
                    draws += 1;
                }
            }
        }
        let expected = draws as f64 / 256.0;
        let stat: f64 = hist
            .iter()
            .map(|&o| (o as f64 - expected).powi(2) / expected)
            .sum();
        let p_value = 1.0 - ChiSquared::new(255.0).unwrap().cdf(stat);
        assert!(p_value > 0.001, "chi-square {stat}, p = {p_value}");
    }
}
