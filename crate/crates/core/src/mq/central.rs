//! Easily invertible central maps.
//!
//! * Oil and Vinegar: variables `0..v` are vinegar, `v..v+o` are oil, and no
//!   polynomial contains an oil×oil product. Fixing the vinegar values leaves
//!   a linear `o × o` system in the oil variables.
//! * Triangular: `y_i = a_i x_i + q_i(x_0..x_{i-1})` with `a_i ≠ 0`, a bijection
//!   inverted by back-substitution.

use rand::{CryptoRng, RngCore};

use super::{tri_index, MqError, Quadratic, QuadraticSystem};
use crate::codec::{Canonical, DecodeError, Reader};
use crate::field::{solve_linear, FieldVector, Gf256, Matrix};

/// Vinegar resamples attempted before reporting [`MqError::NoPreimage`].
pub const VINEGAR_RETRIES: usize = 256;

const KIND_OIL_VINEGAR: u8 = 0x01;
const KIND_TRIANGULAR: u8 = 0x02;

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OilVinegarMap {
    vinegar: usize,
    system: QuadraticSystem,
}

impl OilVinegarMap {
    pub fn random<R: RngCore + CryptoRng + ?Sized>(vinegar: usize, oil: usize, rng: &mut R) -> Self {
        assert!(vinegar >= 1 && oil >= 1, "vinegar and oil counts must be positive");
        let n = vinegar + oil;
        let mut system = QuadraticSystem::zero(n, oil);
        for k in 0..oil {
            let p = system.poly_mut(k);
            for i in 0..vinegar {
                for j in i..n {
                    p.set_quad(i, j, Gf256::random(rng));
                }
            }
            for i in 0..n {
                p.set_linear(i, Gf256::random(rng));
            }
            p.set_constant(Gf256::random(rng));
        }
        OilVinegarMap { vinegar, system }
    }

    pub fn vinegar(&self) -> usize {
        self.vinegar
    }

    pub fn oil(&self) -> usize {
        self.system.m()
    }

    pub fn system(&self) -> &QuadraticSystem {
        &self.system
    }

    /// Fixes the vinegar variables and solves the remaining linear system.
    /// `None` when the oil system is singular for this vinegar choice.
    fn try_invert_with(&self, vinegar: &[Gf256], y: &FieldVector) -> Option<FieldVector> {
        let (v, o) = (self.vinegar, self.oil());
        let mut x = vinegar.to_vec();
        x.resize(v + o, Gf256::ZERO);
        let mut a = Matrix::zeros(o);
        let mut rhs = Vec::with_capacity(o);
        for (k, p) in self.system.polys().iter().enumerate() {
            // constant part with the oil variables at zero
            rhs.push(y[k] + p.eval(&x));
            for j in 0..o {
                let col = v + j;
                let mut coeff = p.linear(col);
                for (i, xi) in vinegar.iter().enumerate() {
                    coeff += p.quad(i, col) * *xi;
                }
                a.set(k, j, coeff);
            }
        }
        let oil = solve_linear(&a, &rhs)?;
        x[v..].copy_from_slice(&oil);
        Some(FieldVector::new(x))
    }

    pub fn invert<R: RngCore + ?Sized>(&self, y: &FieldVector, rng: &mut R) -> Result<FieldVector, MqError> {
        if y.len() != self.oil() {
            return Err(MqError::ArityMismatch {
                expected: self.oil(),
                got: y.len(),
            });
        }
        for _ in 0..VINEGAR_RETRIES {
            let vinegar = FieldVector::random(self.vinegar, rng);
            if let Some(x) = self.try_invert_with(vinegar.as_slice(), y) {
                return Ok(x);
            }
        }
        Err(MqError::NoPreimage)
    }

    fn validate(&self) -> Result<(), DecodeError> {
        let n = self.system.n();
        for p in self.system.polys() {
            for i in self.vinegar..n {
                for j in i..n {
                    if !p.quad[tri_index(n, i, j)].is_zero() {
                        return Err(DecodeError::malformed(
                            "oil-vinegar map",
                            format!("nonzero oil×oil coefficient at ({i},{j})"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TriangularMap {
    system: QuadraticSystem,
}

impl TriangularMap {
    pub fn random<R: RngCore + CryptoRng + ?Sized>(n: usize, rng: &mut R) -> Self {
        assert!(n >= 1, "triangular map needs at least one variable");
        let mut system = QuadraticSystem::zero(n, n);
        for k in 0..n {
            let p = system.poly_mut(k);
            for i in 0..k {
                for j in i..k {
                    p.set_quad(i, j, Gf256::random(rng));
                }
                p.set_linear(i, Gf256::random(rng));
            }
            p.set_linear(k, Gf256::random_nonzero(rng));
            p.set_constant(Gf256::random(rng));
        }
        TriangularMap { system }
    }

    pub fn system(&self) -> &QuadraticSystem {
        &self.system
    }

    /// Back-substitution. Every step divides by the nonzero leading
    /// coefficient, so the preimage always exists and is unique.
    pub fn invert(&self, y: &FieldVector) -> Result<FieldVector, MqError> {
        let n = self.system.n();
        if y.len() != n {
            return Err(MqError::ArityMismatch {
                expected: n,
                got: y.len(),
            });
        }
        let mut x = vec![Gf256::ZERO; n];
        for (k, p) in self.system.polys().iter().enumerate() {
            // x[k..] is still zero, so this is everything except a_k x_k
            let rest = p.eval(&x);
            let lead_inv = p.linear(k).inv().ok_or(MqError::NoPreimage)?;
            x[k] = (y[k] + rest) * lead_inv;
        }
        Ok(FieldVector::new(x))
    }

    fn validate(&self) -> Result<(), DecodeError> {
        let n = self.system.n();
        if self.system.m() != n {
            return Err(DecodeError::malformed("triangular map", "must be square"));
        }
        for (k, p) in self.system.polys().iter().enumerate() {
            if p.linear(k).is_zero() {
                return Err(DecodeError::malformed(
                    "triangular map",
                    format!("zero leading coefficient in step {k}"),
                ));
            }
            let later_linear = (k + 1..n).any(|j| !p.linear(j).is_zero());
            let later_quad = (0..n).any(|i| (i.max(k)..n).any(|j| !Quadratic::quad(p, i, j).is_zero()));
            if later_linear || later_quad {
                return Err(DecodeError::malformed(
                    "triangular map",
                    format!("step {k} depends on later variables"),
                ));
            }
        }
        Ok(())
    }
}

/// The secret central map of a trapdoor.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum CentralMap {
    OilVinegar(OilVinegarMap),
    Triangular(TriangularMap),
}

impl CentralMap {
    pub fn system(&self) -> &QuadraticSystem {
        match self {
            CentralMap::OilVinegar(m) => m.system(),
            CentralMap::Triangular(m) => m.system(),
        }
    }

    pub fn n(&self) -> usize {
        self.system().n()
    }

    pub fn m(&self) -> usize {
        self.system().m()
    }

    pub fn apply(&self, x: &FieldVector) -> Result<FieldVector, MqError> {
        self.system().eval(x)
    }

    pub fn invert<R: RngCore + ?Sized>(&self, y: &FieldVector, rng: &mut R) -> Result<FieldVector, MqError> {
        match self {
            CentralMap::OilVinegar(m) => m.invert(y, rng),
            CentralMap::Triangular(m) => m.invert(y),
        }
    }
}

pub fn central_invert<R: RngCore + ?Sized>(
    map: &CentralMap,
    y: &FieldVector,
    rng: &mut R,
) -> Result<FieldVector, MqError> {
    map.invert(y, rng)
}

/// Same layout as [`QuadraticSystem`] with kind tag 0x01 (oil-vinegar,
/// `vinegar = n − m`) or 0x02 (triangular).
impl Canonical for CentralMap {
    fn encode(&self, out: &mut Vec<u8>) {
        match self {
            CentralMap::OilVinegar(m) => m.system.encode_with_kind(KIND_OIL_VINEGAR, out),
            CentralMap::Triangular(m) => m.system.encode_with_kind(KIND_TRIANGULAR, out),
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let (n, m, kind) = QuadraticSystem::decode_header(r)?;
        let system = QuadraticSystem::decode_body(r, n, m)?;
        match kind {
            KIND_OIL_VINEGAR => {
                if m >= n {
                    return Err(DecodeError::malformed("oil-vinegar map", "no vinegar variables"));
                }
                let map = OilVinegarMap {
                    vinegar: n - m,
                    system,
                };
                map.validate()?;
                Ok(CentralMap::OilVinegar(map))
            }
            KIND_TRIANGULAR => {
                let map = TriangularMap { system };
                map.validate()?;
                Ok(CentralMap::Triangular(map))
            }
            other => Err(DecodeError::malformed(
                "central map",
                format!("unknown kind tag {other:#04x}"),
            )),
        }
    }
}
