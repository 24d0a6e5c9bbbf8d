//! Arithmetic over GF(2^8) with reduction polynomial x^8 + x^4 + x^3 + x + 1,
//! plus fixed-length vectors, square matrices and invertible affine maps.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Sub};

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::codec::{put_u32, Canonical, DecodeError, Reader};

/// Low byte of the reduction polynomial 0x11B.
const REDUCTION: u8 = 0x1B;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is singular")]
    Singular,
}

const fn xtime(a: u8) -> u8 {
    let shifted = a << 1;
    if a & 0x80 != 0 {
        shifted ^ REDUCTION
    } else {
        shifted
    }
}

// 0x03 generates the multiplicative group of GF(256) under 0x11B.
const TABLES: ([u8; 512], [u8; 256]) = {
    let mut exp = [0u8; 512];
    let mut log = [0u8; 256];
    let mut x: u8 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x;
        log[x as usize] = i as u8;
        x = xtime(x) ^ x;
        i += 1;
    }
    while i < 512 {
        exp[i] = exp[i - 255];
        i += 1;
    }
    (exp, log)
};
const EXP: [u8; 512] = TABLES.0;
const LOG: [u8; 256] = TABLES.1;

/// An element of GF(2^8).
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(self) -> Option<Gf256> {
        if self.0 == 0 {
            None
        } else {
            Some(Gf256(EXP[255 - LOG[self.0 as usize] as usize]))
        }
    }

    pub fn pow(self, mut e: u32) -> Gf256 {
        let mut base = self;
        let mut acc = Gf256::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Gf256 {
        let mut b = [0u8; 1];
        rng.fill_bytes(&mut b);
        Gf256(b[0])
    }

    pub fn random_nonzero<R: RngCore + ?Sized>(rng: &mut R) -> Gf256 {
        loop {
            let g = Gf256::random(rng);
            if !g.is_zero() {
                return g;
            }
        }
    }
}

/// Product of two field elements.
pub fn gf_mul(a: Gf256, b: Gf256) -> Gf256 {
    if a.0 == 0 || b.0 == 0 {
        return Gf256::ZERO;
    }
    Gf256(EXP[LOG[a.0 as usize] as usize + LOG[b.0 as usize] as usize])
}

impl fmt::Debug for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#04x}", self.0)
    }
}

impl Add for Gf256 {
    type Output = Gf256;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

// characteristic two: subtraction is addition
impl Sub for Gf256 {
    type Output = Gf256;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn sub(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl AddAssign for Gf256 {
    fn add_assign(&mut self, rhs: Gf256) {
        self.0 ^= rhs.0;
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    fn mul(self, rhs: Gf256) -> Gf256 {
        gf_mul(self, rhs)
    }
}

impl MulAssign for Gf256 {
    fn mul_assign(&mut self, rhs: Gf256) {
        *self = gf_mul(*self, rhs);
    }
}

impl From<u8> for Gf256 {
    fn from(b: u8) -> Self {
        Gf256(b)
    }
}

/// A vector over GF(2^8) whose length is fixed at construction.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct FieldVector(Vec<Gf256>);

impl FieldVector {
    pub fn new(elements: Vec<Gf256>) -> Self {
        FieldVector(elements)
    }

    pub fn zeros(len: usize) -> Self {
        FieldVector(vec![Gf256::ZERO; len])
    }

    pub fn from_bytes_raw(bytes: &[u8]) -> Self {
        FieldVector(bytes.iter().copied().map(Gf256).collect())
    }

    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut buf = vec![0u8; len];
        rng.fill_bytes(&mut buf);
        FieldVector::from_bytes_raw(&buf)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Gf256] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [Gf256] {
        &mut self.0
    }

    pub fn raw_bytes(&self) -> Vec<u8> {
        self.0.iter().map(|g| g.0).collect()
    }

    pub fn concat(&self, other: &FieldVector) -> FieldVector {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        FieldVector(v)
    }

    pub fn try_add(&self, other: &FieldVector) -> Result<FieldVector, FieldError> {
        if self.len() != other.len() {
            return Err(FieldError::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(FieldVector(
            self.0.iter().zip(&other.0).map(|(a, b)| *a + *b).collect(),
        ))
    }

    pub fn dot(&self, other: &[Gf256]) -> Gf256 {
        self.0
            .iter()
            .zip(other)
            .fold(Gf256::ZERO, |acc, (a, b)| acc + *a * *b)
    }
}

impl std::ops::Index<usize> for FieldVector {
    type Output = Gf256;
    fn index(&self, i: usize) -> &Gf256 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for FieldVector {
    fn index_mut(&mut self, i: usize) -> &mut Gf256 {
        &mut self.0[i]
    }
}

impl fmt::Debug for FieldVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldVector[")?;
        for g in &self.0 {
            write!(f, "{:02x}", g.0)?;
        }
        write!(f, "]")
    }
}

impl From<Vec<Gf256>> for FieldVector {
    fn from(v: Vec<Gf256>) -> Self {
        FieldVector(v)
    }
}

/// 4-byte big-endian length, then one byte per element.
impl Canonical for FieldVector {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u32(out, self.0.len() as u32);
        out.extend(self.0.iter().map(|g| g.0));
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let n = r.u32()? as usize;
        Ok(FieldVector::from_bytes_raw(r.take(n)?))
    }
}

/// Dense square matrix, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Matrix {
    dim: usize,
    data: Vec<Gf256>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![Gf256::ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, Gf256::ONE);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Gf256>>) -> Result<Self, FieldError> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(FieldError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend(row);
        }
        Ok(Matrix { dim, data })
    }

    pub fn random<R: RngCore + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let mut buf = vec![0u8; dim * dim];
        rng.fill_bytes(&mut buf);
        Matrix {
            dim,
            data: buf.into_iter().map(Gf256).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Gf256 {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Gf256) {
        self.data[r * self.dim + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Gf256] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[Gf256]) -> Vec<Gf256> {
        (0..self.dim)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .fold(Gf256::ZERO, |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    pub fn mul_mat(&self, other: &Matrix) -> Matrix {
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let idx = i * n + j;
                    out.data[idx] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Gauss-Jordan inverse; `None` when singular.
    pub fn inverse(&self) -> Option<Matrix> {
        let n = self.dim;
        let mut a = self.clone();
        let mut inv = Matrix::identity(n);
        for col in 0..n {
            let pivot = (col..n).find(|&r| !a.get(r, col).is_zero())?;
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let p_inv = a.get(col, col).inv()?;
            a.scale_row(col, p_inv);
            inv.scale_row(col, p_inv);
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.get(r, col);
                if f.is_zero() {
                    continue;
                }
                a.add_scaled_row(r, col, f);
                inv.add_scaled_row(r, col, f);
            }
        }
        Some(inv)
    }

    pub fn is_invertible(&self) -> bool {
        solve_linear(self, &vec![Gf256::ZERO; self.dim]).is_some()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for c in 0..self.dim {
            self.data.swap(a * self.dim + c, b * self.dim + c);
        }
    }

    fn scale_row(&mut self, r: usize, f: Gf256) {
        for c in 0..self.dim {
            self.data[r * self.dim + c] *= f;
        }
    }

    // row[dst] += f * row[src]
    fn add_scaled_row(&mut self, dst: usize, src: usize, f: Gf256) {
        for c in 0..self.dim {
            let v = self.get(src, c) * f;
            self.data[dst * self.dim + c] += v;
        }
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.dim).map(|r| self.row(r)))
            .finish()
    }
}

/// Solves `a · x = b` by Gaussian elimination. Returns `None` if `a` is singular.
pub fn solve_linear(a: &Matrix, b: &[Gf256]) -> Option<Vec<Gf256>> {
    let n = a.dim();
    // augmented rows: n coefficients followed by the right-hand side
    let mut rows: Vec<Vec<Gf256>> = (0..n)
        .map(|r| {
            let mut row = a.row(r).to_vec();
            row.push(b[r]);
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !rows[r][col].is_zero())?;
        rows.swap(pivot, col);
        let p_inv = rows[col][col].inv()?;
        for v in rows[col].iter_mut() {
            *v *= p_inv;
        }
        let pivot_row = rows[col].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r == col || row[col].is_zero() {
                continue;
            }
            let f = row[col];
            for (dst, src) in row.iter_mut().zip(&pivot_row).skip(col) {
                *dst += f * *src;
            }
        }
    }
    Some(rows.into_iter().map(|row| row[n]).collect())
}

/// `v ↦ matrix · v + offset` with an invertible matrix.
#[derive(Clone, PartialEq, Eq)]
pub struct AffineMap {
    matrix: Matrix,
    offset: FieldVector,
    inverse: Matrix,
}

impl AffineMap {
    pub fn new(matrix: Matrix, offset: FieldVector) -> Result<Self, FieldError> {
        if offset.len() != matrix.dim() {
            return Err(FieldError::DimensionMismatch {
                expected: matrix.dim(),
                got: offset.len(),
            });
        }
        let inverse = matrix.inverse().ok_or(FieldError::Singular)?;
        Ok(AffineMap {
            matrix,
            offset,
            inverse,
        })
    }

    pub fn identity(dim: usize) -> Self {
        AffineMap {
            matrix: Matrix::identity(dim),
            offset: FieldVector::zeros(dim),
            inverse: Matrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn offset(&self) -> &FieldVector {
        &self.offset
    }

    fn check(&self, v: &FieldVector) -> Result<(), FieldError> {
        if v.len() != self.dim() {
            return Err(FieldError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, v: &FieldVector) -> Result<FieldVector, FieldError> {
        self.check(v)?;
        let mut out = self.matrix.mul_vec(v.as_slice());
        for (o, c) in out.iter_mut().zip(self.offset.as_slice()) {
            *o += *c;
        }
        Ok(FieldVector(out))
    }

    /// The unique `u` with `apply(u) = v`.
    pub fn invert_apply(&self, v: &FieldVector) -> Result<FieldVector, FieldError> {
        self.check(v)?;
        let shifted: Vec<Gf256> = v
            .as_slice()
            .iter()
            .zip(self.offset.as_slice())
            .map(|(a, b)| *a + *b)
            .collect();
        Ok(FieldVector(self.inverse.mul_vec(&shifted)))
    }
}

impl fmt::Debug for AffineMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineMap")
            .field("matrix", &self.matrix)
            .field("offset", &self.offset)
            .finish()
    }
}

/// Samples a uniformly random invertible affine map by rejection.
pub fn affine_random<R: RngCore + CryptoRng + ?Sized>(dim: usize, rng: &mut R) -> AffineMap {
    assert!(dim >= 1, "affine map dimension must be positive");
    loop {
        let matrix = Matrix::random(dim, rng);
        if let Some(inverse) = matrix.inverse() {
            let offset = FieldVector::random(dim, rng);
            return AffineMap {
                matrix,
                offset,
                inverse,
            };
        }
    }
}

pub fn affine_apply(map: &AffineMap, v: &FieldVector) -> Result<FieldVector, FieldError> {
    map.apply(v)
}

pub fn affine_invert_apply(map: &AffineMap, v: &FieldVector) -> Result<FieldVector, FieldError> {
    map.invert_apply(v)
}

/// Dimension (4 bytes BE), matrix row-major, then the offset elements.
impl Canonical for AffineMap {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u32(out, self.dim() as u32);
        out.extend(self.matrix.data.iter().map(|g| g.0));
        out.extend(self.offset.as_slice().iter().map(|g| g.0));
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let dim = r.u32()? as usize;
        if dim == 0 || dim > 4096 {
            return Err(DecodeError::malformed("affine map", format!("dimension {dim}")));
        }
        let data = r.take(dim * dim)?.iter().copied().map(Gf256).collect();
        let offset = FieldVector::from_bytes_raw(r.take(dim)?);
        AffineMap::new(Matrix { dim, data }, offset)
            .map_err(|e| DecodeError::malformed("affine map", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    /// Shift-and-add multiplication with explicit reduction, independent of the log tables.
    fn peasant_mul(mut a: u8, mut b: u8) -> u8 {
        let mut p = 0u8;
        while b != 0 {
            if b & 1 != 0 {
                p ^= a;
            }
            let carry = a & 0x80 != 0;
            a <<= 1;
            if carry {
                a ^= 0x1B;
            }
            b >>= 1;
        }
        p
    }

    #[test]
    fn mul_matches_peasant_exhaustively() {
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(gf_mul(Gf256(a), Gf256(b)).0, peasant_mul(a, b), "{a} * {b}");
            }
        }
    }

    #[test]
    fn mul_known_pair() {
        // 0x53 and 0xCA are mutual inverses under 0x11B
        let oracle = peasant_mul(0x53, 0xCA);
        assert_eq!(oracle, 0x01);
        assert_eq!(gf_mul(Gf256(0x53), Gf256(0xCA)), Gf256(oracle));
    }

    #[test]
    fn zero_and_identity() {
        for a in 0..=255u8 {
            assert_eq!(gf_mul(Gf256(a), Gf256::ZERO), Gf256::ZERO);
            assert_eq!(gf_mul(Gf256(a), Gf256::ONE), Gf256(a));
            assert_eq!(Gf256(a) + Gf256(a), Gf256::ZERO);
        }
    }

    #[test]
    fn inverses_exhaustive() {
        assert_eq!(Gf256::ZERO.inv(), None);
        for a in 1..=255u8 {
            let inv = Gf256(a).inv().unwrap();
            assert_eq!(peasant_mul(a, inv.0), 1);
        }
    }

    #[test]
    fn field_axioms_random_triples() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let (a, b, c) = (
                Gf256::random(&mut rng),
                Gf256::random(&mut rng),
                Gf256::random(&mut rng),
            );
            assert_eq!(a * (b * c), (a * b) * c);
            assert_eq!(a * (b + c), a * b + a * c);
            assert_eq!(a * b, b * a);
        }
    }

    #[test]
    fn affine_identity_and_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let id = AffineMap::identity(5);
        let v = FieldVector::random(5, &mut rng);
        assert_eq!(id.apply(&v).unwrap(), v);
        assert_eq!(id.invert_apply(&v).unwrap(), v);

        let map = affine_random(12, &mut rng);
        for _ in 0..1000 {
            let v = FieldVector::random(12, &mut rng);
            assert_eq!(map.invert_apply(&map.apply(&v).unwrap()).unwrap(), v);
            assert_eq!(map.apply(&map.invert_apply(&v).unwrap()).unwrap(), v);
        }
    }

    #[test]
    fn affine_2x2_against_naive_dot_product() {
        let m = Matrix::from_rows(vec![
            vec![Gf256(0x02), Gf256(0x03)],
            vec![Gf256(0x01), Gf256(0x09)],
        ])
        .unwrap();
        let off = FieldVector::new(vec![Gf256(0x10), Gf256(0xAA)]);
        let map = AffineMap::new(m, off).unwrap();
        let (x0, x1) = (0x57u8, 0x83u8);
        let y0 = peasant_mul(0x02, x0) ^ peasant_mul(0x03, x1) ^ 0x10;
        let y1 = peasant_mul(0x01, x0) ^ peasant_mul(0x09, x1) ^ 0xAA;
        let got = map
            .apply(&FieldVector::new(vec![Gf256(x0), Gf256(x1)]))
            .unwrap();
        assert_eq!(got.raw_bytes(), vec![y0, y1]);
    }

    #[test]
    fn affine_2x2_inverse_against_exhaustive_search() {
        let m = Matrix::from_rows(vec![
            vec![Gf256(0x0E), Gf256(0x0B)],
            vec![Gf256(0x0D), Gf256(0x09)],
        ])
        .unwrap();
        let off = FieldVector::new(vec![Gf256(0x01), Gf256(0x02)]);
        let map = AffineMap::new(m, off).unwrap();
        let target = [0x42u8, 0x17u8];
        // enumerate all 65536 inputs with the peasant oracle
        let mut found = Vec::new();
        for u0 in 0..=255u8 {
            for u1 in 0..=255u8 {
                let y0 = peasant_mul(0x0E, u0) ^ peasant_mul(0x0B, u1) ^ 0x01;
                let y1 = peasant_mul(0x0D, u0) ^ peasant_mul(0x09, u1) ^ 0x02;
                if [y0, y1] == target {
                    found.push([u0, u1]);
                }
            }
        }
        assert_eq!(found.len(), 1);
        let got = map
            .invert_apply(&FieldVector::from_bytes_raw(&target))
            .unwrap();
        assert_eq!(got.raw_bytes(), found[0].to_vec());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let map = AffineMap::identity(3);
        let err = map.apply(&FieldVector::zeros(2)).unwrap_err();
        assert_eq!(err, FieldError::DimensionMismatch { expected: 3, got: 2 });
        assert!(map.invert_apply(&FieldVector::zeros(4)).is_err());
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = Matrix::from_rows(vec![
            vec![Gf256(0x02), Gf256(0x04)],
            vec![Gf256(0x01), Gf256(0x02)],
        ])
        .unwrap();
        assert_eq!(
            AffineMap::new(m, FieldVector::zeros(2)).unwrap_err(),
            FieldError::Singular
        );
    }

    #[test]
    fn affine_random_properties() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let one = affine_random(1, &mut rng);
        assert!(!one.matrix().get(0, 0).is_zero());
        for _ in 0..100 {
            assert!(affine_random(16, &mut rng).matrix().is_invertible());
        }
        let a = affine_random(2, &mut ChaCha20Rng::seed_from_u64(99));
        let b = affine_random(2, &mut ChaCha20Rng::seed_from_u64(99));
        assert_eq!(a, b);
    }

    #[test]
    fn affine_encoding_layout() {
        let map = affine_random(3, &mut ChaCha20Rng::seed_from_u64(5));
        let bytes = map.to_bytes();
        assert_eq!(bytes.len(), 4 + 9 + 3);
        assert_eq!(&bytes[..4], &[0, 0, 0, 3]);
        assert_eq!(AffineMap::from_bytes(&bytes).unwrap(), map);
    }

    #[test]
    fn vector_encoding_layout() {
        let v = FieldVector::from_bytes_raw(&[9, 8, 7]);
        assert_eq!(v.to_bytes(), vec![0, 0, 0, 3, 9, 8, 7]);
        assert!(FieldVector::from_bytes(&[0, 0, 0, 4, 1]).is_err());
    }
}
