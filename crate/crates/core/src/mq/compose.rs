use super::{CentralMap, MqError, Quadratic, QuadraticSystem};
use crate::field::{AffineMap, Gf256, Matrix};

/// Computes the explicit system `P = S ∘ F ∘ T` by substituting the affine
/// map `T(u) = A u + b` into every quadratic form of `F` and then mixing the
/// resulting polynomials with `S`.
///
/// For `f(x) = xᵀQx + lᵀx + c` with `Q` upper-triangular:
///
/// ```text
/// f(Au + b) = uᵀ(AᵀQA)u + (Aᵀ((Q + Qᵀ)b + l))ᵀu + (bᵀQb + lᵀb + c)
/// ```
///
/// and the quadratic form `uᵀMu` folds back to upper-triangular storage as
/// `U_ii = M_ii`, `U_ij = M_ij + M_ji`.
pub fn compose_trapdoor(s: &AffineMap, f: &CentralMap, t: &AffineMap) -> Result<QuadraticSystem, MqError> {
    let (n, m) = (f.n(), f.m());
    if t.dim() != n {
        return Err(MqError::DimensionChain(format!(
            "T is {}×{} but F takes {n} inputs",
            t.dim(),
            t.dim()
        )));
    }
    if s.dim() != m {
        return Err(MqError::DimensionChain(format!(
            "S is {}×{} but F has {m} outputs",
            s.dim(),
            s.dim()
        )));
    }

    let a = t.matrix();
    let a_t = a.transpose();
    let b = t.offset().as_slice();

    let substituted: Vec<Quadratic> = f
        .system()
        .polys()
        .iter()
        .map(|p| substitute(p, a, &a_t, b))
        .collect();

    let mixed = (0..m)
        .map(|r| {
            let mut out = Quadratic::zero(n);
            for (k, g) in substituted.iter().enumerate() {
                let w = s.matrix().get(r, k);
                if w.is_zero() {
                    continue;
                }
                for (dst, src) in out.quad.iter_mut().zip(&g.quad) {
                    *dst += w * *src;
                }
                for (dst, src) in out.linear.iter_mut().zip(&g.linear) {
                    *dst += w * *src;
                }
                out.constant += w * g.constant;
            }
            out.constant += s.offset()[r];
            out
        })
        .collect();

    QuadraticSystem::new(n, mixed)
}

fn substitute(p: &Quadratic, a: &Matrix, a_t: &Matrix, b: &[Gf256]) -> Quadratic {
    let n = p.arity();
    let mut q = Matrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            q.set(i, j, p.quad(i, j));
        }
    }

    let m = a_t.mul_mat(&q.mul_mat(a));
    let mut out = Quadratic::zero(n);
    for i in 0..n {
        out.set_quad(i, i, m.get(i, i));
        for j in i + 1..n {
            out.set_quad(i, j, m.get(i, j) + m.get(j, i));
        }
    }

    // (Q + Qᵀ) b + l
    let mut sym_b: Vec<Gf256> = p.linear.clone();
    for i in 0..n {
        for j in 0..n {
            let coeff = q.get(i, j) + q.get(j, i);
            sym_b[i] += coeff * b[j];
        }
    }
    out.linear = a_t.mul_vec(&sym_b);

    let qb = q.mul_vec(b);
    let mut c = p.constant;
    for i in 0..n {
        c += b[i] * qb[i] + p.linear[i] * b[i];
    }
    out.constant = c;
    out
}
