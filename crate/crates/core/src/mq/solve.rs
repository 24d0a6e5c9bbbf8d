use super::{MqError, QuadraticSystem};
use crate::field::FieldVector;

/// Largest search space the exhaustive solver accepts (`256^n ≤ 2^24`).
pub const MAX_BRUTEFORCE_SPACE: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteForceReport {
    /// Every common root, in lexicographic order of the input bytes.
    pub solutions: Vec<FieldVector>,
    /// Number of candidate inputs evaluated (always `256^n`).
    pub examined: u64,
}

/// Enumerates all of `GF(256)^n` and returns every `x` with `P(x) = 0`.
/// Only meant as a test oracle for tiny instances.
pub fn mq_bruteforce_solve(system: &QuadraticSystem) -> Result<BruteForceReport, MqError> {
    let n = system.n();
    let space = 256u64
        .checked_pow(n as u32)
        .filter(|&s| s <= MAX_BRUTEFORCE_SPACE)
        .ok_or(MqError::InstanceTooLarge { n })?;

    let mut solutions = Vec::new();
    let mut x = vec![0u8; n];
    for idx in 0..space {
        let mut rem = idx;
        for slot in x.iter_mut().rev() {
            *slot = (rem & 0xFF) as u8;
            rem >>= 8;
        }
        let v = FieldVector::from_bytes_raw(&x);
        if system.eval(&v)?.as_slice().iter().all(|g| g.is_zero()) {
            solutions.push(v);
        }
    }
    Ok(BruteForceReport {
        solutions,
        examined: space,
    })
}
